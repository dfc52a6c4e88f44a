//! Ablation grid and a one-parameter sweep through the command layer, on a
//! synthetic dataset written to a scratch directory.
//!
//! cargo run --release --example ablation_sweep -- [scratch_dir]

use std::path::PathBuf;

use herb::cli::{cmd_sweep, cmd_train, parse_ablations};
use herb::config::{parse_sweep_values, RunConfig};
use herb::graph::synthetic::sbm_with_homophily;
use herb::graph::{dataset_dir, write_dataset};

fn main() -> herb::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("herb_ablation_sweep"), PathBuf::from);
    let g = sbm_with_homophily(150, 3, 5.0, 0.3, 9)?.with_noisy_features(12, 0.7).build()?;
    write_dataset(&g, dataset_dir(dir.join("data"), "sbm"))?;

    let mut cfg = RunConfig::for_dataset("sbm");
    cfg.data_root = Some(dir.join("data"));
    cfg.output = dir.join("results");
    cfg.apply_overrides(&["seeds=0..3", "epochs=200", "encoder_epochs=50", "split_per_class=10", "split_val=0.2", "split_test=0.4"])?;

    for s in cmd_train(&cfg, &parse_ablations("grid")?, false)? {
        println!("{}", s.render());
    }
    let sweep = cmd_sweep(&cfg, &[("beta".into(), parse_sweep_values("0.1..0.9:0.2")?)])?;
    for r in &sweep.rows {
        println!("beta {}: micro {:.1} ± {:.1}", r.value, 100.0 * r.micro_mean, 100.0 * r.micro_std);
    }
    println!("sweep table: {}", sweep.path.display());
    Ok(())
}
