//! Full pipeline on one dataset for a few seeds.
//!
//! cargo run --release --example herb_run -- data texas 3 [epochs]

use std::time::Instant;

use herb::graph::load_dataset;
use herb::metrics::mean_std;
use herb::model::{ModelKind, TrainConfig};
use herb::pipeline::{run, EmbeddingSource, PipelineConfig};

fn main() -> herb::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let root = args.get(1).map_or("data", String::as_str);
    let name = args.get(2).map_or("cora", String::as_str);
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let epochs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1000);

    let g = load_dataset(root, name)?;
    let cfg = PipelineConfig {
        train: TrainConfig { epochs, ..TrainConfig::default() },
        ..PipelineConfig::default()
    };
    let mut scores = Vec::new();
    for seed in 0..seeds {
        let t = Instant::now();
        let r = run(name, &g, &cfg, ModelKind::Herb, seed, EmbeddingSource::Train, "-")?;
        let aug = &r.prepared.augmentation;
        println!(
            "seed {seed}: test micro {:.1} macro {:.1} head {:?} tail {:?} (+{} -{} edges, best epoch {}, {:.1?})",
            100.0 * r.test.micro_f1,
            100.0 * r.test.macro_f1,
            r.test.head_micro_f1.map(|v| (100.0 * v).round()),
            r.test.tail_micro_f1.map(|v| (100.0 * v).round()),
            aug.added.len(),
            aug.removed.len(),
            r.outcome.best_epoch,
            t.elapsed()
        );
        scores.push(100.0 * r.test.micro_f1);
    }
    let (m, s) = mean_std(&scores);
    println!("herb on {name}: {m:.1} ± {s:.1}");
    Ok(())
}
