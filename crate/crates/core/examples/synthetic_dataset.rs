//! Writes a stochastic-block-model graph in the on-disk dataset layout.
//!
//! cargo run --release --example synthetic_dataset -- /tmp/data sbm 300 4 0.2

use herb::graph::synthetic::sbm_with_homophily;
use herb::graph::{dataset_dir, edge_homophily, write_dataset};

fn main() -> herb::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let root = args.get(1).map_or("data", String::as_str);
    let name = args.get(2).map_or("sbm", String::as_str);
    let n: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(300);
    let classes: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(4);
    let homophily: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.2);

    let g = sbm_with_homophily(n, classes, 4.0, homophily, 0)?
        .with_noisy_features(24, 0.6)
        .build()?;
    let dir = dataset_dir(root, name);
    write_dataset(&g, &dir)?;
    println!(
        "{}: {} nodes, {} edges, {} classes, edge homophily {:.3}",
        dir.display(),
        g.n(),
        g.edge_count(),
        g.class_count(),
        edge_homophily(&g)?
    );
    Ok(())
}
