//! GCN and MLP baselines on a dataset directory.
//!
//! cargo run --release --example baselines -- data cora 10

use std::time::Instant;

use herb::graph::{edge_homophily, load_dataset, make_splits, SplitScheme};
use herb::metrics::{f1_scores, mean_std};
use herb::model::{predict, train_baseline, ModelKind, TrainConfig};

fn main() -> herb::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let root = args.get(1).map_or("data", String::as_str);
    let name = args.get(2).map_or("cora", String::as_str);
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);

    let g = load_dataset(root, name)?;
    println!("{name}: n={} f={} C={} edges={} h={:.3}", g.n(), g.feature_dim(), g.class_count(), g.edge_count(), edge_homophily(&g)?);
    let cfg = TrainConfig::default();
    for kind in [ModelKind::Gcn, ModelKind::Mlp] {
        let started = Instant::now();
        let mut scores = Vec::new();
        for seed in 0..seeds {
            let masks = make_splits(&g, &SplitScheme::for_dataset(name), seed)?;
            let (out, inputs) = train_baseline(&g, &masks, kind, &cfg, seed)?;
            let pred = predict(&out.best, &inputs)?;
            let (p, t): (Vec<_>, Vec<_>) = masks.test.iter().map(|&v| (pred[v], g.labels()[v])).unzip();
            let micro = f1_scores(&p, &t, g.class_count())?.micro;
            println!("  {kind} seed {seed}: test micro-F1 {:.1} (best epoch {})", 100.0 * micro, out.best_epoch);
            scores.push(100.0 * micro);
        }
        let (m, s) = mean_std(&scores);
        println!("{kind}: {m:.1} ± {s:.1} over {seeds} seeds in {:.1?}", started.elapsed());
    }
    Ok(())
}
