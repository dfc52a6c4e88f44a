//! Train a model, write it as a text checkpoint, reload it and confirm the
//! predictions match.
//!
//! cargo run --release --example checkpoint -- [path]

use herb::checkpoint::Checkpoint;
use herb::graph::synthetic::sbm_with_homophily;
use herb::graph::{make_splits, SplitScheme};
use herb::model::{predict, train_baseline, ModelKind, TrainConfig};

fn main() -> herb::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("herb_example.ckpt"), Into::into);
    let g = sbm_with_homophily(120, 3, 5.0, 0.8, 1)?.with_noisy_features(8, 0.6).build()?;
    let masks = make_splits(&g, &SplitScheme::per_class_fractions(10, 0.2, 0.4), 0)?;
    let (out, inputs) = train_baseline(&g, &masks, ModelKind::Gcn, &TrainConfig::default(), 0)?;

    Checkpoint::new(ModelKind::Gcn, "example", 0, out.best.clone()).save(&path)?;
    let loaded = Checkpoint::load(&path)?;
    let same = predict(&out.best, &inputs)? == predict(&loaded.params, &inputs)?;
    println!("wrote {} ({} hidden units); reloaded predictions identical: {same}", path.display(), loaded.hidden);
    Ok(())
}
