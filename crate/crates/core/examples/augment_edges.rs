//! Pre-train both encoders, build similarity matrices and apply the
//! heterophily-lessening edge edits. Prints homophily and entropy before and
//! after.
//!
//! cargo run --release --example augment_edges -- [homophily] [seed]

use herb::augment::{augment, AugmentConfig, AugmentMode};
use herb::encoders::{pretrain_encoders, EncoderConfig};
use herb::graph::synthetic::sbm_with_homophily;
use herb::graph::{edge_homophily, edge_homophily_of, make_splits, SplitScheme};
use herb::metrics::entropy_report;
use herb::similarity::{build_bundle, DEFAULT_SIGMA};

fn main() -> herb::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let homophily: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);

    let g = sbm_with_homophily(300, 4, 5.0, homophily, seed)?.with_noisy_features(16, 0.8).build()?;
    let masks = make_splits(&g, &SplitScheme::per_class_fractions(20, 0.2, 0.4), seed)?;
    let enc = pretrain_encoders(&g, &masks, &EncoderConfig::default(), seed)?;
    let bundle = build_bundle(&enc.z_str, &enc.z_fea, DEFAULT_SIGMA)?;

    let cfg = AugmentConfig::default();
    println!("original: {} edges, homophily {:.3}", g.edge_count(), edge_homophily(&g)?);
    for mode in [AugmentMode::Plain, AugmentMode::HeterophilyLessening] {
        let out = augment(&g, &bundle, &cfg, &masks, mode)?;
        let after = g.with_adjacency(out.a_prime.clone())?;
        let delta = (out.added.len() + out.removed.len()) as f64 / (g.edge_count() + out.added.len()) as f64;
        let e = entropy_report(&g, &after, delta)?;
        println!(
            "{mode:?}: +{} -{} edges, homophily {:.3}, entropy {:.4} -> expected {:.4}",
            out.added.len(),
            out.removed.len(),
            edge_homophily_of(&out.a_prime, g.labels())?,
            e.entropy,
            e.expected_entropy,
        );
    }
    Ok(())
}
