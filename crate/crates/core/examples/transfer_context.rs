//! Head/tail partition and the adjacency blends used to transfer neighbourhood
//! information from heads to tails.
//!
//! cargo run --release --example transfer_context -- [alpha] [beta]

use herb::graph::synthetic::sbm_with_homophily;
use herb::graph::partition_head_tail;
use herb::similarity::pairwise_similarity;
use herb::transfer::{TransferConfig, TransferContext, TransferMode};

fn main() -> herb::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = TransferConfig::default();
    if let Some(a) = args.get(1).and_then(|s| s.parse().ok()) {
        cfg.alpha = a;
    }
    if let Some(b) = args.get(2).and_then(|s| s.parse().ok()) {
        cfg.beta = b;
    }

    let g = sbm_with_homophily(200, 4, 4.0, 0.7, 5)?.with_one_hot_features().build()?;
    let part = partition_head_tail(&g);
    println!("{} heads, {} tails", part.head.len(), part.tail.len());

    let s_sf = pairwise_similarity(g.features());
    let a = g.adjacency();
    let ctx = TransferContext::build(a, a, &s_sf, &part, &cfg, TransferMode::Homophilic)?;
    println!("alpha {} beta {} k {}", ctx.alpha, ctx.beta, ctx.k);

    let nnz = |m: &herb::tensor::Matrix| m.data().iter().filter(|&&v| v != 0.0).count();
    println!("nonzeros: A {} A_2hop {} A_expand {} A_sim {} A_tilde {}", nnz(a), nnz(&ctx.a_2hop), nnz(&ctx.a_expand), nnz(&ctx.a_sim), nnz(&ctx.a_tilde));

    let labels = g.labels();
    let (mut same, mut total) = (0usize, 0usize);
    for &t in &part.tail {
        for (h, &w) in ctx.a_sim.row(t).iter().enumerate() {
            if w != 0.0 {
                total += 1;
                same += usize::from(labels[h] == labels[t]);
            }
        }
    }
    println!("selected heads sharing the tail's label: {same}/{total}");
    Ok(())
}
