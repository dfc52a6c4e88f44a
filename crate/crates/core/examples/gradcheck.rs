//! Finite-difference check of every gradient in the full objective, including
//! the localiser and the head loss.
//!
//! cargo run --release --example gradcheck

use std::rc::Rc;

use herb::graph::partition_head_tail;
use herb::graph::synthetic::sbm_with_homophily;
use herb::model::{forward, loss_head, loss_total, HerbParams, Propagation, TrainConfig, TrainInputs};
use herb::rng::{seeded, Stream};
use herb::similarity::pairwise_similarity;
use herb::tensor::check_gradients;
use herb::transfer::{TransferConfig, TransferContext, TransferMode};

fn main() -> herb::Result<()> {
    let g = sbm_with_homophily(24, 3, 3.0, 0.6, 2)?.with_noisy_features(5, 0.5).build()?;
    let a = g.adjacency();
    let ctx = TransferContext::build(a, a, &pairwise_similarity(g.features()), &partition_head_tail(&g), &TransferConfig::default(), TransferMode::Homophilic)?;
    let inputs = TrainInputs::new(&g, Propagation::head_tail(a, &ctx)?);
    let model = HerbParams::init(g.feature_dim(), 6, g.class_count(), true, 0);
    let cfg = TrainConfig { mu: 0.5, ..TrainConfig::default() };
    let train = Rc::new((0..g.n()).step_by(2).collect::<Vec<_>>());

    let report = check_gradients(&model.params, 1e-5, |tape, ps| {
        let p = tape.bind(ps);
        let mut rng = seeded(0, Stream::Dropout);
        let out = forward(tape, &p, &model, &inputs.propagation, &inputs.features, 0.0, false, &mut rng)?;
        let head = loss_head(tape, &out.discrepancies)?;
        loss_total(tape, &p, &out.logits, &inputs.labels, &train, Some(&head), &cfg)
    })?;
    for group in &report.groups {
        println!("{:<24} relative error {:.2e}", group.name, group.relative_error);
    }
    println!("worst {:.2e}, passes 1e-4: {}", report.worst(), report.passes(1e-4));
    Ok(())
}
