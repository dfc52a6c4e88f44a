use std::rc::Rc;

use herb::graph::synthetic::sbm_with_homophily;
use herb::graph::{partition_head_tail, Graph};
use herb::model::{
    forward, loss_head, loss_total, translation_residuals, HerbParams, Propagation, TrainConfig, TrainInputs,
};
use herb::rng::{seeded, Stream};
use herb::similarity::pairwise_similarity;
use herb::tensor::{AdamConfig, AdamState, Matrix, Tape};
use herb::transfer::{TransferConfig, TransferContext, TransferMode};

fn homophilic_graph(homophily: f64, seed: u64) -> Graph {
    sbm_with_homophily(60, 3, 6.0, homophily, seed)
        .unwrap()
        .with_one_hot_features()
        .build()
        .unwrap()
}

fn transfer_inputs(g: &Graph) -> TrainInputs {
    let a = g.adjacency();
    let s_sf = pairwise_similarity(g.features());
    let ctx = TransferContext::build(
        a,
        a,
        &s_sf,
        &partition_head_tail(g),
        &TransferConfig::default(),
        TransferMode::Homophilic,
    )
    .unwrap();
    TrainInputs::new(g, Propagation::head_tail(a, &ctx).unwrap())
}

#[test]
fn every_row_takes_exactly_one_path() {
    let g = homophilic_graph(0.5, 3);
    let inputs = transfer_inputs(&g);
    let Propagation::HeadTail(ops) = &inputs.propagation else {
        panic!("expected head/tail propagation")
    };
    let part = partition_head_tail(&g);
    for v in 0..g.n() {
        let head_row = ops.head_prop.row(v).iter().any(|&x| x != 0.0);
        let tail_row = ops.tail_prop.row(v).iter().any(|&x| x != 0.0);
        assert!(head_row ^ tail_row, "node {v}");
        assert_eq!(head_row, part.is_head(v));
    }
}

#[test]
fn head_loss_falls_when_only_the_localizer_trains() {
    let g = homophilic_graph(0.9, 11);
    let inputs = transfer_inputs(&g);
    let mut model = HerbParams::init(g.feature_dim(), 8, g.class_count(), true, 4);
    let frozen: Vec<_> = model
        .layers
        .iter()
        .flat_map(|l| [l.weight, l.bias])
        .collect();
    let mut adam = AdamState::new(AdamConfig::new(0.01, 0.0), &model.params);
    let mut rng = seeded(0, Stream::Dropout);
    let mut series = Vec::new();
    for _ in 0..=20 {
        let tape = Tape::new();
        let p = tape.bind(&model.params);
        let out = forward(&tape, &p, &model, &inputs.propagation, &inputs.features, 0.0, false, &mut rng).unwrap();
        let head = loss_head(&tape, &out.discrepancies).unwrap();
        series.push(head.item());
        tape.backward_into(head, &mut model.params).unwrap();
        for &id in &frozen {
            let shape = model.params.value(id).shape();
            model.params.get_mut(id).grad = Some(Matrix::zeros(shape.0, shape.1));
        }
        let before: Vec<Matrix> = frozen.iter().map(|&id| model.params.value(id).clone()).collect();
        adam.step(&mut model.params).unwrap();
        for (&id, b) in frozen.iter().zip(&before) {
            assert_eq!(model.params.value(id), b);
        }
    }
    for w in series.windows(2) {
        assert!(w[1] < w[0], "head loss rose: {series:?}");
    }
}

#[test]
fn tail_translation_residual_shrinks_during_training() {
    let g = homophilic_graph(1.0, 7);
    let inputs = transfer_inputs(&g);
    let Propagation::HeadTail(ops) = &inputs.propagation else {
        panic!("expected head/tail propagation")
    };
    let part = partition_head_tail(&g);
    // Tails whose pooled neighbourhood is nonempty; with pure homophily it
    // holds only same-class nodes, so the one-hot target equals z itself.
    let tails: Vec<usize> = part
        .tail
        .iter()
        .copied()
        .filter(|&v| ops.pool_localizer.row(v).iter().any(|&x| x != 0.0))
        .collect();
    assert!(!tails.is_empty());

    let cfg = TrainConfig {
        mu: 1.0,
        dropout: 0.0,
        ..TrainConfig::default()
    };
    let mut model = HerbParams::init(g.feature_dim(), 16, g.class_count(), true, 2);
    let mut adam = AdamState::new(AdamConfig::new(cfg.lr, cfg.weight_decay), &model.params);
    let train = Rc::new((0..g.n()).step_by(3).collect::<Vec<_>>());
    let mut rng = seeded(0, Stream::Dropout);
    let mean_tail = |m: &HerbParams| {
        let r = translation_residuals(m, &inputs).unwrap().unwrap();
        tails.iter().map(|&v| r[v]).sum::<f64>() / tails.len() as f64
    };
    let mut series = vec![mean_tail(&model)];
    for epoch in 1..=60 {
        let tape = Tape::new();
        let p = tape.bind(&model.params);
        let out = forward(&tape, &p, &model, &inputs.propagation, &inputs.features, 0.0, true, &mut rng).unwrap();
        let head = loss_head(&tape, &out.discrepancies).unwrap();
        let loss = loss_total(&tape, &p, &out.logits, &inputs.labels, &train, Some(&head), &cfg).unwrap();
        tape.backward_into(loss, &mut model.params).unwrap();
        adam.step(&mut model.params).unwrap();
        if epoch % 10 == 0 {
            series.push(mean_tail(&model));
        }
    }
    for w in series.windows(2) {
        assert!(w[1] < w[0], "residual series not decreasing: {series:?}");
    }
}

#[test]
fn residuals_are_absent_without_transfer() {
    let g = homophilic_graph(0.5, 1);
    let inputs = TrainInputs::new(&g, Propagation::shared(g.adjacency()));
    let model = HerbParams::init(g.feature_dim(), 4, g.class_count(), false, 0);
    assert!(translation_residuals(&model, &inputs).unwrap().is_none());
}
