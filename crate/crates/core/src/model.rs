//! The two-layer model with head/tail message passing, its losses, the
//! training loop and the GCN/MLP baselines that share it.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentMode;
use crate::encoders::{normalized_adjacency, GcnLayerParams};
use crate::error::{HerbError, Result};
use crate::graph::{Graph, HeadTailPartition, SplitMasks};
use crate::metrics::f1_scores;
use crate::rng::{seeded, HerbRng, Stream};
use crate::tensor::{argmax_rows, AdamConfig, AdamState, BoundParams, Matrix, ParamSet, Tape, Var};
use crate::transfer::{localize_pooled, mean_pooling, LocalizerParams, TransferContext, TransferMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Herb,
    Gcn,
    Mlp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Herb => "herb",
            ModelKind::Gcn => "gcn",
            ModelKind::Mlp => "mlp",
        })
    }
}

impl FromStr for ModelKind {
    type Err = HerbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "herb" => Ok(ModelKind::Herb),
            "gcn" => Ok(ModelKind::Gcn),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(HerbError::Config(format!("unknown model '{other}' (herb, gcn, mlp)"))),
        }
    }
}

/// Named module combinations of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ablation {
    /// Structure-only augmentation.
    A,
    AHe,
    /// Translation without homophilic head selection.
    B,
    BHo,
    Full,
}

impl Ablation {
    pub const GRID: [Ablation; 5] = [Ablation::A, Ablation::AHe, Ablation::B, Ablation::BHo, Ablation::Full];

    pub fn modes(self) -> (AugmentMode, TransferMode) {
        match self {
            Ablation::A => (AugmentMode::Plain, TransferMode::Off),
            Ablation::AHe => (AugmentMode::HeterophilyLessening, TransferMode::Off),
            Ablation::B => (AugmentMode::Off, TransferMode::Plain),
            Ablation::BHo => (AugmentMode::Off, TransferMode::Homophilic),
            Ablation::Full => (AugmentMode::HeterophilyLessening, TransferMode::Homophilic),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Ablation::A => "A",
            Ablation::AHe => "A_he",
            Ablation::B => "B",
            Ablation::BHo => "B_ho",
            Ablation::Full => "A_he+B_ho",
        }
    }
}

impl FromStr for Ablation {
    type Err = HerbError;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::GRID
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("full") && *a == Ablation::Full))
            .ok_or_else(|| HerbError::Config(format!("unknown ablation '{s}' (A, A_he, B, B_ho, full)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Decoupled decay applied by the optimiser.
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub early_stop_window: usize,
    /// Weight of the squared-norm penalty on every parameter.
    pub lambda: f64,
    /// Weight of the head-node neighbourhood constraint.
    pub mu: f64,
    pub hidden: usize,
    pub augment: AugmentMode,
    pub transfer: TransferMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            weight_decay: 0.005,
            dropout: 0.7,
            epochs: 1000,
            early_stop_window: 300,
            lambda: 0.005,
            mu: 0.005,
            hidden: 32,
            augment: AugmentMode::HeterophilyLessening,
            transfer: TransferMode::Homophilic,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HerbError::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        for (name, v) in [("weight_decay", self.weight_decay), ("lambda", self.lambda), ("mu", self.mu)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive".into());
        }
        if self.early_stop_window == 0 {
            return bad("early_stop_window must be positive".into());
        }
        Ok(())
    }

    pub fn with_ablation(self, a: Ablation) -> Self {
        let (augment, transfer) = a.modes();
        TrainConfig {
            augment,
            transfer,
            ..self
        }
    }
}

/// Parameters of a two-layer model (`f → hidden → C`), plus the
/// translation localiser when transfer is enabled.
#[derive(Debug, Clone)]
pub struct HerbParams {
    pub params: ParamSet,
    pub layers: [GcnLayerParams; 2],
    pub localizer: Option<LocalizerParams>,
}

impl HerbParams {
    /// Layer weights are drawn first, so a model without localiser is
    /// initialised exactly like a plain GCN with the same seed.
    pub fn init(in_dim: usize, hidden: usize, classes: usize, with_localizer: bool, seed: u64) -> Self {
        let mut rng = seeded(seed, Stream::Init);
        let mut params = ParamSet::new();
        let l1 = GcnLayerParams::init(&mut params, "layer1", in_dim, hidden, &mut rng);
        let l2 = GcnLayerParams::init(&mut params, "layer2", hidden, classes, &mut rng);
        let localizer = with_localizer.then(|| LocalizerParams::init(&mut params, &[in_dim, hidden], &mut rng));
        HerbParams {
            params,
            layers: [l1, l2],
            localizer,
        }
    }
}

/// Constant propagation operators for one graph.
#[derive(Debug, Clone)]
pub enum Propagation {
    /// No message passing (MLP).
    Dense,
    /// `D̃^{-1/2}(A+I)D̃^{-1/2}` on every row.
    Shared(Rc<Matrix>),
    /// Head rows propagate over `A″`, tail rows over `Ã` with the
    /// translation-supplemented embeddings.
    HeadTail(Rc<HeadTailOps>),
}

#[derive(Debug, Clone)]
pub struct HeadTailOps {
    /// Head rows of the normalised `A″ + I`; tail rows zero.
    pub head_prop: Rc<Matrix>,
    /// Tail rows of the normalised `Ã + I`; head rows zero.
    pub tail_prop: Rc<Matrix>,
    /// Weighted-mean pooling over `A″` (observed neighbourhood).
    pub pool_observed: Rc<Matrix>,
    /// Pooling fed to the localiser: `A″` rows for heads, `Ã` rows for tails.
    pub pool_localizer: Rc<Matrix>,
    pub head_indicator: Rc<Vec<f64>>,
    pub tail_indicator: Rc<Vec<f64>>,
}

fn keep_rows(m: Matrix, keep: &[f64]) -> Matrix {
    let (r, c) = m.shape();
    Matrix::from_fn(r, c, |i, j| if keep[i] != 0.0 { m.get(i, j) } else { 0.0 }).with_nonzero_index()
}

impl Propagation {
    pub fn shared(adj: &Matrix) -> Self {
        Propagation::Shared(Rc::new(normalized_adjacency(adj, true)))
    }

    pub fn head_tail(a_dprime: &Matrix, ctx: &TransferContext) -> Result<Self> {
        let p = &ctx.partition;
        if p.n() != a_dprime.rows() {
            return Err(HerbError::precondition("partition and adjacency disagree on n"));
        }
        let head = p.head_indicator();
        let tail = p.tail_indicator();
        let pool_dprime = mean_pooling(a_dprime);
        let pool_tilde = mean_pooling(&ctx.a_tilde);
        let n = a_dprime.rows();
        let pool_localizer = Matrix::from_fn(n, n, |i, j| {
            if head[i] != 0.0 {
                pool_dprime.get(i, j)
            } else {
                pool_tilde.get(i, j)
            }
        })
        .with_nonzero_index();
        Ok(Propagation::HeadTail(Rc::new(HeadTailOps {
            head_prop: Rc::new(keep_rows(normalized_adjacency(a_dprime, true), &head)),
            tail_prop: Rc::new(keep_rows(normalized_adjacency(&ctx.a_tilde, true), &tail)),
            pool_observed: Rc::new(pool_dprime),
            pool_localizer: Rc::new(pool_localizer),
            head_indicator: Rc::new(head),
            tail_indicator: Rc::new(tail),
        })))
    }
}

pub struct ForwardOutput<'t> {
    pub logits: Var<'t>,
    /// Per layer, `z + r - z_N` on head rows (tail rows zero). Empty without transfer.
    pub discrepancies: Vec<Var<'t>>,
}

fn finite_or_err(v: &Var<'_>, what: &str) -> Result<()> {
    if v.value().all_finite() {
        Ok(())
    } else {
        Err(HerbError::NonFinite(what.to_string()))
    }
}

fn propagate_layer<'t>(
    tape: &'t Tape,
    p: &BoundParams<'t>,
    model: &HerbParams,
    prop: &Propagation,
    l: usize,
    z: &Var<'t>,
    discrepancies: &mut Vec<Var<'t>>,
) -> Result<Var<'t>> {
    let layer = &model.layers[l];
    match prop {
        Propagation::Dense => layer.dense(p, z),
        Propagation::Shared(a) => layer.forward(p, &tape.constant_rc(a.clone()), z),
        Propagation::HeadTail(ops) => {
            let loc = model
                .localizer
                .as_ref()
                .ok_or_else(|| HerbError::Config("head/tail propagation needs localiser parameters".into()))?;
            let z_obs = tape.constant_rc(ops.pool_observed.clone()).matmul(z)?;
            let pool = tape.constant_rc(ops.pool_localizer.clone());
            let r = localize_pooled(p, &loc.layers[l], z, &pool)?;
            let disc = z.add(&r)?.sub(&z_obs)?;
            discrepancies.push(disc.scale_rows(ops.head_indicator.clone())?);
            let supplemented = z.add(&disc.scale_rows(ops.tail_indicator.clone())?)?;
            let w = p.get(layer.weight);
            let heads = tape.constant_rc(ops.head_prop.clone()).matmul(&z.matmul(&w)?)?;
            let tails = tape.constant_rc(ops.tail_prop.clone()).matmul(&supplemented.matmul(&w)?)?;
            heads.add(&tails)?.add_row(&p.get(layer.bias))
        }
    }
}

/// Two layers with ReLU and dropout in between; raw logits out.
#[allow(clippy::too_many_arguments)]
pub fn forward<'t>(
    tape: &'t Tape,
    p: &BoundParams<'t>,
    model: &HerbParams,
    prop: &Propagation,
    features: &Rc<Matrix>,
    dropout: f64,
    training: bool,
    rng: &mut HerbRng,
) -> Result<ForwardOutput<'t>> {
    let mut discrepancies = Vec::new();
    let x = tape.constant_rc(features.clone());
    let h = propagate_layer(tape, p, model, prop, 0, &x, &mut discrepancies)?;
    finite_or_err(&h, "layer 1 activations")?;
    let h = h.relu().dropout(dropout, training, rng)?;
    let logits = propagate_layer(tape, p, model, prop, 1, &h, &mut discrepancies)?;
    finite_or_err(&logits, "layer 2 logits")?;
    Ok(ForwardOutput { logits, discrepancies })
}

/// `Σ_layers Σ_heads ‖z_v + r_v − z_N(v)‖²`; zero when there is nothing to sum.
pub fn loss_head<'t>(tape: &'t Tape, discrepancies: &[Var<'t>]) -> Result<Var<'t>> {
    let mut terms = discrepancies.iter().map(|d| d.sum_squares());
    match terms.next() {
        None => Ok(tape.constant(Matrix::scalar(0.0))),
        Some(first) => terms.try_fold(first, |acc, t| acc.add(&t)),
    }
}

/// `λ Σ ‖p‖²` over every bound parameter, in parameter order.
pub fn l2_penalty<'t>(tape: &'t Tape, p: &BoundParams<'t>, lambda: f64) -> Result<Var<'t>> {
    let mut total: Option<Var<'t>> = None;
    for v in p.iter() {
        let s = v.sum_squares();
        total = Some(match total {
            None => s,
            Some(acc) => acc.add(&s)?,
        });
    }
    Ok(total.unwrap_or_else(|| tape.constant(Matrix::scalar(0.0))).scale(lambda))
}

/// Cross-entropy on the training rows `+ λ Σ‖p‖² + μ · head_loss`.
pub fn loss_total<'t>(
    tape: &'t Tape,
    p: &BoundParams<'t>,
    logits: &Var<'t>,
    labels: &Rc<Vec<usize>>,
    train: &Rc<Vec<usize>>,
    head_loss: Option<&Var<'t>>,
    cfg: &TrainConfig,
) -> Result<Var<'t>> {
    let ce = logits.softmax_cross_entropy(labels.clone(), train.clone())?;
    let mut loss = ce.add(&l2_penalty(tape, p, cfg.lambda)?)?;
    if let Some(h) = head_loss {
        loss = loss.add(&h.scale(cfg.mu))?;
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub head_loss: f64,
    pub val_loss: f64,
    pub val_micro_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: HerbParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Everything the epoch loop needs besides the configuration.
#[derive(Debug, Clone)]
pub struct TrainInputs {
    pub features: Rc<Matrix>,
    pub labels: Rc<Vec<usize>>,
    pub class_count: usize,
    pub propagation: Propagation,
}

impl TrainInputs {
    pub fn new(g: &Graph, propagation: Propagation) -> Self {
        TrainInputs {
            features: Rc::new(g.features().clone()),
            labels: Rc::new(g.labels().to_vec()),
            class_count: g.class_count(),
            propagation,
        }
    }
}

/// Evaluation-mode logits.
pub fn predict_logits(model: &HerbParams, inputs: &TrainInputs) -> Result<Matrix> {
    let tape = Tape::new();
    let p = tape.bind(&model.params);
    let mut rng = seeded(0, Stream::Dropout);
    let out = forward(&tape, &p, model, &inputs.propagation, &inputs.features, 0.0, false, &mut rng)?;
    Ok((*out.logits.value()).clone())
}

pub fn predict(model: &HerbParams, inputs: &TrainInputs) -> Result<Vec<usize>> {
    Ok(argmax_rows(&predict_logits(model, inputs)?))
}

/// Per-node `‖z + r − z_N‖` at the input layer, where `z_N` pools over `A″`
/// for heads and over `Ã` for tails. `None` without transfer.
pub fn translation_residuals(model: &HerbParams, inputs: &TrainInputs) -> Result<Option<Vec<f64>>> {
    let (Propagation::HeadTail(ops), Some(loc)) = (&inputs.propagation, &model.localizer) else {
        return Ok(None);
    };
    let tape = Tape::new();
    let p = tape.bind(&model.params);
    let x = tape.constant_rc(inputs.features.clone());
    let pool = tape.constant_rc(ops.pool_localizer.clone());
    let r = localize_pooled(&p, &loc.layers[0], &x, &pool)?;
    let res = x.add(&r)?.sub(&pool.matmul(&x)?)?.value();
    Ok(Some(
        (0..res.rows())
            .map(|i| res.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect(),
    ))
}

fn val_metrics(logits: &Matrix, inputs: &TrainInputs, val: &Rc<Vec<usize>>) -> Result<(f64, f64)> {
    if val.is_empty() {
        return Ok((0.0, 0.0));
    }
    let pred = argmax_rows(logits);
    let (p, t): (Vec<usize>, Vec<usize>) = val.iter().map(|&v| (pred[v], inputs.labels[v])).unzip();
    let micro = f1_scores(&p, &t, inputs.class_count)?.micro;
    let tape = Tape::new();
    let loss = tape
        .constant(logits.clone())
        .softmax_cross_entropy(inputs.labels.clone(), val.clone())?
        .item();
    Ok((micro, loss))
}

/// Adam on the total loss; keeps the parameters of the best validation
/// epoch (higher Micro-F1, then lower validation loss) and stops after
/// `early_stop_window` epochs without improvement.
pub fn train_model(model: HerbParams, inputs: &TrainInputs, masks: &SplitMasks, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    if masks.train.is_empty() {
        return Err(HerbError::precondition("training mask is empty"));
    }
    let mut model = model;
    let mut adam = AdamState::new(AdamConfig::new(cfg.lr, cfg.weight_decay), &model.params);
    let mut drop_rng = seeded(seed, Stream::Dropout);
    let train = Rc::new(masks.train.clone());
    let val = Rc::new(masks.val.clone());

    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_key = (f64::NEG_INFINITY, f64::INFINITY);
    let mut history = Vec::new();

    for epoch in 0..cfg.epochs {
        let (train_loss, head_loss) = {
            let tape = Tape::new();
            let p = tape.bind(&model.params);
            let out = forward(&tape, &p, &model, &inputs.propagation, &inputs.features, cfg.dropout, true, &mut drop_rng)?;
            let head = if out.discrepancies.is_empty() {
                None
            } else {
                Some(loss_head(&tape, &out.discrepancies)?)
            };
            let loss = loss_total(&tape, &p, &out.logits, &inputs.labels, &train, head.as_ref(), cfg)?;
            let value = loss.item();
            if !value.is_finite() {
                return Err(HerbError::Diverged {
                    epoch,
                    detail: format!("total loss is {value}"),
                });
            }
            tape.backward_into(loss, &mut model.params)?;
            (value, head.map_or(0.0, |h| h.item()))
        };
        adam.step(&mut model.params)?;

        let logits = predict_logits(&model, inputs)?;
        let (val_micro, val_loss) = val_metrics(&logits, inputs, &val)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            head_loss,
            val_loss,
            val_micro_f1: val_micro,
        });
        if val_micro > best_key.0 || (val_micro == best_key.0 && val_loss < best_key.1) {
            best_key = (val_micro, val_loss);
            best_epoch = epoch;
            best = model.clone();
        } else if epoch - best_epoch >= cfg.early_stop_window {
            break;
        }
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        history,
    })
}

/// Propagation for a model kind: the MLP ignores edges, the GCN uses `A″`
/// on every row, and the full model splits heads from tails when transfer
/// is enabled.
pub fn propagation_for(kind: ModelKind, cfg: &TrainConfig, a_dprime: &Matrix, ctx: Option<&TransferContext>) -> Result<Propagation> {
    match (kind, cfg.transfer, ctx) {
        (ModelKind::Mlp, _, _) => Ok(Propagation::Dense),
        (ModelKind::Gcn, _, _) | (ModelKind::Herb, TransferMode::Off, _) => Ok(Propagation::shared(a_dprime)),
        (ModelKind::Herb, _, Some(ctx)) => Propagation::head_tail(a_dprime, ctx),
        (ModelKind::Herb, _, None) => Err(HerbError::Config("transfer is enabled but no transfer context was built".into())),
    }
}

/// Convenience for a plain GCN or MLP on the raw graph.
pub fn train_baseline(g: &Graph, masks: &SplitMasks, kind: ModelKind, cfg: &TrainConfig, seed: u64) -> Result<(TrainOutcome, TrainInputs)> {
    let cfg = TrainConfig {
        augment: AugmentMode::Off,
        transfer: TransferMode::Off,
        ..*cfg
    };
    let kind = if kind == ModelKind::Herb { ModelKind::Gcn } else { kind };
    let inputs = TrainInputs::new(g, propagation_for(kind, &cfg, g.adjacency(), None)?);
    let model = HerbParams::init(g.feature_dim(), cfg.hidden, g.class_count(), false, seed);
    Ok((train_model(model, &inputs, masks, &cfg, seed)?, inputs))
}

/// All-head partition, for running the transfer path without tail nodes.
pub fn all_head(n: usize) -> HeadTailPartition {
    HeadTailPartition::all_head(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::uniform;
    use crate::tensor::check_gradients;
    use crate::transfer::TransferConfig;

    fn six_nodes() -> Graph {
        let edges = [(0, 1), (0, 2), (0, 3), (0, 4), (4, 5), (1, 2)];
        let mut rng = seeded(3, Stream::Custom(7));
        let x = uniform(6, 4, -1.0, 1.0, &mut rng);
        Graph::from_edges(6, &edges, x, vec![0, 0, 1, 1, 0, 1], 2).unwrap()
    }

    fn herb_setup(g: &Graph, partition: HeadTailPartition) -> (HerbParams, TrainInputs) {
        let a = g.adjacency();
        let s_sf = crate::similarity::pairwise_similarity(g.features());
        let cfg = TransferConfig {
            k: Some(2),
            ..TransferConfig::default()
        };
        let ctx = TransferContext::build(a, a, &s_sf, &partition, &cfg, TransferMode::Homophilic).unwrap();
        let prop = Propagation::head_tail(a, &ctx).unwrap();
        let mut model = HerbParams::init(g.feature_dim(), 3, 2, true, 5);
        for l in &model.localizer.clone().unwrap().layers {
            let d = model.params.value(l.r_global).cols();
            model.params.get_mut(l.r_global).value = Matrix::from_fn(1, d, |_, j| 0.1 * (j as f64 + 1.0));
        }
        (model, TrainInputs::new(g, prop))
    }

    #[test]
    fn head_loss_hand_values() {
        let tape = Tape::new();
        assert_eq!(loss_head(&tape, &[]).unwrap().item(), 0.0);
        let d = tape.constant(Matrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap());
        assert_eq!(loss_head(&tape, &[d]).unwrap().item(), 25.0);
    }

    #[test]
    fn head_loss_matches_scalar_loops() {
        let mut rng = seeded(8, Stream::Custom(8));
        let a = uniform(3, 2, -1.0, 1.0, &mut rng);
        let b = uniform(3, 4, -1.0, 1.0, &mut rng);
        let mut want = 0.0;
        for m in [&a, &b] {
            for v in m.data() {
                want += v * v;
            }
        }
        let tape = Tape::new();
        let got = loss_head(&tape, &[tape.constant(a), tape.constant(b)]).unwrap().item();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn total_loss_is_sum_of_terms() {
        let g = six_nodes();
        let (model, inputs) = herb_setup(&g, HeadTailPartition::from_degrees(g.degrees()));
        let cfg = TrainConfig::default();
        let train = Rc::new(vec![0, 2, 5]);
        let tape = Tape::new();
        let p = tape.bind(&model.params);
        let mut rng = seeded(0, Stream::Dropout);
        let out = forward(&tape, &p, &model, &inputs.propagation, &inputs.features, 0.0, false, &mut rng).unwrap();
        let head = loss_head(&tape, &out.discrepancies).unwrap();
        let total = loss_total(&tape, &p, &out.logits, &inputs.labels, &train, Some(&head), &cfg).unwrap();

        let logits = out.logits.value();
        let ce: f64 = train
            .iter()
            .map(|&i| {
                let row = logits.row(i);
                let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
                lse - row[inputs.labels[i]]
            })
            .sum::<f64>()
            / 3.0;
        let reg: f64 = model.params.iter().map(|(_, _, t)| t.value.sum_squares()).sum();
        let want = ce + cfg.lambda * reg + cfg.mu * head.item();
        assert!((total.item() - want).abs() < 1e-10);

        let no_mu = TrainConfig { mu: 0.0, lambda: 0.0, ..cfg };
        let t2 = loss_total(&tape, &p, &out.logits, &inputs.labels, &train, Some(&head), &no_mu).unwrap();
        assert!((t2.item() - ce).abs() < 1e-12);
    }

    #[test]
    fn every_parameter_group_passes_gradcheck() {
        let g = six_nodes();
        let partition = HeadTailPartition::from_degrees(g.degrees());
        assert!(!partition.head.is_empty() && !partition.tail.is_empty());
        let (model, inputs) = herb_setup(&g, partition);
        let cfg = TrainConfig::default();
        let train = Rc::new(vec![0, 1, 2, 3, 4, 5]);
        let report = check_gradients(&model.params, 1e-5, |tape, ps| {
            let p = tape.bind(ps);
            let mut rng = seeded(0, Stream::Dropout);
            let out = forward(tape, &p, &model, &inputs.propagation, &inputs.features, 0.0, false, &mut rng)?;
            let head = loss_head(tape, &out.discrepancies)?;
            loss_total(tape, &p, &out.logits, &inputs.labels, &train, Some(&head), &cfg)
        })
        .unwrap();
        assert_eq!(report.groups.len(), 14);
        assert!(report.passes(1e-4), "{report:#?}");
    }

    #[test]
    fn all_head_partition_skips_tail_path() {
        let g = six_nodes();
        let (model, inputs) = herb_setup(&g, all_head(6));
        let Propagation::HeadTail(ops) = &inputs.propagation else { panic!() };
        assert_eq!(ops.tail_prop.count_nonzeros(), 0);
        let logits = predict_logits(&model, &inputs).unwrap();
        assert!(logits.all_finite());
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let g = six_nodes();
        let (model, inputs) = herb_setup(&g, HeadTailPartition::from_degrees(g.degrees()));
        let masks = SplitMasks::new(vec![0, 2, 4, 5], vec![1, 3], vec![], 6).unwrap();
        let cfg = TrainConfig {
            epochs: 60,
            dropout: 0.0,
            ..TrainConfig::default()
        };
        let a = train_model(model.clone(), &inputs, &masks, &cfg, 1).unwrap();
        let b = train_model(model, &inputs, &masks, &cfg, 1).unwrap();
        assert_eq!(a.history, b.history);
        assert!(a.history.last().unwrap().train_loss < a.history[0].train_loss);
    }

    #[test]
    fn early_stopping_respects_window() {
        let g = six_nodes();
        let masks = SplitMasks::new(vec![0, 2], vec![1, 3], vec![], 6).unwrap();
        let cfg = TrainConfig {
            epochs: 500,
            early_stop_window: 5,
            ..TrainConfig::default()
        };
        let (out, _) = train_baseline(&g, &masks, ModelKind::Gcn, &cfg, 2).unwrap();
        assert!(out.history.len() < 500);
        assert_eq!(out.history.len(), out.best_epoch + 6);
    }

    #[test]
    fn parses_names() {
        assert_eq!("gcn".parse::<ModelKind>().unwrap(), ModelKind::Gcn);
        assert!("gat".parse::<ModelKind>().is_err());
        assert_eq!("A_he".parse::<Ablation>().unwrap(), Ablation::AHe);
        assert_eq!("full".parse::<Ablation>().unwrap(), Ablation::Full);
        assert_eq!(Ablation::GRID.len(), 5);
    }
}
