//! Expanded tail neighbourhoods and the localised translation between a
//! node and its neighbourhood.

use serde::{Deserialize, Serialize};

use crate::error::{HerbError, Result};
use crate::graph::HeadTailPartition;
use crate::rng::{glorot_uniform, HerbRng};
use crate::tensor::{BoundParams, Matrix, ParamId, ParamSet, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    Off,
    /// Translation on the intermediary adjacency only (`Ã = A″`).
    Plain,
    Homophilic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Heads kept per tail node; `None` picks 5 below 300 nodes, else 20.
    pub k: Option<usize>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            alpha: 0.5,
            beta: 0.5,
            k: None,
        }
    }
}

impl TransferConfig {
    pub fn k_for(&self, n: usize) -> usize {
        self.k.unwrap_or(if n < 300 { 5 } else { 20 })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(HerbError::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.k == Some(0) {
            return Err(HerbError::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TransferContext {
    pub a_2hop: Matrix,
    pub a_expand: Matrix,
    pub a_sim: Matrix,
    pub a_tilde: Matrix,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub partition: HeadTailPartition,
}

impl TransferContext {
    pub fn build(
        a_prime: &Matrix,
        a_dprime: &Matrix,
        s_sf: &Matrix,
        partition: &HeadTailPartition,
        cfg: &TransferConfig,
        mode: TransferMode,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = a_dprime.rows();
        let k = cfg.k_for(n);
        let (a_2hop, a_expand) = expand_two_hop(a_prime, a_dprime, cfg.alpha)?;
        let (a_sim, a_tilde) = match mode {
            TransferMode::Homophilic => {
                let a_sim = select_homophilic_heads(s_sf, &a_expand, partition, k)?;
                let a_tilde = build_a_tilde(a_dprime, &a_sim, cfg.beta)?;
                (a_sim, a_tilde)
            }
            TransferMode::Plain | TransferMode::Off => (Matrix::zeros(n, n), a_dprime.clone()),
        };
        Ok(TransferContext {
            a_2hop,
            a_expand,
            a_sim,
            a_tilde: a_tilde.with_nonzero_index(),
            alpha: cfg.alpha,
            beta: cfg.beta,
            k,
            partition: partition.clone(),
        })
    }
}

fn check_square(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() || a.rows() != a.cols() {
        return Err(HerbError::Shape {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(HerbError::precondition(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// `A_2hop = A′ · A″` with its diagonal zeroed, and
/// `A_expand = α A″ + (1 − α) A_2hop`.
pub fn expand_two_hop(a_prime: &Matrix, a_dprime: &Matrix, alpha: f64) -> Result<(Matrix, Matrix)> {
    check_square("expand_two_hop", a_prime, a_dprime)?;
    check_unit("alpha", alpha)?;
    let mut a_2hop = a_prime.matmul(a_dprime)?;
    for i in 0..a_2hop.rows() {
        a_2hop.set(i, i, 0.0);
    }
    let a_expand = a_dprime.zip_map(&a_2hop, |d, t| alpha * d + (1.0 - alpha) * t)?;
    Ok((a_2hop, a_expand))
}

/// For every tail row, keeps the `k` head columns inside the support of
/// `A_expand` that are most similar under `S_sf` (lower id first on ties),
/// copying their `A_expand` weights. Head rows are zero.
pub fn select_homophilic_heads(s_sf: &Matrix, a_expand: &Matrix, partition: &HeadTailPartition, k: usize) -> Result<Matrix> {
    check_square("select_homophilic_heads", s_sf, a_expand)?;
    if k == 0 {
        return Err(HerbError::precondition("k must be at least 1"));
    }
    let n = a_expand.rows();
    if partition.n() != n {
        return Err(HerbError::precondition(format!(
            "partition covers {} nodes, adjacency has {n}",
            partition.n()
        )));
    }
    let mut a_sim = Matrix::zeros(n, n);
    for &i in &partition.tail {
        let s = s_sf.row(i);
        let mut cands: Vec<usize> = partition
            .head
            .iter()
            .copied()
            .filter(|&j| j != i && a_expand.get(i, j) > 0.0)
            .collect();
        cands.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        for &j in cands.iter().take(k) {
            a_sim.set(i, j, a_expand.get(i, j));
        }
    }
    Ok(a_sim)
}

/// `Ã = β A″ + (1 − β) A_sim`.
pub fn build_a_tilde(a_dprime: &Matrix, a_sim: &Matrix, beta: f64) -> Result<Matrix> {
    check_square("build_a_tilde", a_dprime, a_sim)?;
    check_unit("beta", beta)?;
    a_dprime.zip_map(a_sim, |d, s| beta * d + (1.0 - beta) * s)
}

/// Weighted mean `Σ w_j z_j / Σ w_j`; zero when every weight is zero.
pub fn neighborhood_embedding(z: &Matrix, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != z.rows() {
        return Err(HerbError::Shape {
            op: "neighborhood_embedding",
            left: z.shape(),
            right: (weights.len(), 1),
        });
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(HerbError::precondition("pooling weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; z.cols()];
    if total == 0.0 {
        return Ok(out);
    }
    for (j, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            for (o, v) in out.iter_mut().zip(z.row(j)) {
                *o += w * v;
            }
        }
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(out)
}

/// Row-normalised copy of `adj`: `pool · Z` gives every row's weighted-mean
/// neighbourhood embedding at once.
pub fn mean_pooling(adj: &Matrix) -> Matrix {
    crate::encoders::row_normalized_adjacency(adj, false)
}

/// Scale/shift parameters of one layer's translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalizerLayer {
    pub w_gamma1: ParamId,
    pub w_gamma2: ParamId,
    pub w_eps1: ParamId,
    pub w_eps2: ParamId,
    pub r_global: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalizerParams {
    pub layers: Vec<LocalizerLayer>,
}

impl LocalizerParams {
    /// One layer per width: Glorot weights, zero global translation.
    pub fn init(params: &mut ParamSet, widths: &[usize], rng: &mut HerbRng) -> Self {
        let layers = widths
            .iter()
            .enumerate()
            .map(|(l, &d)| LocalizerLayer {
                w_gamma1: params.add(format!("loc{l}.w_gamma1"), glorot_uniform(d, d, rng)),
                w_gamma2: params.add(format!("loc{l}.w_gamma2"), glorot_uniform(d, d, rng)),
                w_eps1: params.add(format!("loc{l}.w_eps1"), glorot_uniform(d, d, rng)),
                w_eps2: params.add(format!("loc{l}.w_eps2"), glorot_uniform(d, d, rng)),
                r_global: params.add(format!("loc{l}.r_global"), Matrix::zeros(1, d)),
            })
            .collect();
        LocalizerParams { layers }
    }
}

/// `r = tanh(Z Wγ1 + Zn Wγ2) ⊙ r_global + tanh(Z Wε1 + Zn Wε2)`, row-wise
/// for every node.
pub fn localize<'t>(params: &BoundParams<'t>, layer: &LocalizerLayer, z: &Var<'t>, z_n: &Var<'t>) -> Result<Var<'t>> {
    let p = |id| params.get(id);
    let gamma = z.matmul(&p(layer.w_gamma1))?.add(&z_n.matmul(&p(layer.w_gamma2))?)?.tanh();
    let eps = z.matmul(&p(layer.w_eps1))?.add(&z_n.matmul(&p(layer.w_eps2))?)?.tanh();
    gamma.mul_row(&p(layer.r_global))?.add(&eps)
}

/// [`localize`] with `Zn = pool · Z`, evaluated as `pool · (Z W)` so a
/// sparse `Z` never meets the square weights through a dense product.
pub fn localize_pooled<'t>(params: &BoundParams<'t>, layer: &LocalizerLayer, z: &Var<'t>, pool: &Var<'t>) -> Result<Var<'t>> {
    let p = |id| params.get(id);
    let branch = |w1, w2| -> Result<Var<'t>> {
        Ok(z.matmul(&p(w1))?.add(&pool.matmul(&z.matmul(&p(w2))?)?)?.tanh())
    };
    let gamma = branch(layer.w_gamma1, layer.w_gamma2)?;
    let eps = branch(layer.w_eps1, layer.w_eps2)?;
    gamma.mul_row(&p(layer.r_global))?.add(&eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    use crate::rng::{seeded, uniform, Stream};
    use crate::tensor::{check_gradients, Tape};

    fn path3() -> Matrix {
        Matrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]).unwrap()
    }

    #[test]
    fn two_hop_on_path() {
        let a = path3();
        let (two, _) = expand_two_hop(&a, &a, 0.5).unwrap();
        assert!(two.get(0, 2) > 0.0);
        assert_eq!(two.get(0, 1), 0.0);
        assert_eq!(two.get(0, 0), 0.0);
    }

    #[test]
    fn alpha_endpoints() {
        let a = path3();
        let (two, e1) = expand_two_hop(&a, &a, 1.0).unwrap();
        assert_eq!(e1, a);
        let (_, e0) = expand_two_hop(&a, &a, 0.0).unwrap();
        assert_eq!(e0, two);
    }

    fn partition(head: &[usize], n: usize) -> HeadTailPartition {
        let head: BTreeSet<usize> = head.iter().copied().collect();
        HeadTailPartition {
            tail: (0..n).filter(|v| !head.contains(v)).collect(),
            head,
            threshold: 0.0,
        }
    }

    #[test]
    fn fewer_candidates_than_k() {
        let a = path3();
        let p = partition(&[1], 3);
        let s = Matrix::filled(3, 3, 1.0);
        let sim = select_homophilic_heads(&s, &a, &p, 5).unwrap();
        assert_eq!(sim.get(0, 1), 1.0);
        assert_eq!(sim.get(2, 1), 1.0);
        assert_eq!(sim.count_nonzeros(), 2);
        assert!(sim.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isolated_tail_gets_zero_row() {
        let a = Matrix::zeros(3, 3);
        let p = partition(&[0], 3);
        let sim = select_homophilic_heads(&Matrix::filled(3, 3, 1.0), &a, &p, 2).unwrap();
        assert_eq!(sim.count_nonzeros(), 0);
    }

    #[test]
    fn ranks_by_similarity_with_id_ties() {
        let mut e = Matrix::zeros(6, 6);
        for j in 1..6 {
            e.set(0, j, j as f64 * 0.1);
        }
        let mut s = Matrix::zeros(6, 6);
        for (j, v) in [(1, 0.2), (2, 0.9), (3, 0.9), (4, 0.5), (5, 0.95)] {
            s.set(0, j, v);
        }
        let p = partition(&[1, 2, 3, 4], 6);
        let sim = select_homophilic_heads(&s, &e, &p, 2).unwrap();
        // node 5 is a tail, so the best heads are 2 and 3 (tie, both kept)
        assert_eq!(sim.get(0, 2), 0.2);
        assert!((sim.get(0, 3) - 0.3).abs() < 1e-15);
        assert_eq!(sim.count_nonzeros(), 2);
        let sim1 = select_homophilic_heads(&s, &e, &p, 1).unwrap();
        assert_eq!(sim1.get(0, 2), 0.2);
        assert_eq!(sim1.count_nonzeros(), 1);
    }

    #[test]
    fn a_tilde_blend() {
        let d = path3();
        let s = Matrix::from_rows(&[vec![0.0, 0.0, 0.4], vec![0.0; 3], vec![0.7, 0.0, 0.0]]).unwrap();
        assert_eq!(build_a_tilde(&d, &s, 1.0).unwrap(), d);
        assert_eq!(build_a_tilde(&d, &s, 0.0).unwrap(), s);
        let t = build_a_tilde(&d, &s, 0.3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((t.get(i, j) - (0.3 * d.get(i, j) + 0.7 * s.get(i, j))).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pooling_by_hand() {
        let z = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(neighborhood_embedding(&z, &[0.0, 1.0, 0.0]).unwrap(), vec![3.0, 6.0]);
        assert_eq!(neighborhood_embedding(&z, &[1.0, 1.0, 0.0]).unwrap(), vec![2.0, 4.0]);
        let w = neighborhood_embedding(&z, &[1.0, 0.0, 0.5]).unwrap();
        assert!((w[0] - 0.5 / 1.5).abs() < 1e-15);
        assert!((w[1] - 2.0 / 1.5).abs() < 1e-15);
        assert_eq!(neighborhood_embedding(&z, &[0.0; 3]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pooling_matrix_agrees_with_rowwise_pooling() {
        let mut rng = seeded(2, Stream::Custom(3));
        let z = uniform(4, 3, -1.0, 1.0, &mut rng);
        let a = Matrix::from_rows(&[
            vec![0.0, 1.0, 0.5, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.0, 0.0],
            vec![0.0; 4],
        ])
        .unwrap();
        let pooled = mean_pooling(&a).matmul(&z).unwrap();
        for i in 0..4 {
            let row = neighborhood_embedding(&z, a.row(i)).unwrap();
            for (x, y) in row.iter().zip(pooled.row(i)) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    fn localizer(d: usize) -> (ParamSet, LocalizerParams) {
        let mut params = ParamSet::new();
        let mut rng = seeded(1, Stream::Init);
        let loc = LocalizerParams::init(&mut params, &[d], &mut rng);
        (params, loc)
    }

    #[test]
    fn zero_weights_give_zero_translation() {
        let (mut params, loc) = localizer(3);
        for id in params.ids().collect::<Vec<_>>() {
            params.get_mut(id).value = Matrix::zeros(params.value(id).rows(), 3);
        }
        let tape = Tape::new();
        let z = tape.constant(Matrix::filled(2, 3, 0.7));
        let r = localize(&tape.bind(&params), &loc.layers[0], &z, &z).unwrap();
        assert!(r.value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_gamma_returns_global_translation() {
        let (mut params, loc) = localizer(2);
        let l = loc.layers[0];
        params.get_mut(l.w_gamma1).value = Matrix::filled(2, 2, 1e3);
        params.get_mut(l.w_gamma2).value = Matrix::zeros(2, 2);
        params.get_mut(l.w_eps1).value = Matrix::zeros(2, 2);
        params.get_mut(l.w_eps2).value = Matrix::zeros(2, 2);
        params.get_mut(l.r_global).value = Matrix::row_vector(vec![0.25, -1.5]);
        let tape = Tape::new();
        let z = tape.constant(Matrix::filled(3, 2, 1.0));
        let r = localize(&tape.bind(&params), &l, &z, &z).unwrap().value();
        for i in 0..3 {
            assert_eq!(r.row(i), &[0.25, -1.5]);
        }
    }

    #[test]
    fn localizer_gradients_match_finite_differences() {
        let (mut params, loc) = localizer(3);
        let l = loc.layers[0];
        params.get_mut(l.r_global).value = Matrix::row_vector(vec![0.3, -0.2, 0.5]);
        let mut rng = seeded(4, Stream::Custom(4));
        let z = uniform(4, 3, -1.0, 1.0, &mut rng);
        let zn = uniform(4, 3, -1.0, 1.0, &mut rng);
        let target = uniform(4, 3, -1.0, 1.0, &mut rng);
        let report = check_gradients(&params, 1e-5, |tape, ps| {
            let r = localize(&tape.bind(ps), &l, &tape.constant(z.clone()), &tape.constant(zn.clone()))?;
            Ok(r.sub(&tape.constant(target.clone()))?.sum_squares())
        })
        .unwrap();
        assert!(report.passes(1e-4), "{report:?}");
        assert_eq!(report.groups.len(), 5);
    }

    #[test]
    fn pooled_form_matches_explicit_neighbourhood() {
        let (mut params, loc) = localizer(3);
        let l = loc.layers[0];
        params.get_mut(l.r_global).value = Matrix::row_vector(vec![0.3, -0.2, 0.5]);
        let mut rng = seeded(5, Stream::Custom(5));
        let z = uniform(4, 3, -1.0, 1.0, &mut rng);
        let pool = mean_pooling(&uniform(4, 4, 0.0, 1.0, &mut rng));
        let tape = Tape::new();
        let bound = tape.bind(&params);
        let zv = tape.constant(z.clone());
        let pv = tape.constant(pool.clone());
        let a = localize(&bound, &l, &zv, &tape.constant(pool.matmul(&z).unwrap())).unwrap();
        let b = localize_pooled(&bound, &l, &zv, &pv).unwrap();
        assert!(a.value().max_abs_diff(&b.value()).unwrap() < 1e-14);
    }

    #[test]
    fn context_plain_uses_intermediary_adjacency() {
        let a = path3();
        let p = partition(&[1], 3);
        let ctx = TransferContext::build(&a, &a, &Matrix::filled(3, 3, 1.0), &p, &TransferConfig::default(), TransferMode::Plain)
            .unwrap();
        assert_eq!(ctx.a_tilde, a);
        assert_eq!(ctx.k, 5);
        let ctx = TransferContext::build(
            &a,
            &a,
            &Matrix::filled(3, 3, 1.0),
            &p,
            &TransferConfig::default(),
            TransferMode::Homophilic,
        )
        .unwrap();
        assert_eq!(ctx.a_tilde.get(0, 1), 0.5 + 0.5 * 0.5);
    }
}
