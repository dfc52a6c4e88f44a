//! Heterophily-lessening edge edits and the intermediary adjacency `A″`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{HerbError, Result};
use crate::graph::{Graph, SplitMasks};
use crate::similarity::SimilarityBundle;
use crate::tensor::Matrix;

/// Undirected edges stored as `(min, max)`.
pub type EdgeSet = BTreeSet<(usize, usize)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    Off,
    /// Structure-similarity edits only; feature thresholds are ignored.
    Plain,
    HeterophilyLessening,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Per-node candidate budget for additions, as a fraction of `n`.
    pub add_pct: f64,
    /// Per-node candidate budget for removals, as a fraction of `n`.
    pub remove_pct: f64,
    /// Minimum feature similarity for an added edge.
    pub t_hete: f64,
    /// Maximum feature similarity for a removed edge.
    pub t_homo: f64,
    pub restrict_to_train: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            add_pct: 0.01,
            remove_pct: 0.05,
            t_hete: 0.3,
            t_homo: 0.7,
            restrict_to_train: true,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("add_pct", self.add_pct), ("remove_pct", self.remove_pct)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(HerbError::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.t_hete.is_nan() || self.t_homo.is_nan() {
            return Err(HerbError::Config("thresholds must not be NaN".into()));
        }
        Ok(())
    }

    /// Same budgets with the feature filters disabled.
    pub fn without_feature_filter(&self) -> Self {
        AugmentConfig {
            t_hete: f64::NEG_INFINITY,
            t_homo: f64::INFINITY,
            ..*self
        }
    }

    fn budget(pct: f64, n: usize) -> usize {
        (pct * n as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationOutcome {
    pub added: EdgeSet,
    pub removed: EdgeSet,
    /// `A + added - removed`, entries in {0, 1}.
    pub a_prime: Matrix,
    /// `(A + A′) / 2`.
    pub a_dprime: Matrix,
}

fn pair(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

fn anchors(g: &Graph, cfg: &AugmentConfig, masks: &SplitMasks) -> Vec<usize> {
    if cfg.restrict_to_train {
        masks.train.clone()
    } else {
        (0..g.n()).collect()
    }
}

fn check_bundle(g: &Graph, bundle: &SimilarityBundle) -> Result<()> {
    let n = g.n();
    for (name, s) in [("s_str", &bundle.s_str), ("s_fea", &bundle.s_fea)] {
        if s.shape() != (n, n) {
            return Err(HerbError::Shape {
                op: if name == "s_str" { "augment s_str" } else { "augment s_fea" },
                left: s.shape(),
                right: (n, n),
            });
        }
    }
    Ok(())
}

/// For each anchor node `i`, the `⌈add_pct·n⌉` non-neighbours `j ≠ i` with
/// the largest `S_str[i][j]` (lower id first on ties), kept when
/// `S_fea[i][j] ≥ t_hete`.
pub fn select_additions(g: &Graph, bundle: &SimilarityBundle, cfg: &AugmentConfig, masks: &SplitMasks) -> Result<EdgeSet> {
    check_bundle(g, bundle)?;
    let k = AugmentConfig::budget(cfg.add_pct, g.n());
    let mut out = EdgeSet::new();
    if k == 0 {
        return Ok(out);
    }
    for i in anchors(g, cfg, masks) {
        let s = bundle.s_str.row(i);
        let mut pool: Vec<usize> = (0..g.n()).filter(|&j| j != i && !g.has_edge(i, j)).collect();
        pool.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        for &j in pool.iter().take(k) {
            if bundle.s_fea.get(i, j) >= cfg.t_hete {
                out.insert(pair(i, j));
            }
        }
    }
    Ok(out)
}

/// For each anchor node `i`, the `⌈remove_pct·n⌉` neighbours with the
/// smallest `S_str[i][j]` (lower id first on ties), kept when
/// `S_fea[i][j] ≤ t_homo`.
pub fn select_removals(g: &Graph, bundle: &SimilarityBundle, cfg: &AugmentConfig, masks: &SplitMasks) -> Result<EdgeSet> {
    check_bundle(g, bundle)?;
    let k = AugmentConfig::budget(cfg.remove_pct, g.n());
    let mut out = EdgeSet::new();
    if k == 0 {
        return Ok(out);
    }
    for i in anchors(g, cfg, masks) {
        let s = bundle.s_str.row(i);
        let mut pool: Vec<usize> = g.neighbors(i).collect();
        pool.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
        for &j in pool.iter().take(k) {
            if bundle.s_fea.get(i, j) <= cfg.t_homo {
                out.insert(pair(i, j));
            }
        }
    }
    Ok(out)
}

/// Applies the edits symmetrically and forms `A″ = (A + A′) / 2`.
pub fn apply(g: &Graph, added: EdgeSet, removed: EdgeSet) -> Result<AugmentationOutcome> {
    if let Some(e) = added.intersection(&removed).next() {
        return Err(HerbError::Internal(format!("edge {e:?} both added and removed")));
    }
    let mut a_prime = g.adjacency().clone();
    for &(u, v) in &added {
        if g.has_edge(u, v) || u == v {
            return Err(HerbError::precondition(format!("added pair ({u}, {v}) is already an edge or a loop")));
        }
        a_prime.set(u, v, 1.0);
        a_prime.set(v, u, 1.0);
    }
    for &(u, v) in &removed {
        if !g.has_edge(u, v) {
            return Err(HerbError::precondition(format!("removed pair ({u}, {v}) is not an edge")));
        }
        a_prime.set(u, v, 0.0);
        a_prime.set(v, u, 0.0);
    }
    let a_dprime = g.adjacency().add(&a_prime)?.scale(0.5);
    Ok(AugmentationOutcome {
        added,
        removed,
        a_prime: a_prime.with_nonzero_index(),
        a_dprime: a_dprime.with_nonzero_index(),
    })
}

/// The edits of `mode` applied to `g`. `Off` returns `A′ = A″ = A`.
pub fn augment(
    g: &Graph,
    bundle: &SimilarityBundle,
    cfg: &AugmentConfig,
    masks: &SplitMasks,
    mode: AugmentMode,
) -> Result<AugmentationOutcome> {
    cfg.validate()?;
    let cfg = match mode {
        AugmentMode::Off => return apply(g, EdgeSet::new(), EdgeSet::new()),
        AugmentMode::Plain => cfg.without_feature_filter(),
        AugmentMode::HeterophilyLessening => *cfg,
    };
    let added = select_additions(g, bundle, &cfg, masks)?;
    let removed = select_removals(g, bundle, &cfg, masks)?;
    apply(g, added, removed)
}
