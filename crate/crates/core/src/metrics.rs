//! Micro/Macro-F1, run reports and the edge-entropy diagnostic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HerbError, Result};
use crate::graph::{edges_of, Graph, HeadTailPartition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_: f64,
    pub per_class: Vec<f64>,
}

/// Single-label multiclass F1. Per-class F1 is `2TP / (2TP + FP + FN)` and
/// 0 for a class absent from both vectors; macro is their unweighted mean.
pub fn f1_scores(pred: &[usize], truth: &[usize], class_count: usize) -> Result<F1Scores> {
    if pred.len() != truth.len() {
        return Err(HerbError::Shape {
            op: "f1_scores",
            left: (pred.len(), 1),
            right: (truth.len(), 1),
        });
    }
    if pred.is_empty() {
        return Err(HerbError::precondition("f1 of an empty prediction vector"));
    }
    if class_count == 0 {
        return Err(HerbError::precondition("class_count must be positive"));
    }
    let mut tp = vec![0usize; class_count];
    let mut fp = vec![0usize; class_count];
    let mut fn_ = vec![0usize; class_count];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= class_count || t >= class_count {
            return Err(HerbError::precondition(format!("class id outside 0..{class_count}")));
        }
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let per_class: Vec<f64> = (0..class_count)
        .map(|c| {
            let d = 2 * tp[c] + fp[c] + fn_[c];
            if d == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / d as f64
            }
        })
        .collect();
    let (stp, sfp, sfn): (usize, usize, usize) = (tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let micro = 2.0 * stp as f64 / (2 * stp + sfp + sfn) as f64;
    let macro_ = per_class.iter().sum::<f64>() / class_count as f64;
    Ok(F1Scores { micro, macro_, per_class })
}

/// Metrics of one trained model on one node subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub model: String,
    pub seed: u64,
    pub split: String,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub head_micro_f1: Option<f64>,
    pub tail_micro_f1: Option<f64>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub model: String,
    pub seed: String,
    pub split: String,
    pub micro: f64,
    #[serde(rename = "macro")]
    pub macro_: f64,
    pub head_micro: Option<f64>,
    pub tail_micro: Option<f64>,
    pub config_hash: String,
}

impl EvalReport {
    /// Scores `pred` (one class per node) on `nodes`, with head/tail
    /// breakdowns when those subsets are nonempty.
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        dataset: &str,
        model: &str,
        seed: u64,
        split: &str,
        pred: &[usize],
        labels: &[usize],
        class_count: usize,
        nodes: &[usize],
        partition: &HeadTailPartition,
        config_hash: &str,
    ) -> Result<Self> {
        let pick = |keep: &dyn Fn(usize) -> bool| -> (Vec<usize>, Vec<usize>) {
            nodes.iter().filter(|&&v| keep(v)).map(|&v| (pred[v], labels[v])).unzip()
        };
        let (p, t) = pick(&|_| true);
        let all = f1_scores(&p, &t, class_count)?;
        let sub = |keep: &dyn Fn(usize) -> bool| -> Result<Option<f64>> {
            let (p, t) = pick(keep);
            if p.is_empty() {
                Ok(None)
            } else {
                Ok(Some(f1_scores(&p, &t, class_count)?.micro))
            }
        };
        Ok(EvalReport {
            dataset: dataset.into(),
            model: model.into(),
            seed,
            split: split.into(),
            micro_f1: all.micro,
            macro_f1: all.macro_,
            per_class_f1: all.per_class,
            head_micro_f1: sub(&|v| partition.is_head(v))?,
            tail_micro_f1: sub(&|v| partition.is_tail(v))?,
            config_hash: config_hash.into(),
        })
    }

    pub fn row(&self) -> ReportRow {
        ReportRow {
            dataset: self.dataset.clone(),
            model: self.model.clone(),
            seed: self.seed.to_string(),
            split: self.split.clone(),
            micro: self.micro_f1,
            macro_: self.macro_f1,
            head_micro: self.head_micro_f1,
            tail_micro: self.tail_micro_f1,
            config_hash: self.config_hash.clone(),
        }
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate row with `seed = "mean"`; `micro`/`macro_` are means and the
/// standard deviations are returned alongside.
pub fn aggregate(reports: &[EvalReport]) -> Result<(ReportRow, f64, f64)> {
    let first = reports
        .first()
        .ok_or_else(|| HerbError::precondition("nothing to aggregate"))?;
    let col = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> Option<f64> {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| mean_std(&v).0)
    };
    let (micro, micro_sd) = mean_std(&reports.iter().map(|r| r.micro_f1).collect::<Vec<_>>());
    let (macro_, macro_sd) = mean_std(&reports.iter().map(|r| r.macro_f1).collect::<Vec<_>>());
    Ok((
        ReportRow {
            dataset: first.dataset.clone(),
            model: first.model.clone(),
            seed: "mean".into(),
            split: first.split.clone(),
            micro,
            macro_,
            head_micro: col(&|r| r.head_micro_f1),
            tail_micro: col(&|r| r.tail_micro_f1),
            config_hash: first.config_hash.clone(),
        },
        micro_sd,
        macro_sd,
    ))
}

pub fn write_rows_csv(rows: &[ReportRow], path: &Path) -> Result<()> {
    let io = |e: csv::Error| HerbError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| HerbError::io(path, e))
}

pub fn write_reports_json(reports: &[EvalReport], path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(reports).map_err(|e| HerbError::Internal(e.to_string()))?;
    std::fs::write(path, body).map_err(|e| HerbError::io(path, e))
}

/// `-Σ p log p` (natural log, `0 log 0 = 0`).
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Expected entropy after perturbing a fraction `delta` of the messages:
/// `-δ log δ + (1-δ) Σ -p_i log((1-δ) p_i)`.
pub fn expected_entropy(p: &[f64], delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(HerbError::precondition(format!("delta must lie in [0, 1), got {delta}")));
    }
    let keep = 1.0 - delta;
    let tail: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * (keep * x).ln())
        .sum();
    Ok(-xlogx(delta) + keep * tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub delta: f64,
    pub edges_before: usize,
    pub edges_after: usize,
    /// Entropy of the uniform edge distribution of the original graph.
    pub entropy: f64,
    pub expected_entropy: f64,
    /// Uniform-edge entropy of the perturbed graph, for reference.
    pub entropy_after: f64,
    pub inequality_holds: bool,
}

/// Entropy diagnostic with uniform edge probabilities `1/|E|`.
pub fn entropy_report(before: &Graph, after: &Graph, delta: f64) -> Result<EntropyReport> {
    let uniform = |m: usize| vec![1.0 / m as f64; m];
    let m0 = before.edge_count();
    if m0 == 0 {
        return Err(HerbError::Undefined("entropy of a graph without edges".into()));
    }
    let m1 = edges_of(after.adjacency()).len();
    let p = uniform(m0);
    let h = shannon_entropy(&p);
    let e = expected_entropy(&p, delta)?;
    Ok(EntropyReport {
        delta,
        edges_before: m0,
        edges_after: m1,
        entropy: h,
        expected_entropy: e,
        entropy_after: if m1 == 0 { 0.0 } else { shannon_entropy(&uniform(m1)) },
        inequality_holds: e >= h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    #[test]
    fn perfect_predictions() {
        let s = f1_scores(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!((s.micro, s.macro_), (1.0, 1.0));
    }

    #[test]
    fn hand_confusion_matrix() {
        let s = f1_scores(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(s.micro, 0.75);
        assert!((s.per_class[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.per_class[1] - 0.8).abs() < 1e-15);
        assert!((s.macro_ - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_predictions() {
        let s = f1_scores(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(s.micro, 0.5);
        assert!((s.macro_ - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(f1_scores(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let s = f1_scores(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(s.per_class[2], 0.0);
        assert!((s.macro_ - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mean_std_of_constant_and_pair() {
        assert_eq!(mean_std(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    fn graph_with_edges(m: usize) -> Graph {
        let edges: Vec<_> = (0..m).map(|i| (0, i + 1)).collect();
        Graph::from_edges(m + 1, &edges, Matrix::zeros(m + 1, 1), vec![0; m + 1], 1).unwrap()
    }

    #[test]
    fn entropy_without_perturbation() {
        let g = graph_with_edges(4);
        let r = entropy_report(&g, &g, 0.0).unwrap();
        assert!((r.entropy - 4f64.ln()).abs() < 1e-15);
        assert!((r.expected_entropy - r.entropy).abs() < 1e-12);
        assert!(r.inequality_holds);
    }

    #[test]
    fn entropy_small_delta_four_edges() {
        let g = graph_with_edges(4);
        let r = entropy_report(&g, &g, 0.1).unwrap();
        let direct = -0.1 * 0.1f64.ln() + 0.9 * 4.0 * (-0.25 * (0.9f64 * 0.25).ln());
        assert!((r.expected_entropy - direct).abs() < 1e-12);
        assert!(r.inequality_holds);
    }

    #[test]
    fn expected_entropy_decomposes() {
        // E = h_b(δ) + (1-δ) H for any distribution
        let p = [0.1, 0.2, 0.3, 0.4];
        let h = shannon_entropy(&p);
        for d in [0.05, 0.3, 0.5, 0.9] {
            let hb = -d * f64::ln(d) - (1.0 - d) * f64::ln(1.0 - d);
            assert!((expected_entropy(&p, d).unwrap() - (hb + (1.0 - d) * h)).abs() < 1e-12);
        }
    }

    #[test]
    fn inequality_flag_reports_violations() {
        // δ = 0.5 on 8 uniform edges: ln 2 + 0.5 ln 8 < ln 8
        let g = graph_with_edges(8);
        let r = entropy_report(&g, &g, 0.5).unwrap();
        assert!(r.expected_entropy < r.entropy);
        assert!(!r.inequality_holds);
    }

    #[test]
    fn delta_out_of_range() {
        assert!(expected_entropy(&[1.0], 1.0).is_err());
        assert!(expected_entropy(&[1.0], -0.1).is_err());
    }
}
