//! Graph representation, dataset files, head/tail partition and homophily.

mod io;
mod split;
pub mod synthetic;

use std::collections::BTreeSet;

pub use io::{dataset_dir, load_dataset, load_graph, write_dataset};
pub use split::{make_splits, SplitMasks, SplitScheme, SplitSize};

use crate::error::{HerbError, Result};
use crate::tensor::Matrix;

/// Undirected graph with dense adjacency, node features and labels.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Matrix,
    features: Matrix,
    labels: Vec<usize>,
    class_count: usize,
    degrees: Vec<f64>,
}

impl Graph {
    pub fn new(adjacency: Matrix, features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(HerbError::Shape {
                op: "Graph::new adjacency",
                left: adjacency.shape(),
                right: (n, n),
            });
        }
        if features.rows() != n || labels.len() != n {
            return Err(HerbError::Shape {
                op: "Graph::new features/labels",
                left: features.shape(),
                right: (labels.len(), n),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(HerbError::precondition(format!(
                "label {bad} outside {class_count} classes"
            )));
        }
        if !adjacency.is_symmetric(0.0) {
            return Err(HerbError::precondition("adjacency must be symmetric"));
        }
        if adjacency.data().iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(HerbError::precondition("adjacency entries must be finite and nonnegative"));
        }
        let degrees = adjacency.row_sums();
        Ok(Graph {
            adjacency: adjacency.with_nonzero_index(),
            features: features.with_nonzero_index(),
            labels,
            class_count,
            degrees,
        })
    }

    /// Builds the binary adjacency from an undirected edge list. Mirrors each
    /// edge, collapses duplicates and drops self-loops.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize)],
        features: Matrix,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let mut adj = Matrix::zeros(n, n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(HerbError::precondition(format!(
                    "edge ({u}, {v}) has an endpoint outside 0..{n}"
                )));
            }
            if u != v {
                adj.set(u, v, 1.0);
                adj.set(v, u, 1.0);
            }
        }
        Graph::new(adj, features, labels, class_count)
    }

    /// Same nodes, features and labels over a different adjacency.
    pub fn with_adjacency(&self, adjacency: Matrix) -> Result<Self> {
        Graph::new(adjacency, self.features.clone(), self.labels.clone(), self.class_count)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.get(u, v) != 0.0
    }

    /// Undirected edges `(i, j)` with `i < j` and a nonzero entry.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        edges_of(&self.adjacency)
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .row(u)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(j, _)| j)
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

pub fn edges_of(adj: &Matrix) -> Vec<(usize, usize)> {
    let n = adj.rows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if adj.get(i, j) != 0.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Head/tail split of the node set at the 80th-percentile degree.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadTailPartition {
    pub head: BTreeSet<usize>,
    pub tail: BTreeSet<usize>,
    pub threshold: f64,
}

impl HeadTailPartition {
    /// Threshold is the ascending-sorted degree at 0-based index `ceil(0.8 n) - 1`;
    /// nodes strictly above it are heads, the rest (ties included) are tails.
    pub fn from_degrees(degrees: &[f64]) -> Self {
        let n = degrees.len();
        if n == 0 {
            return HeadTailPartition {
                head: BTreeSet::new(),
                tail: BTreeSet::new(),
                threshold: 0.0,
            };
        }
        let mut sorted = degrees.to_vec();
        sorted.sort_by(f64::total_cmp);
        let idx = ((0.8 * n as f64).ceil() as usize).clamp(1, n) - 1;
        let threshold = sorted[idx];
        let (head, tail): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| degrees[i] > threshold);
        HeadTailPartition {
            head: head.into_iter().collect(),
            tail: tail.into_iter().collect(),
            threshold,
        }
    }

    /// Every node treated as a head.
    pub fn all_head(n: usize) -> Self {
        HeadTailPartition {
            head: (0..n).collect(),
            tail: BTreeSet::new(),
            threshold: f64::NEG_INFINITY,
        }
    }

    pub fn n(&self) -> usize {
        self.head.len() + self.tail.len()
    }

    pub fn is_head(&self, v: usize) -> bool {
        self.head.contains(&v)
    }

    pub fn is_tail(&self, v: usize) -> bool {
        self.tail.contains(&v)
    }

    /// 1.0 for heads, 0.0 for tails, indexed by node.
    pub fn head_indicator(&self) -> Vec<f64> {
        (0..self.n()).map(|v| if self.is_head(v) { 1.0 } else { 0.0 }).collect()
    }

    pub fn tail_indicator(&self) -> Vec<f64> {
        (0..self.n()).map(|v| if self.is_tail(v) { 1.0 } else { 0.0 }).collect()
    }
}

/// Partition computed from the graph's own (raw) degrees.
pub fn partition_head_tail(g: &Graph) -> HeadTailPartition {
    HeadTailPartition::from_degrees(g.degrees())
}

/// Fraction of undirected edges whose endpoints share a label.
pub fn edge_homophily(g: &Graph) -> Result<f64> {
    edge_homophily_of(g.adjacency(), g.labels())
}

pub fn edge_homophily_of(adj: &Matrix, labels: &[usize]) -> Result<f64> {
    let edges = edges_of(adj);
    if edges.is_empty() {
        return Err(HerbError::Undefined("edge homophily of a graph without edges".into()));
    }
    let same = edges.iter().filter(|(u, v)| labels[*u] == labels[*v]).count();
    Ok(same as f64 / edges.len() as f64)
}
