use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{HerbError, Result};
use crate::graph::Graph;
use crate::rng::{permutation, seeded, Stream};

/// Size of the validation or test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitSize {
    /// Fraction of all `n` nodes, rounded to the nearest integer.
    Fraction(f64),
    Count(usize),
}

impl SplitSize {
    fn resolve(self, n: usize) -> usize {
        match self {
            SplitSize::Fraction(f) => (f * n as f64).round() as usize,
            SplitSize::Count(k) => k,
        }
    }
}

/// A fixed number of training nodes per class, then validation and test
/// nodes drawn uniformly from the remaining nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitScheme {
    pub per_class: usize,
    pub val: SplitSize,
    pub test: SplitSize,
}

impl SplitScheme {
    pub fn per_class_fractions(per_class: usize, val: f64, test: f64) -> Self {
        SplitScheme {
            per_class,
            val: SplitSize::Fraction(val),
            test: SplitSize::Fraction(test),
        }
    }

    /// Planetoid-style sizes: 20 per class, 500 validation, 1000 test.
    pub fn planetoid() -> Self {
        SplitScheme {
            per_class: 20,
            val: SplitSize::Count(500),
            test: SplitSize::Count(1000),
        }
    }

    /// Default scheme for a named benchmark. Citation graphs use Planetoid
    /// sizes, WebKB graphs 5 per class and everything else 20 per class,
    /// the latter two with 10% validation and 20% test.
    pub fn for_dataset(name: &str) -> Self {
        match name.to_ascii_lowercase().as_str() {
            "cora" | "citeseer" | "pubmed" => SplitScheme::planetoid(),
            "texas" | "cornell" | "wisconsin" => SplitScheme::per_class_fractions(5, 0.1, 0.2),
            _ => SplitScheme::per_class_fractions(20, 0.1, 0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMasks {
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>, n: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(HerbError::precondition("training mask is empty"));
        }
        let mut seen = BTreeSet::new();
        for &v in train.iter().chain(&val).chain(&test) {
            if v >= n {
                return Err(HerbError::precondition(format!("mask node {v} outside 0..{n}")));
            }
            if !seen.insert(v) {
                return Err(HerbError::precondition(format!("node {v} appears in two masks")));
            }
        }
        Ok(SplitMasks { train, val, test })
    }
}

/// Samples `scheme.per_class` training nodes from every class, then the
/// validation and test sets from what is left. Deterministic in `seed`.
pub fn make_splits(g: &Graph, scheme: &SplitScheme, seed: u64) -> Result<SplitMasks> {
    let n = g.n();
    let sizes = g.class_sizes();
    if let Some((c, &have)) = sizes.iter().enumerate().find(|(_, &s)| s < scheme.per_class) {
        return Err(HerbError::Config(format!(
            "class {c} has {have} nodes but the split asks for {} training nodes per class",
            scheme.per_class
        )));
    }
    let mut rng = seeded(seed, Stream::Split);
    let order = permutation(n, &mut rng);

    let mut taken = vec![0usize; g.class_count()];
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for &v in &order {
        let y = g.labels()[v];
        if taken[y] < scheme.per_class {
            taken[y] += 1;
            train.push(v);
        } else {
            rest.push(v);
        }
    }

    let n_val = scheme.val.resolve(n);
    let n_test = scheme.test.resolve(n);
    if n_val + n_test > rest.len() {
        return Err(HerbError::Config(format!(
            "{n_val} validation + {n_test} test nodes requested but only {} remain after training",
            rest.len()
        )));
    }
    let val = rest[..n_val].to_vec();
    let test = rest[n_val..n_val + n_test].to_vec();
    train.sort_unstable();
    let mut val = val;
    let mut test = test;
    val.sort_unstable();
    test.sort_unstable();
    SplitMasks::new(train, val, test, n)
}
