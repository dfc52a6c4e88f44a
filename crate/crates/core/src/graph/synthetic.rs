//! Stochastic block model graphs for tests and examples.

use rand::Rng;

use crate::error::{HerbError, Result};
use crate::graph::Graph;
use crate::rng::{seeded, HerbRng, Stream};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Features {
    OneHot,
    Noisy { dim: usize, noise: f64 },
}

/// Builder for a stochastic block model. Nodes are laid out class by class.
#[derive(Debug, Clone)]
pub struct SbmBuilder {
    sizes: Vec<usize>,
    p_in: f64,
    p_out: f64,
    seed: u64,
    features: Features,
}

/// SBM with the given block sizes and intra/inter-block edge probabilities.
pub fn stochastic_block_model(sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> SbmBuilder {
    SbmBuilder {
        sizes: sizes.to_vec(),
        p_in,
        p_out,
        seed,
        features: Features::OneHot,
    }
}

/// SBM whose expected edge homophily is `homophily` and expected mean
/// degree is `mean_degree`, with `classes` equal-sized blocks.
pub fn sbm_with_homophily(n: usize, classes: usize, mean_degree: f64, homophily: f64, seed: u64) -> Result<SbmBuilder> {
    if classes == 0 || n < classes {
        return Err(HerbError::precondition("need at least one node per class"));
    }
    let sizes: Vec<usize> = (0..classes).map(|c| n / classes + usize::from(c < n % classes)).collect();
    let intra_pairs: f64 = sizes.iter().map(|&s| (s * s.saturating_sub(1)) as f64 / 2.0).sum();
    let all_pairs = (n * (n - 1)) as f64 / 2.0;
    let inter_pairs = all_pairs - intra_pairs;
    let edges = n as f64 * mean_degree / 2.0;
    let p_in = if intra_pairs > 0.0 { homophily * edges / intra_pairs } else { 0.0 };
    let p_out = if inter_pairs > 0.0 { (1.0 - homophily) * edges / inter_pairs } else { 0.0 };
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(HerbError::precondition(format!(
            "mean degree {mean_degree} with homophily {homophily} needs edge probabilities {p_in:.3}/{p_out:.3}"
        )));
    }
    Ok(stochastic_block_model(&sizes, p_in, p_out, seed))
}

impl SbmBuilder {
    /// Features are the one-hot label vectors.
    pub fn with_one_hot_features(mut self) -> Self {
        self.features = Features::OneHot;
        self
    }

    /// `dim`-dimensional Gaussian features around a class centroid
    /// (unit entry at coordinate `class % dim`), noise std `noise`.
    pub fn with_noisy_features(mut self, dim: usize, noise: f64) -> Self {
        self.features = Features::Noisy { dim, noise };
        self
    }

    pub fn build(&self) -> Result<Graph> {
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return Err(HerbError::precondition("edge probabilities must lie in [0, 1]"));
        }
        let mut rng = seeded(self.seed, Stream::Synthetic);
        let classes = self.sizes.len();
        let labels: Vec<usize> = self
            .sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
            .collect();
        let n = labels.len();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if labels[u] == labels[v] { self.p_in } else { self.p_out };
                if rng.gen::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        let features = match self.features {
            Features::OneHot => Matrix::from_fn(n, classes, |i, j| if labels[i] == j { 1.0 } else { 0.0 }),
            Features::Noisy { dim, noise } => noisy_features(&labels, dim, noise, &mut rng),
        };
        Graph::from_edges(n, &edges, features, labels, classes)
    }
}

fn noisy_features(labels: &[usize], dim: usize, noise: f64, rng: &mut HerbRng) -> Matrix {
    Matrix::from_fn(labels.len(), dim, |i, j| {
        let centre = if labels[i] % dim.max(1) == j { 1.0 } else { 0.0 };
        // Box-Muller
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        centre + noise * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_homophily;

    #[test]
    fn homophily_target_is_roughly_met() {
        let g = sbm_with_homophily(200, 4, 8.0, 0.3, 5).unwrap().build().unwrap();
        let h = edge_homophily(&g).unwrap();
        assert!((h - 0.3).abs() < 0.06, "h = {h}");
        let mean_deg: f64 = g.degrees().iter().sum::<f64>() / 200.0;
        assert!((mean_deg - 8.0).abs() < 1.0, "{mean_deg}");
    }

    #[test]
    fn one_hot_features_match_labels() {
        let g = stochastic_block_model(&[3, 2], 1.0, 0.0, 0).build().unwrap();
        assert_eq!(g.edge_count(), 3 + 1);
        for i in 0..5 {
            assert_eq!(g.features().get(i, g.labels()[i]), 1.0);
            assert_eq!(g.features().row(i).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let a = stochastic_block_model(&[10, 10], 0.3, 0.1, 4).with_noisy_features(3, 0.5).build().unwrap();
        let b = stochastic_block_model(&[10, 10], 0.3, 0.1, 4).with_noisy_features(3, 0.5).build().unwrap();
        assert_eq!(a.adjacency(), b.adjacency());
        assert_eq!(a.features(), b.features());
    }
}
