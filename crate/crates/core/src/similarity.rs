//! Min-max normalised embeddings and their pairwise inner products.

use crate::error::{HerbError, Result};
use crate::tensor::Matrix;

pub const DEFAULT_SIGMA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityBundle {
    pub s_str: Matrix,
    pub s_fea: Matrix,
    /// Similarity of the concatenation `[Z_str | Z_fea]`.
    pub s_sf: Matrix,
}

/// `(Z - min Z) / (max Z - min Z + sigma)` with min and max over the whole matrix.
pub fn minmax_normalize(z: &Matrix, sigma: f64) -> Result<Matrix> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(HerbError::precondition(format!("sigma must be positive, got {sigma}")));
    }
    if z.is_empty() {
        return Ok(z.clone());
    }
    let (lo, hi) = (z.min(), z.max());
    let denom = hi - lo + sigma;
    Ok(z.map(|v| (v - lo) / denom))
}

/// `S[i][j] = <z_i, z_j>`, i.e. `Z · Zᵀ`. Symmetric by construction.
pub fn pairwise_similarity(z: &Matrix) -> Matrix {
    let n = z.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let d: f64 = z.row(i).iter().zip(z.row(j)).map(|(a, b)| a * b).sum();
            s.set(i, j, d);
            s.set(j, i, d);
        }
    }
    s
}

pub fn build_bundle(z_str: &Matrix, z_fea: &Matrix, sigma: f64) -> Result<SimilarityBundle> {
    if z_str.rows() != z_fea.rows() {
        return Err(HerbError::Shape {
            op: "build_bundle",
            left: z_str.shape(),
            right: z_fea.shape(),
        });
    }
    Ok(SimilarityBundle {
        s_str: pairwise_similarity(&minmax_normalize(z_str, sigma)?),
        s_fea: pairwise_similarity(&minmax_normalize(z_fea, sigma)?),
        s_sf: pairwise_similarity(&minmax_normalize(&z_str.hstack(z_fea)?, sigma)?),
    })
}
