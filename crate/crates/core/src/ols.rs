//! Ordinary least squares on a dense design matrix.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff below which a column-equilibrated design is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coeffs: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Diagonal of `(X'X)^-1`.
    pub inv_gram_diag: Vec<f64>,
}

impl OlsFit {
    pub fn ssr(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    /// Standard error of coefficient `j` using the unbiased residual variance.
    pub fn std_error(&self, j: usize) -> f64 {
        let dof = self
            .residuals
            .len()
            .saturating_sub(self.coeffs.len())
            .max(1);
        (self.ssr() / dof as f64 * self.inv_gram_diag[j]).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankDeficient;

/// Solves `min ||y - X b||` where `rows` are the rows of `X`.
///
/// Columns are scaled to unit norm before the SVD so the rank test does not
/// depend on the units of each regressor.
pub fn solve(rows: &[Vec<f64>], y: &[f64]) -> Result<OlsFit, RankDeficient> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if n < k || k == 0 || y.len() != n {
        return Err(RankDeficient);
    }
    let x = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let norm = x.column(j).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    if xs.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(RankDeficient);
    }

    let svd = xs.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    if !(smax > 0.0) || sv.min() <= RANK_TOL * smax {
        return Err(RankDeficient);
    }
    let yv = DVector::from_column_slice(y);
    let b_scaled = svd.solve(&yv, 0.0).map_err(|_| RankDeficient)?;
    let coeffs: Vec<f64> = b_scaled.iter().zip(&scale).map(|(b, s)| b / s).collect();
    let fitted = &x * DVector::from_column_slice(&coeffs);
    let residuals = (yv - fitted).iter().copied().collect();

    let v_t = svd.v_t.as_ref().expect("computed");
    let inv_gram_diag = (0..k)
        .map(|j| {
            let d: f64 = (0..k).map(|i| (v_t[(i, j)] / sv[i]).powi(2)).sum();
            d / (scale[j] * scale[j])
        })
        .collect();
    Ok(OlsFit {
        coeffs,
        residuals,
        inv_gram_diag,
    })
}
