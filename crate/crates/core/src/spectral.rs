//! Reduction of `Y = Xβ + σξ` to the diagonal spectral form.
//!
//! With `XᵀX e_k = λ_k e_k` and `e*_k = X e_k / √λ_k`, the rotated
//! observations `Ȳ_k = ⟨Y, e*_k⟩` satisfy `Ȳ_k = √λ_k β̄_k + σξ'_k` for
//! `k ≤ p` and `Ȳ_k = σξ'_k` on an orthonormal completion of the image of
//! `X`. Eigenvalues at or below `rank_tolerance · λ₁` are folded into the
//! completion block and reported as exact zeros.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative cutoff below which eigenvalues of `XᵀX` count as zero.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

/// Design matrix and observations of a linear model, validated.
#[derive(Debug, Clone)]
pub struct LinearModelData {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl LinearModelData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || n < p {
            return Err(Error::Dimension(format!("need n >= p >= 1, got n = {n}, p = {p}")));
        }
        if y.len() != n {
            return Err(Error::Dimension(format!("Y has length {}, X has {} rows", y.len(), n)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("X"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Y"));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Sufficient statistics of the diagonal model: eigenvalues of `XᵀX` and
/// the rotated observations.
///
/// Eigenvalues are nonincreasing and nonnegative. `+∞` is accepted and
/// means "never shrunk" (`H = 1`); the spline module uses it for the
/// unpenalized polynomial directions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    ybar: Vec<f64>,
}

impl SpectralModel {
    pub fn new(eigenvalues: Vec<f64>, ybar: Vec<f64>) -> Result<Self> {
        let p = eigenvalues.len();
        let n = ybar.len();
        if p == 0 || n < p {
            return Err(Error::Dimension(format!("need n >= p >= 1, got n = {n}, p = {p}")));
        }
        if eigenvalues.iter().any(|l| l.is_nan() || *l < 0.0) {
            return Err(Error::InvalidArgument(format!("eigenvalues must be >= 0")));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!("eigenvalues must be nonincreasing")));
        }
        if ybar.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ybar"));
        }
        Ok(Self { eigenvalues, ybar })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn ybar(&self) -> &[f64] {
        &self.ybar
    }

    pub fn n(&self) -> usize {
        self.ybar.len()
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of strictly positive eigenvalues.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().take_while(|l| **l > 0.0).count()
    }

    /// `Σ_{k > rank} Ȳ_k²`, the squared residual of the least-squares fit.
    pub fn tail_energy(&self) -> f64 {
        self.ybar[self.rank()..].iter().map(|v| v * v).sum()
    }

    /// Same spectrum with observations multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            eigenvalues: self.eigenvalues.clone(),
            ybar: self.ybar.iter().map(|v| c * v).collect(),
        }
    }
}

/// Eigenvalues of `XᵀX` together with the orthonormal basis
/// `(e*_1, …, e*_r, completion)` of ℝⁿ, reusable for many `Y`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    rank: usize,
    /// n×n orthogonal; column k is `e*_k` for k < rank.
    basis: DMatrix<f64>,
    /// p×p; column k is `e_k`.
    right: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn decompose(x: &DMatrix<f64>, rank_tolerance: f64) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || n < p {
            return Err(Error::Dimension(format!("need n >= p >= 1, got n = {n}, p = {p}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("X"));
        }
        if !(rank_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(format!("rank_tolerance must be >= 0")));
        }

        let gram = x.transpose() * x;
        let (mut eigenvalues, right) = linalg::symmetric_eigen(gram, true)?;
        let top = eigenvalues[0].max(0.0);
        let cutoff = rank_tolerance * top;
        let mut rank = 0;
        for l in eigenvalues.iter_mut() {
            if *l > cutoff && *l > 0.0 {
                rank += 1;
            } else {
                *l = 0.0;
            }
        }

        // X v_k / √λ_k drifts from orthogonality like λ_max/λ_k; QR of XV
        // spans the same nested subspaces and stays orthogonal.
        let image = x * right.columns(0, rank);
        let mut basis = linalg::householder_full_q(&image);
        for k in 0..rank {
            if basis.column(k).dot(&image.column(k)) < 0.0 {
                basis.column_mut(k).neg_mut();
            }
        }

        Ok(Self { eigenvalues, rank, basis, right })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn p(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Orthogonal n×n matrix whose columns are `e*_k` followed by the completion.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Rotated coordinates `Qᵀv` of an arbitrary vector of length n.
    pub fn rotate(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n() {
            return Err(Error::Dimension(format!("vector has length {}, expected {}", v.len(), self.n())));
        }
        let v = DVector::from_column_slice(v);
        Ok((self.basis.transpose() * v).as_slice().to_vec())
    }

    pub fn project(&self, y: &[f64]) -> Result<SpectralModel> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Y"));
        }
        let ybar = self.rotate(y)?;
        Ok(SpectralModel { eigenvalues: self.eigenvalues.clone(), ybar })
    }

    /// Noiseless spectral coordinates `√λ_k β̄_k` of a coefficient vector.
    pub fn signal_coordinates(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.p() {
            return Err(Error::Dimension(format!("beta has length {}, expected {}", beta.len(), self.p())));
        }
        let beta = DVector::from_column_slice(beta);
        let coords = self.right.transpose() * beta;
        let mut s = alloc::vec![0.0; self.n()];
        for k in 0..self.rank {
            s[k] = libm::sqrt(self.eigenvalues[k]) * coords[k];
        }
        Ok(s)
    }
}

pub fn spectralize(data: &LinearModelData, rank_tolerance: f64) -> Result<SpectralModel> {
    SpectralBasis::decompose(data.x(), rank_tolerance)?.project(data.y().as_slice())
}

/// Checks that the least-squares residual computed in the original
/// coordinates equals the tail energy of the spectral model.
pub fn model_equivalence_check(data: &LinearModelData, model: &SpectralModel) -> bool {
    if model.n() != data.n() || model.p() != data.p() {
        return false;
    }
    let x = data.x();
    let y = data.y();
    let svd = x.clone().svd(true, true);
    // Singular-value cutoff halfway (geometrically) below the smallest retained one.
    let rank = model.rank();
    let eps = if rank == 0 {
        f64::INFINITY
    } else {
        0.5 * libm::sqrt(model.eigenvalues()[rank - 1])
    };
    let coef = match svd.solve(y, eps) {
        Ok(c) => c,
        Err(_) => return false,
    };
    let residual = y - x * coef;
    let direct = residual.norm_squared();
    let spectral = model.tail_energy();
    let scale = y.norm_squared();
    libm::fabs(direct - spectral) <= 1e-8 * direct.max(spectral) + 1e-12 * scale
}

/// The unbiased classical estimator `Σ_{k>p} Ȳ_k² / (n − p)`.
pub fn classical_unbiased(model: &SpectralModel) -> Result<f64> {
    let (n, p) = (model.n(), model.p());
    if n == p {
        return Err(Error::Dimension(format!("classical estimator needs n > p")));
    }
    Ok(model.ybar()[p..].iter().map(|v| v * v).sum::<f64>() / (n - p) as f64)
}
