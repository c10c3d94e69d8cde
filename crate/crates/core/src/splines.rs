//! Smoothing splines through the Demmler–Reinsch basis.
//!
//! The roughness functional `∫[f^{(m)}]²` is discretized on the design by
//! weighted m-th divided differences,
//!
//! ```text
//! fᵀPf = Σ_i w_i (m!·f[x_i, …, x_{i+m}])²,   w_i = (x_{i+m} − x_i)/m,
//! ```
//!
//! which on a uniform grid with spacing `h` is `h^{1−2m}‖Δ^m f‖²`. The basis
//! `φ_k = √n·v_k` comes from the eigenvectors `v_k` of `P`, so that
//! `(1/n)Σ_i φ_k(X_i)φ_s(X_i) = δ_ks` and `φ_kᵀPφ_s = ν_k δ_ks` with
//! `ν_k = n·μ_k`. Polynomials of degree below m span the null space and get
//! `ν = 0` exactly.
//!
//! A smoothing spline with parameter α shrinks coefficient k by
//! `1/(1 + αν_k)`: the Tikhonov family on the reciprocal eigenvalues
//! `λ_k = 1/ν_k`, with `λ = +∞` on the null space.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::envelope::{AlphaGrid, GridSpec};
use crate::error::{Error, Result};
use crate::estimator::{select_alpha, EstimateReport};
use crate::linalg;
use crate::quadrature;
use crate::regularizers::Regularizer;
use crate::spectral::SpectralModel;

/// Spacing used to separate tied design points.
pub const TIE_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SplineWarning {
    /// Tied design points were separated by `TIE_JITTER`.
    TiesJittered { count: usize },
}

#[derive(Debug, Clone)]
pub struct SplineBasis {
    /// n×n; column k holds `φ_k(X_1), …, φ_k(X_n)`.
    phi: DMatrix<f64>,
    /// Nondecreasing; the first m entries are exactly 0.
    nu: Vec<f64>,
    m: usize,
    design: Vec<f64>,
    warnings: Vec<SplineWarning>,
}

fn prepare_design(design: &[f64]) -> Result<(Vec<f64>, usize)> {
    if design.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("design"));
    }
    if design.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::InvalidArgument("design points must lie in [0, 1]".into()));
    }
    let mut out = design.to_vec();
    let mut ties = 0;
    for i in 1..out.len() {
        if design[i] < design[i - 1] {
            return Err(Error::InvalidArgument(format!(
                "design must be sorted; x[{}] = {} < x[{}] = {}",
                i,
                design[i],
                i - 1,
                design[i - 1]
            )));
        }
        if out[i] <= out[i - 1] {
            out[i] = out[i - 1] + TIE_JITTER;
            ties += 1;
        }
    }
    Ok((out, ties))
}

/// Discrete roughness penalty `P` (n×n, symmetric, bandwidth m).
pub fn penalty_matrix(design: &[f64], m: usize) -> Result<DMatrix<f64>> {
    let n = design.len();
    if m == 0 || n < m + 1 {
        return Err(Error::InvalidArgument(format!("need m >= 1 and n > m, got n = {n}, m = {m}")));
    }
    let factorial: f64 = (1..=m).map(|j| j as f64).product();
    let mut p = DMatrix::zeros(n, n);
    let mut row = alloc::vec![0.0; m + 1];
    for i in 0..n - m {
        let x = &design[i..=i + m];
        for j in 0..=m {
            let denom: f64 = (0..=m).filter(|&l| l != j).map(|l| x[j] - x[l]).product();
            row[j] = factorial / denom;
        }
        let weight = (x[m] - x[0]) / m as f64;
        for a in 0..=m {
            for b in 0..=m {
                p[(i + a, i + b)] += weight * row[a] * row[b];
            }
        }
    }
    Ok(p)
}

/// Demmler–Reinsch basis of order `m` for a sorted design in `[0, 1]`.
pub fn demmler_reinsch(design: &[f64], m: usize) -> Result<SplineBasis> {
    let n = design.len();
    if m == 0 {
        return Err(Error::InvalidArgument("smoothness order m must be >= 1".into()));
    }
    if n < 2 * m + 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2m + 2 = {}, got n = {n}", 2 * m + 2)));
    }
    let (design, ties) = prepare_design(design)?;
    let penalty = penalty_matrix(&design, m)?;

    // Orthonormal basis of polynomials of degree < m, and its completion.
    let vandermonde = DMatrix::from_fn(n, m, |i, j| libm::pow(design[i] - 0.5, j as f64));
    let q = linalg::householder_full_q(&vandermonde);
    let complement = q.columns(m, n - m).clone_owned();
    let reduced = complement.transpose() * (&penalty * &complement);
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let (mu, u) = linalg::symmetric_eigen(reduced, false)?;

    let scale = libm::sqrt(n as f64);
    let mut phi = DMatrix::zeros(n, n);
    let mut nu = Vec::with_capacity(n);
    for k in 0..m {
        let mut col = q.column(k).clone_owned();
        linalg::fix_sign(col.as_mut_slice());
        phi.set_column(k, &(col * scale));
        nu.push(0.0);
    }
    for (j, &mu_j) in mu.iter().enumerate() {
        let mut col = &complement * u.column(j);
        linalg::fix_sign(col.as_mut_slice());
        phi.set_column(m + j, &(col * scale));
        nu.push(n as f64 * mu_j.max(0.0));
    }

    let mut warnings = Vec::new();
    if ties > 0 {
        warnings.push(SplineWarning::TiesJittered { count: ties });
    }
    Ok(SplineBasis { phi, nu, m, design, warnings })
}

impl SplineBasis {
    pub fn n(&self) -> usize {
        self.nu.len()
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn design(&self) -> &[f64] {
        &self.design
    }

    pub fn warnings(&self) -> &[SplineWarning] {
        &self.warnings
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!("y has length {}, design has {}", y.len(), self.n())));
        }
        Ok(())
    }

    /// Empirical Fourier coefficients `ȳ_k = (1/n) Σ_i y_i φ_k(X_i)`.
    pub fn coefficients(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let y = DVector::from_column_slice(y);
        let c = self.phi.transpose() * y / self.n() as f64;
        Ok(c.as_slice().to_vec())
    }

    /// Reciprocal eigenvalues `λ_k = 1/ν_k`, `+∞` on the null space; nonincreasing.
    pub fn lambdas(&self) -> Vec<f64> {
        self.nu.iter().map(|&v| if v > 0.0 { 1.0 / v } else { f64::INFINITY }).collect()
    }

    /// Spectral model in orthonormal coordinates `√n·ȳ_k`, on which the
    /// generic estimator targets the per-observation noise variance.
    pub fn spectral_model(&self, y: &[f64]) -> Result<SpectralModel> {
        let scale = libm::sqrt(self.n() as f64);
        let ybar = self.coefficients(y)?.into_iter().map(|c| c * scale).collect();
        SpectralModel::new(self.lambdas(), ybar)
    }

    /// Fitted values `Σ_k h_α(ν_k)·coefs_k·φ_k(X_i)` for given coefficients.
    fn synthesize(&self, coefs: &[f64], alpha: f64) -> Vec<f64> {
        let shrunk = DVector::from_iterator(
            self.n(),
            coefs.iter().zip(&self.nu).map(|(c, &v)| c / (1.0 + alpha * v)),
        );
        (&self.phi * shrunk).as_slice().to_vec()
    }
}

/// Smoothing-spline fit at the design points.
pub fn spline_fit(basis: &SplineBasis, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    let coefs = basis.coefficients(y)?;
    Ok(basis.synthesize(&coefs, alpha))
}

/// `K(m) = ∫_0^∞ [2/(1+x^{2m}) − 1/(1+x^{2m})²]² dx`.
pub fn k_m_constant(m: usize) -> f64 {
    assert!(m >= 1, "smoothness order must be >= 1");
    let two_m = (2 * m) as f64;
    let g_of_a = |a: f64| {
        let g = a * (2.0 - a);
        g * g
    };
    let inner = quadrature::integrate(|x| g_of_a(1.0 / (1.0 + libm::pow(x, two_m))), 0.0, 1.0, 1e-13, 1e-14);
    // x = 1/t: A = t^{2m}/(1 + t^{2m}), dx = dt/t².
    let outer = quadrature::integrate(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let u = libm::pow(t, two_m);
            g_of_a(u / (1.0 + u)) / (t * t)
        },
        0.0,
        1.0,
        1e-13,
        1e-14,
    );
    inner.value + outer.value
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplineFitReport {
    pub fitted: Vec<f64>,
    pub alpha_hat: f64,
    pub sigma2_hat: f64,
    pub w_alpha: f64,
    pub v_eps: f64,
    pub estimate: EstimateReport,
}

/// Basis and grid prepared once for a design, reusable across responses.
#[derive(Debug, Clone)]
pub struct SplineNoiseEstimator {
    basis: SplineBasis,
    lambdas: Vec<f64>,
    grid: AlphaGrid,
}

impl SplineNoiseEstimator {
    pub fn new(basis: SplineBasis, grid_spec: &GridSpec) -> Result<Self> {
        let lambdas = basis.lambdas();
        let grid = grid_spec.build(&Regularizer::Tikhonov, &lambdas, basis.n())?;
        Ok(Self { basis, lambdas, grid })
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn grid(&self) -> &AlphaGrid {
        &self.grid
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Selection only, without synthesizing fitted values.
    pub fn select(&self, y: &[f64]) -> Result<EstimateReport> {
        let model = self.basis.spectral_model(y)?;
        select_alpha(&model, &Regularizer::Tikhonov, &self.grid)
    }

    pub fn estimate(&self, y: &[f64]) -> Result<SplineFitReport> {
        let coefs = self.basis.coefficients(y)?;
        let scale = libm::sqrt(self.basis.n() as f64);
        let model = SpectralModel::new(self.lambdas.clone(), coefs.iter().map(|c| c * scale).collect())?;
        let estimate = select_alpha(&model, &Regularizer::Tikhonov, &self.grid)?;
        let fitted = self.basis.synthesize(&coefs, estimate.alpha_hat);
        Ok(SplineFitReport {
            fitted,
            alpha_hat: estimate.alpha_hat,
            sigma2_hat: estimate.sigma2_hat,
            w_alpha: estimate.w_at_alpha_hat,
            v_eps: estimate.v_at_alpha_hat,
            estimate,
        })
    }
}

pub fn spline_noise_estimate(design: &[f64], y: &[f64], m: usize, grid_spec: &GridSpec) -> Result<SplineFitReport> {
    let basis = demmler_reinsch(design, m)?;
    basis.check_len(y)?;
    SplineNoiseEstimator::new(basis, grid_spec)?.estimate(y)
}

/// Uniform design `X_i = (i − 1/2)/n`.
pub fn uniform_design(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}
