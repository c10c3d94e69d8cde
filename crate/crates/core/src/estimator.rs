//! Noise-variance estimate `σ̂²_α`, the data-driven choice of α and the
//! oracle risk quantities used to judge it.
//!
//! In spectral coordinates
//!
//! ```text
//! σ̂²_α(Y) = (1/n) Σ_k [1 − H_α(λ_k)]² Ȳ_k² · [1 − W(α)/n]⁻¹,   W(α) = Σ_k G_α(λ_k)
//! ```
//!
//! and α̂ minimizes `σ̂²_α(Y)·[1 + V_ε(α)/n]` over the grid.

use alloc::format;
use alloc::vec::Vec;

use crate::envelope::AlphaGrid;
use crate::error::{Error, Result};
use crate::regularizers::{condition_a_constant, d_and_w, q_from_w, Regularizer};
use crate::spectral::SpectralModel;

/// Trace fraction `W(α)/n` above which a warning is emitted.
pub const TRACE_WARNING_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum EstimateWarning {
    /// All rotated observations are zero; the estimate is 0.
    ZeroObservations,
    /// `W(α̂)/n` exceeds 1/2, so the bias correction is large.
    LargeTraceFraction { alpha: f64, fraction: f64 },
    /// Grid points with `W(α) ≥ n` were skipped.
    DegeneratePointsSkipped { count: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub sigma2_hat: f64,
    pub alpha_hat: f64,
    /// Position of α̂ in the grid.
    pub alpha_index: usize,
    /// `σ̂²_α·(1 + V_ε(α)/n)` per grid point; `+∞` where `W(α) ≥ n`.
    pub criterion_values: Vec<f64>,
    pub q_at_alpha_hat: f64,
    pub d_at_alpha_hat: f64,
    pub w_at_alpha_hat: f64,
    pub v_at_alpha_hat: f64,
    pub condition_a_constant: f64,
    pub warnings: Vec<EstimateWarning>,
}

/// Oracle risk over the grid, available only when the signal is known.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleReport {
    pub r_eps: f64,
    pub alpha_oracle: f64,
    pub rho: f64,
    /// `R_ε(α, β)` per grid point.
    pub risk_values: Vec<f64>,
}

/// `Σ_k [1 − H_α(λ_k)]² Ȳ_k²` with `H = 0` beyond the p eigenvalues.
fn residual_energy(model: &SpectralModel, family: &Regularizer, alpha: f64) -> f64 {
    let eig = model.eigenvalues();
    model
        .ybar()
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let shrink = if k < eig.len() { 1.0 - family.h(alpha, eig[k]) } else { 1.0 };
            shrink * shrink * y * y
        })
        .sum()
}

/// σ̂²_α together with `W(α)`.
fn sigma2_with_trace(model: &SpectralModel, family: &Regularizer, alpha: f64) -> Result<(f64, f64)> {
    let n = model.n();
    let (_, w) = d_and_w(family, alpha, model.eigenvalues());
    // (rss/n)(1 + q) written as rss/(n − W).
    q_from_w(w, n, alpha)?;
    let rss = residual_energy(model, family, alpha);
    Ok((rss / (n as f64 - w), w))
}

pub fn sigma2_alpha(model: &SpectralModel, family: &Regularizer, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    Ok(sigma2_with_trace(model, family, alpha)?.0)
}

fn check_grid(model: &SpectralModel, grid: &AlphaGrid) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid("selection needs at least one grid point"));
    }
    if model.n() == 0 {
        return Err(Error::Dimension("empty model".into()));
    }
    Ok(())
}

/// Minimizes `σ̂²_α(Y)[1 + V_ε(α)/n]` over the grid. Ties go to the larger α
/// (earlier grid position).
pub fn select_alpha(model: &SpectralModel, family: &Regularizer, grid: &AlphaGrid) -> Result<EstimateReport> {
    check_grid(model, grid)?;
    let n = model.n() as f64;
    let mut criterion_values = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, f64, f64)> = None;
    let mut skipped = 0;

    for (i, (&alpha, &v)) in grid.alphas().iter().zip(grid.v_values()).enumerate() {
        match sigma2_with_trace(model, family, alpha) {
            Ok((s2, w)) => {
                let crit = s2 * (1.0 + v / n);
                criterion_values.push(crit);
                if best.map_or(true, |(_, c, _, _)| crit < c) {
                    best = Some((i, crit, s2, w));
                }
            }
            Err(Error::DegenerateCorrection { .. }) => {
                skipped += 1;
                criterion_values.push(f64::INFINITY);
            }
            Err(e) => return Err(e),
        }
    }

    let (idx, _, sigma2_hat, w) = best.ok_or(Error::EmptyGrid("W(alpha) >= n at every grid point"))?;
    let alpha_hat = grid.alphas()[idx];
    let mut warnings = Vec::new();
    if model.ybar().iter().all(|y| *y == 0.0) {
        warnings.push(EstimateWarning::ZeroObservations);
    }
    if w / n > TRACE_WARNING_FRACTION {
        warnings.push(EstimateWarning::LargeTraceFraction { alpha: alpha_hat, fraction: w / n });
    }
    if skipped > 0 {
        warnings.push(EstimateWarning::DegeneratePointsSkipped { count: skipped });
    }

    Ok(EstimateReport {
        sigma2_hat,
        alpha_hat,
        alpha_index: idx,
        criterion_values,
        q_at_alpha_hat: q_from_w(w, model.n(), alpha_hat)?,
        d_at_alpha_hat: grid.d_values()[idx],
        w_at_alpha_hat: w,
        v_at_alpha_hat: grid.v_values()[idx],
        condition_a_constant: condition_a_constant(family, grid.alphas(), model.eigenvalues())
            .unwrap_or(f64::INFINITY),
        warnings,
    })
}

/// Rule that plugs the true σ² into the bias proxy `Ȳ² − σ²` instead of
/// using the plug-in estimate. Kept as a reference path for tests.
#[cfg(any(test, feature = "reference-rules"))]
pub fn select_alpha_known_sigma(
    model: &SpectralModel,
    family: &Regularizer,
    grid: &AlphaGrid,
    sigma2: f64,
) -> Result<(usize, f64)> {
    check_grid(model, grid)?;
    let n = model.n();
    let mut best: Option<(usize, f64)> = None;
    for (i, (&alpha, &v)) in grid.alphas().iter().zip(grid.v_values()).enumerate() {
        let (_, w) = d_and_w(family, alpha, model.eigenvalues());
        let q = match q_from_w(w, n, alpha) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let rss = residual_energy(model, family, alpha);
        let value = (1.0 + q) * (rss + sigma2 * v) + sigma2 * (1.0 + q) * w - sigma2 * n as f64 * q;
        if best.map_or(true, |(_, b)| value < b) {
            best = Some((i, value));
        }
    }
    best.map(|(i, _)| (i, grid.alphas()[i]))
        .ok_or(Error::EmptyGrid("W(alpha) >= n at every grid point"))
}

/// `Δ = n·|σ̂² − σ²‖ξ‖²/n|`, the distance to the pseudo-estimate.
pub fn delta_diagnostic(sigma2_hat: f64, sigma: f64, xi: &[f64]) -> Result<f64> {
    if xi.is_empty() {
        return Err(Error::Dimension("noise vector is empty".into()));
    }
    let n = xi.len() as f64;
    let pseudo = sigma * sigma * xi.iter().map(|x| x * x).sum::<f64>() / n;
    Ok(n * libm::fabs(sigma2_hat - pseudo))
}

/// `R_ε(α, β) = [1 + V/n]{[1 + q_α] Σ [1 − H_α(λ_k)]² s_k² + σ²V}` over the
/// grid, where `s_k = √λ_k β̄_k` are the noiseless spectral coordinates.
pub fn oracle_quantities(
    signal: &[f64],
    eigenvalues: &[f64],
    n: usize,
    family: &Regularizer,
    grid: &AlphaGrid,
    sigma: f64,
) -> Result<OracleReport> {
    if signal.len() != n || eigenvalues.len() > n {
        return Err(Error::Dimension(format!(
            "signal has length {}, eigenvalues {}, n = {}",
            signal.len(),
            eigenvalues.len(),
            n
        )));
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid("oracle needs at least one grid point"));
    }
    let sigma2 = sigma * sigma;
    let nf = n as f64;
    let mut risk_values = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (&alpha, &v)) in grid.alphas().iter().zip(grid.v_values()).enumerate() {
        let (_, w) = d_and_w(family, alpha, eigenvalues);
        let risk = match q_from_w(w, n, alpha) {
            Ok(q) => {
                let bias: f64 = signal
                    .iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let shrink = if k < eigenvalues.len() { 1.0 - family.h(alpha, eigenvalues[k]) } else { 1.0 };
                        shrink * shrink * s * s
                    })
                    .sum();
                (1.0 + v / nf) * ((1.0 + q) * bias + sigma2 * v)
            }
            Err(_) => f64::INFINITY,
        };
        risk_values.push(risk);
        if best.map_or(true, |(_, b)| risk < b) {
            best = Some((i, risk));
        }
    }
    let (idx, r_eps) = best.unwrap();
    if !r_eps.is_finite() {
        return Err(Error::EmptyGrid("W(alpha) >= n at every grid point"));
    }
    if r_eps <= 0.0 {
        return Err(Error::DegenerateOracle);
    }
    Ok(OracleReport {
        r_eps,
        alpha_oracle: grid.alphas()[idx],
        rho: sigma2 * libm::sqrt(grid.d_alpha_max()) / r_eps,
        risk_values,
    })
}
