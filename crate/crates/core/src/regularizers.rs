//! Ordered spectral regularizers `H_α(λ)` and the functionals derived
//! from them.
//!
//! Every family here is ordered: `α ≤ α′ ⇒ H_α(λ) ≥ H_α′(λ)`. All families
//! use the convention `H_α(0) = 0`, so zero eigenvalues (including the
//! `n − p` padding directions) never contribute to `G`, `D` or `W`.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FamilyKind {
    Tikhonov,
    Cutoff,
    Landweber,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 3] = [FamilyKind::Tikhonov, FamilyKind::Cutoff, FamilyKind::Landweber];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Tikhonov => "tikhonov",
            FamilyKind::Cutoff => "cutoff",
            FamilyKind::Landweber => "landweber",
        }
    }

    /// Instantiates the family for a given spectrum. Only Landweber depends
    /// on it, through the step `η = 1/λ_max`.
    pub fn bind(self, eigenvalues: &[f64]) -> Result<Regularizer> {
        match self {
            FamilyKind::Tikhonov => Ok(Regularizer::Tikhonov),
            FamilyKind::Cutoff => Ok(Regularizer::Cutoff),
            FamilyKind::Landweber => {
                let top = eigenvalues.iter().copied().fold(0.0, f64::max);
                if !top.is_finite() || top <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "landweber needs a finite positive largest eigenvalue, got {top}"
                    )));
                }
                Ok(Regularizer::Landweber { step: 1.0 / top })
            }
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family '{s}'")))
    }
}

/// A concrete ordered family `α ↦ H_α(·)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// `λ / (α + λ)`.
    Tikhonov,
    /// `1{λ ≥ α}`.
    Cutoff,
    /// `1 − (1 − ηλ)^{1/α}`: Landweber iteration with `1/α` steps of size `η`.
    Landweber { step: f64 },
}

impl Regularizer {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Regularizer::Tikhonov => FamilyKind::Tikhonov,
            Regularizer::Cutoff => FamilyKind::Cutoff,
            Regularizer::Landweber { .. } => FamilyKind::Landweber,
        }
    }

    /// `H_α(λ)` without argument validation. `λ = +∞` maps to 1.
    #[inline]
    pub fn h(&self, alpha: f64, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        if lambda == f64::INFINITY {
            return 1.0;
        }
        match *self {
            Regularizer::Tikhonov => lambda / (alpha + lambda),
            Regularizer::Cutoff => {
                if lambda >= alpha {
                    1.0
                } else {
                    0.0
                }
            }
            Regularizer::Landweber { step } => {
                if alpha == 0.0 {
                    return 1.0;
                }
                let base = (1.0 - step * lambda).clamp(0.0, 1.0);
                1.0 - libm::pow(base, 1.0 / alpha)
            }
        }
    }
}

pub fn h_value(family: &Regularizer, alpha: f64, lambda: f64) -> Result<f64> {
    if !(alpha >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha and lambda must be >= 0, got alpha = {alpha}, lambda = {lambda}"
        )));
    }
    Ok(family.h(alpha, lambda))
}

/// `G = 2h − h² = 1 − (1 − h)²`.
#[inline]
pub fn g(h: f64) -> f64 {
    let c = 1.0 - h;
    1.0 - c * c
}

pub fn g_value(h: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::InvalidArgument(format!("h must lie in [0, 1], got {h}")));
    }
    Ok(g(h))
}

/// `G_α(λ_k)`, `D(α) = Σ G²`, `W(α) = Σ G` and `q_α(n) = [1 − W/n]⁻¹ − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunctionals {
    /// Length n; entries for k > p are `G_α(0) = 0`.
    pub g_values: Vec<f64>,
    pub d_alpha: f64,
    pub q_alpha: f64,
    pub w_alpha: f64,
}

/// `(D(α), W(α))` over the given eigenvalues (padding zeros contribute nothing).
pub fn d_and_w(family: &Regularizer, alpha: f64, eigenvalues: &[f64]) -> (f64, f64) {
    let mut d = 0.0;
    let mut w = 0.0;
    for &l in eigenvalues {
        let gv = g(family.h(alpha, l));
        d += gv * gv;
        w += gv;
    }
    (d, w)
}

pub fn d_alpha(family: &Regularizer, alpha: f64, eigenvalues: &[f64]) -> f64 {
    d_and_w(family, alpha, eigenvalues).0
}

/// `q = [1 − W/n]⁻¹ − 1`; fails when `W ≥ n`.
pub fn q_from_w(w: f64, n: usize, alpha: f64) -> Result<f64> {
    let ratio = w / n as f64;
    if !(ratio < 1.0) {
        return Err(Error::DegenerateCorrection { alpha, w, n });
    }
    Ok(ratio / (1.0 - ratio))
}

pub fn spectral_functionals(
    family: &Regularizer,
    alpha: f64,
    eigenvalues: &[f64],
    n: usize,
) -> Result<SpectralFunctionals> {
    if eigenvalues.len() > n {
        return Err(Error::Dimension(format!("{} eigenvalues for n = {}", eigenvalues.len(), n)));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    let mut g_values = Vec::with_capacity(n);
    g_values.extend(eigenvalues.iter().map(|&l| g(family.h(alpha, l))));
    g_values.resize(n, g(family.h(alpha, 0.0)));
    let d_alpha = g_values.iter().map(|v| v * v).sum();
    let w_alpha: f64 = g_values.iter().sum();
    let q_alpha = q_from_w(w_alpha, n, alpha)?;
    Ok(SpectralFunctionals { g_values, d_alpha, q_alpha, w_alpha })
}

/// `K̂ = max W(α)/D(α)` over the grid, skipping points with `D(α) = 0`.
pub fn condition_a_constant(family: &Regularizer, alphas: &[f64], eigenvalues: &[f64]) -> Result<f64> {
    if alphas.is_empty() {
        return Err(Error::EmptyGrid("condition A needs at least one grid point"));
    }
    let mut best: Option<f64> = None;
    for &a in alphas {
        let (d, w) = d_and_w(family, a, eigenvalues);
        if d > 0.0 {
            let k = w / d;
            best = Some(best.map_or(k, |b: f64| b.max(k)));
        }
    }
    best.ok_or(Error::EmptyGrid("D(alpha) = 0 at every grid point"))
}
