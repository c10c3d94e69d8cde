//! Deterministic envelope for the chi-square process
//! `ζ(α) = Σ G_α(λ_k)(1 − ξ'_k²)` and the geometric α-grid on which it is
//! evaluated.
//!
//! With `t = log(D(α)/D(α_max))` the envelope is
//!
//! ```text
//! V_ε(α) = (1+ε) √(2D(α)) · { t + 2(1+ε) log((Q/ε²)·t) }^{1/2},   Q = 4/(√2 − 1)²
//! ```
//!
//! The brace is not defined (or negative) close to `α_max`; there the
//! envelope is clamped to 0. Grid points satisfy
//! `D(α_k) = (1+r)^k D(α_max)` with `r = ε²/Q` by default.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{E, SQRT_2};

use crate::error::{Error, Result};
use crate::regularizers::{d_and_w, Regularizer};

/// `4/(√2 − 1)² = 4(√2 + 1)² = 12 + 8√2`.
pub const Q_CONST: f64 = 12.0 + 8.0 * SQRT_2;

pub const DEFAULT_EPSILON: f64 = 0.5;

/// Lower bound on `D(α_max)` required by the risk bound.
pub const D_ALPHA_MAX_TARGET: f64 = 5.0;

/// Default `α_min / α_max`.
pub const ALPHA_MIN_FACTOR: f64 = 1e-8;

/// Default cap on `W(α)/n` when `α_min` is chosen automatically.
pub const MAX_TRACE_FRACTION: f64 = 0.5;

const MONOTONE_SAMPLES: usize = 64;
const MONOTONE_SLACK: f64 = 1e-12;
const LEVEL_TOLERANCE: f64 = 1e-8;
const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvelopeParams {
    pub epsilon: f64,
    pub alpha_max: f64,
    pub d_alpha_max: f64,
}

impl EnvelopeParams {
    pub fn new(epsilon: f64, alpha_max: f64, d_alpha_max: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if !(d_alpha_max > 0.0) || !d_alpha_max.is_finite() {
            return Err(Error::InvalidArgument(format!("D(alpha_max) must be positive, got {d_alpha_max}")));
        }
        Ok(Self { epsilon, alpha_max, d_alpha_max })
    }

    pub fn q_const(&self) -> f64 {
        Q_CONST
    }

    /// `r = ε²/Q`.
    pub fn default_ratio(&self) -> f64 {
        default_ratio(self.epsilon)
    }

    /// Fails unless `D(α_max) ≥ 5`.
    pub fn check_theorem_regime(&self) -> Result<()> {
        if self.d_alpha_max < D_ALPHA_MAX_TARGET {
            return Err(Error::InvalidArgument(format!(
                "D(alpha_max) = {} is below {}",
                self.d_alpha_max, D_ALPHA_MAX_TARGET
            )));
        }
        Ok(())
    }

    fn log_ratio(&self, d_alpha: f64) -> Result<f64> {
        if !(d_alpha >= self.d_alpha_max * (1.0 - MONOTONE_SLACK)) {
            return Err(Error::EnvelopeDomain { d: d_alpha, d_max: self.d_alpha_max });
        }
        Ok(libm::log(d_alpha / self.d_alpha_max).max(0.0))
    }
}

pub fn default_ratio(epsilon: f64) -> f64 {
    epsilon * epsilon / Q_CONST
}

pub fn v_epsilon(params: &EnvelopeParams, d_alpha: f64) -> Result<f64> {
    let t = params.log_ratio(d_alpha)?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let eps = params.epsilon;
    let brace = t + 2.0 * (1.0 + eps) * libm::log(Q_CONST / (eps * eps) * t);
    if brace <= 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 + eps) * libm::sqrt(2.0 * d_alpha * brace))
}

/// Conjectured sharper envelope with a `log log` term. `log log t` is
/// evaluated at `max(t, e)`.
pub fn v_epsilon_tilde(params: &EnvelopeParams, d_alpha: f64) -> Result<f64> {
    let t = params.log_ratio(d_alpha)?;
    if t <= 0.0 {
        return Ok(0.0);
    }
    let eps = params.epsilon;
    let loglog = libm::log(libm::log(t.max(E)));
    let brace = t + 2.0 * (1.0 + eps) * (loglog + libm::log(1.0 / eps));
    if brace <= 0.0 {
        return Ok(0.0);
    }
    Ok(libm::sqrt(2.0 * d_alpha * brace))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum GridWarning {
    /// `D(α_min) ≤ (1+r)·D(α_max)`: the grid is the single point `α_max`.
    SinglePoint,
    /// The family is piecewise constant in α; some levels could not be hit
    /// and were replaced by the nearest achievable level above them.
    PlateauSnapped { points: usize },
    /// `α_min` was raised so that `W(α_min) ≤ n/2`.
    AlphaMinRaised { requested: f64, used: f64 },
    /// `D(α_max)` is below the recommended minimum of 5.
    SmallDAlphaMax { d_alpha_max: f64 },
}

/// Finite grid ordered from `α_max` downward with strictly increasing `D`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaGrid {
    alphas: Vec<f64>,
    d_values: Vec<f64>,
    w_values: Vec<f64>,
    v_values: Vec<f64>,
    params: EnvelopeParams,
    ratio: f64,
    alpha_min: f64,
    warnings: Vec<GridWarning>,
}

impl AlphaGrid {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn d_values(&self) -> &[f64] {
        &self.d_values
    }

    pub fn w_values(&self) -> &[f64] {
        &self.w_values
    }

    pub fn v_values(&self) -> &[f64] {
        &self.v_values
    }

    pub fn params(&self) -> &EnvelopeParams {
        &self.params
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn alpha_max(&self) -> f64 {
        self.params.alpha_max
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    pub fn d_alpha_max(&self) -> f64 {
        self.params.d_alpha_max
    }

    pub fn warnings(&self) -> &[GridWarning] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Number of grid points where the envelope is clamped to zero.
    pub fn clamped_points(&self) -> usize {
        self.v_values.iter().filter(|v| **v == 0.0).count()
    }

    pub fn v_tilde_values(&self) -> Vec<f64> {
        self.d_values
            .iter()
            .map(|&d| v_epsilon_tilde(&self.params, d).unwrap_or(0.0))
            .collect()
    }

    /// Grid restricted to a single point, mostly for tests and diagnostics.
    pub fn single(family: &Regularizer, eigenvalues: &[f64], alpha: f64, epsilon: f64) -> Result<Self> {
        let (d, w) = d_and_w(family, alpha, eigenvalues);
        let params = EnvelopeParams::new(epsilon, alpha, d)?;
        Ok(Self {
            alphas: alloc::vec![alpha],
            d_values: alloc::vec![d],
            w_values: alloc::vec![w],
            v_values: alloc::vec![0.0],
            params,
            ratio: default_ratio(epsilon),
            alpha_min: alpha,
            warnings: alloc::vec![GridWarning::SinglePoint],
        })
    }
}

/// Verifies that `D` does not increase with α on log-spaced samples.
fn check_monotone(family: &Regularizer, eigenvalues: &[f64], alpha_min: f64, alpha_max: f64) -> Result<()> {
    let span = libm::log(alpha_max / alpha_min);
    let mut prev = d_and_w(family, alpha_min, eigenvalues).0;
    for i in 1..MONOTONE_SAMPLES {
        let a = alpha_min * libm::exp(span * i as f64 / (MONOTONE_SAMPLES - 1) as f64);
        let d = d_and_w(family, a, eigenvalues).0;
        if d > prev * (1.0 + MONOTONE_SLACK) + f64::MIN_POSITIVE {
            return Err(Error::NonMonotone { prev, next: d });
        }
        prev = d;
    }
    Ok(())
}

/// Solves `D(α) = target` on `[lo, hi]` where `D(lo) ≥ target > D(hi)`.
/// Returns `(α, D(α), snapped)`; `snapped` means the level sits on a jump
/// and the lower end of the jump was taken.
fn solve_level(
    family: &Regularizer,
    eigenvalues: &[f64],
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<(f64, f64, bool)> {
    let mut d_lo = d_and_w(family, lo, eigenvalues).0;
    let mut d_hi = d_and_w(family, hi, eigenvalues).0;
    for _ in 0..400 {
        let mid = libm::sqrt(lo * hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let d = d_and_w(family, mid, eigenvalues).0;
        if d > d_lo * (1.0 + MONOTONE_SLACK) || d < d_hi * (1.0 - MONOTONE_SLACK) {
            return Err(Error::NonMonotone { prev: d_lo, next: d });
        }
        if libm::fabs(d - target) <= LEVEL_TOLERANCE * target {
            return Ok((mid, d, false));
        }
        if d >= target {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
            d_hi = d;
        }
    }
    if libm::fabs(d_lo - target) <= LEVEL_TOLERANCE * target {
        return Ok((lo, d_lo, false));
    }
    Ok((lo, d_lo, true))
}

fn validate_range(alpha_min: f64, alpha_max: f64) -> Result<()> {
    if !(alpha_min > 0.0 && alpha_min < alpha_max && alpha_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < alpha_min < alpha_max < inf, got [{alpha_min}, {alpha_max}]"
        )));
    }
    Ok(())
}

/// Geometric grid `D(α_k) = (1+r)^k D(α_max)` from `α_max` down to `α_min`.
///
/// `ratio` overrides `r = ε²/Q`. The last point is `α_min` itself whenever
/// it adds a new `D` level.
pub fn build_grid(
    family: &Regularizer,
    eigenvalues: &[f64],
    alpha_min: f64,
    alpha_max: f64,
    epsilon: f64,
    ratio: Option<f64>,
) -> Result<AlphaGrid> {
    validate_range(alpha_min, alpha_max)?;
    let r = ratio.unwrap_or_else(|| default_ratio(epsilon));
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("grid ratio must be positive, got {r}")));
    }
    let (d_max, w_max) = d_and_w(family, alpha_max, eigenvalues);
    if !(d_max > 0.0) {
        return Err(Error::InvalidArgument(format!("D(alpha_max) = {d_max}; need D > 0")));
    }
    let params = EnvelopeParams::new(epsilon, alpha_max, d_max)?;
    check_monotone(family, eigenvalues, alpha_min, alpha_max)?;

    let mut alphas = alloc::vec![alpha_max];
    let mut d_values = alloc::vec![d_max];
    let mut w_values = alloc::vec![w_max];
    let mut warnings = Vec::new();

    let (d_min, w_min) = d_and_w(family, alpha_min, eigenvalues);
    if d_min <= d_max * (1.0 + r) {
        warnings.push(GridWarning::SinglePoint);
    } else {
        let log_step = libm::log1p(r);
        let mut snapped = 0;
        let mut hi = alpha_max;
        let mut k = 1u64;
        loop {
            let target = d_max * libm::exp(k as f64 * log_step);
            let last = *d_values.last().unwrap();
            if target > d_min {
                if d_min > last {
                    alphas.push(alpha_min);
                    d_values.push(d_min);
                    w_values.push(w_min);
                }
                break;
            }
            if target <= last {
                k += 1;
                continue;
            }
            let (alpha, d, was_snapped) = solve_level(family, eigenvalues, target, alpha_min, hi)?;
            if was_snapped {
                snapped += 1;
            }
            if d > last {
                alphas.push(alpha);
                d_values.push(d);
                w_values.push(d_and_w(family, alpha, eigenvalues).1);
                hi = alpha;
            }
            if alphas.len() > MAX_GRID_POINTS {
                return Err(Error::InvalidArgument(format!("grid exceeds {MAX_GRID_POINTS} points")));
            }
            k += 1;
        }
        if snapped > 0 {
            warnings.push(GridWarning::PlateauSnapped { points: snapped });
        }
    }

    let v_values = d_values
        .iter()
        .map(|&d| v_epsilon(&params, d))
        .collect::<Result<Vec<_>>>()?;

    Ok(AlphaGrid { alphas, d_values, w_values, v_values, params, ratio: r, alpha_min, warnings })
}

/// Largest α with `f(α) ≥ target` for nonincreasing `f`, located by
/// geometric bisection. `None` if `f` never reaches `target` or never
/// drops below it on `[1e-300, 1e300]`.
fn largest_alpha_at_least(f: impl Fn(f64) -> f64, target: f64, start: f64) -> Option<f64> {
    let mut lo = start;
    let mut hi = start;
    if f(start) >= target {
        while f(hi) >= target {
            lo = hi;
            hi *= 16.0;
            if hi > 1e300 {
                return None;
            }
        }
    } else {
        while f(lo) < target {
            hi = lo;
            lo /= 16.0;
            if lo < 1e-300 {
                return None;
            }
        }
    }
    for _ in 0..400 {
        let mid = libm::sqrt(lo * hi);
        if !(mid > lo && mid < hi) || hi / lo - 1.0 < 1e-13 {
            break;
        }
        if f(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

fn typical_scale(eigenvalues: &[f64]) -> f64 {
    let mut finite: Vec<f64> = eigenvalues.iter().copied().filter(|l| l.is_finite() && *l > 0.0).collect();
    if finite.is_empty() {
        return 1.0;
    }
    finite.sort_by(f64::total_cmp);
    finite[finite.len() / 2]
}

/// Largest α with `D(α) ≥ 5`.
pub fn auto_alpha_max(family: &Regularizer, eigenvalues: &[f64]) -> Result<f64> {
    let d = |a: f64| d_and_w(family, a, eigenvalues).0;
    largest_alpha_at_least(d, D_ALPHA_MAX_TARGET, typical_scale(eigenvalues)).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "cannot place alpha_max automatically: D(alpha) never crosses {D_ALPHA_MAX_TARGET}; pass alpha_max explicitly"
        ))
    })
}

/// `max(α_max·1e-8, smallest α with W(α) ≤ n/2)`.
pub fn auto_alpha_min(family: &Regularizer, eigenvalues: &[f64], n: usize, alpha_max: f64) -> Result<f64> {
    let base = alpha_max * ALPHA_MIN_FACTOR;
    let cap = MAX_TRACE_FRACTION * n as f64;
    let w = |a: f64| d_and_w(family, a, eigenvalues).1;
    if w(base) <= cap {
        return Ok(base);
    }
    if w(alpha_max) > cap {
        return Err(Error::InvalidArgument(format!(
            "W(alpha_max) = {} exceeds n/2 = {}",
            w(alpha_max),
            cap
        )));
    }
    let (mut lo, mut hi) = (base, alpha_max);
    for _ in 0..400 {
        let mid = libm::sqrt(lo * hi);
        if !(mid > lo && mid < hi) || hi / lo - 1.0 < 1e-13 {
            break;
        }
        if w(mid) > cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Grid configuration with automatic defaults for unset bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub epsilon: f64,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub ratio: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, alpha_min: None, alpha_max: None, ratio: None }
    }
}

impl GridSpec {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self { epsilon, ..Self::default() }
    }

    pub fn build(&self, family: &Regularizer, eigenvalues: &[f64], n: usize) -> Result<AlphaGrid> {
        let alpha_max = match self.alpha_max {
            Some(a) => a,
            None => auto_alpha_max(family, eigenvalues)?,
        };
        let mut extra = Vec::new();
        let alpha_min = match self.alpha_min {
            Some(a) => a,
            None => {
                let a = auto_alpha_min(family, eigenvalues, n, alpha_max)?;
                let base = alpha_max * ALPHA_MIN_FACTOR;
                if a > base {
                    extra.push(GridWarning::AlphaMinRaised { requested: base, used: a });
                }
                a
            }
        };
        let mut grid = build_grid(family, eigenvalues, alpha_min, alpha_max, self.epsilon, self.ratio)?;
        if grid.d_alpha_max() < D_ALPHA_MAX_TARGET {
            extra.push(GridWarning::SmallDAlphaMax { d_alpha_max: grid.d_alpha_max() });
        }
        grid.warnings.extend(extra);
        Ok(grid)
    }
}
