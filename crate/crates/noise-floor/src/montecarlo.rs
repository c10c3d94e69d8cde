//! Seeded Monte Carlo harness: synthetic scenarios, envelope exceedance and
//! rate regressions.
//!
//! Every replicate draws from its own ChaCha20 stream keyed by
//! `(seed, level, replicate)`, so results do not depend on the worker count.

use nalgebra::{DMatrix, DVector};
use noise_floor_core::envelope::GridSpec;
use noise_floor_core::estimator::{delta_diagnostic, oracle_quantities, select_alpha, sigma2_alpha};
use noise_floor_core::regularizers::g;
use noise_floor_core::splines::{demmler_reinsch, uniform_design};
use noise_floor_core::{AlphaGrid, FamilyKind, Regularizer, SpectralBasis, SplineNoiseEstimator};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{Error, Result};

/// Regime in which the sup-exceedance bound is stated.
pub const MIN_D_ALPHA_MAX: f64 = 5.0;

const DESIGN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `sin(2πx)`.
    Sin2pi,
    /// `exp(−(x − 1/2)²/0.02)`.
    Bump,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Sin2pi => (2.0 * std::f64::consts::PI * x).sin(),
            TestFunction::Bump => (-(x - 0.5) * (x - 0.5) / 0.02).exp(),
        }
    }
}

impl std::str::FromStr for TestFunction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sin2pi" => Ok(TestFunction::Sin2pi),
            "bump" => Ok(TestFunction::Bump),
            _ => Err(format!("unknown test function '{s}' (expected sin2pi or bump)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// `Y = σξ` with a synthetic `n×p` design.
    PureNoise,
    /// `Y = Xβ + σξ` with a synthetic `n×p` design.
    FixedBeta { beta: Vec<f64> },
    /// `y_i = f(X_i) + σξ_i` on the uniform design, spline estimator of order `m`.
    Sobolev { function: TestFunction, m: usize },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::PureNoise => "pure_noise",
            Scenario::FixedBeta { .. } => "fixed_beta",
            Scenario::Sobolev { .. } => "sobolev",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub sigma: f64,
    pub family: FamilyKind,
    pub grid: GridSpec,
    pub replicates: usize,
    pub seed: u64,
    /// Evaluate `σ̂²_α` at this α instead of selecting it.
    pub fixed_alpha: Option<f64>,
    /// Sample sizes to sweep; empty means `[n]`.
    pub n_ladder: Vec<usize>,
}

impl SimulationConfig {
    pub fn new(scenario: Scenario, n: usize, p: usize, sigma: f64, replicates: usize, seed: u64) -> Self {
        Self {
            scenario,
            n,
            p,
            sigma,
            family: FamilyKind::Tikhonov,
            grid: GridSpec::default(),
            replicates,
            seed,
            fixed_alpha: None,
            n_ladder: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        for &n in self.sizes().iter() {
            match &self.scenario {
                Scenario::Sobolev { m, .. } => {
                    if n < 2 * m + 2 {
                        return Err(Error::Config(format!("n = {n} too small for m = {m}")));
                    }
                }
                Scenario::PureNoise | Scenario::FixedBeta { .. } => {
                    if self.p == 0 || n <= self.p {
                        return Err(Error::Config(format!("need n > p >= 1, got n = {n}, p = {}", self.p)));
                    }
                }
            }
        }
        if let Scenario::FixedBeta { beta } = &self.scenario {
            if beta.len() != self.p {
                return Err(Error::Config(format!("beta has length {}, expected p = {}", beta.len(), self.p)));
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        if self.n_ladder.is_empty() {
            vec![self.n]
        } else {
            self.n_ladder.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub sigma2_hat: f64,
    pub alpha_hat: f64,
    pub delta: f64,
    pub sup_exceedance: f64,
    pub sup_abs_zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        let nf = count as f64;
        // Fixed index order keeps the result independent of scheduling.
        let mean = values.iter().sum::<f64>() / nf;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut data = Data::new(values.to_vec());
        Self {
            count,
            mean,
            sd,
            se: sd / nf.sqrt(),
            q05: data.quantile(0.05),
            q25: data.quantile(0.25),
            median: data.quantile(0.5),
            q75: data.quantile(0.75),
            q95: data.quantile(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub sigma2_hat: Summary,
    pub alpha_hat: Summary,
    pub delta: Summary,
    pub sup_exceedance: Summary,
    pub sup_abs_zeta: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub r_eps: f64,
    pub alpha_oracle: f64,
    pub rho: f64,
    /// Mean Δ divided by `r_eps`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: usize,
    pub alpha_max: f64,
    pub alpha_min: f64,
    pub d_alpha_max: f64,
    pub grid_points: usize,
    pub aggregates: Aggregates,
    pub oracle: Option<OracleSummary>,
    pub records: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub levels: Vec<LevelResult>,
    /// Least-squares slope of `log E Δ` on `log n` across the ladder.
    pub rate_fit: Option<RateFit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaExceedance {
    pub replicates: usize,
    pub epsilon: f64,
    pub d_alpha_max: f64,
    pub mean_exceedance: f64,
    pub se_exceedance: f64,
    pub mean_sup_abs_zeta: f64,
    /// `mean_exceedance / (ε⁻¹ √D(α_max))`.
    pub normalized_ratio: f64,
}

/// Worker pool sized by `threads`, else the available cores; the
/// `NOISE_FLOOR_THREADS` environment variable caps either.
pub fn worker_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut count = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Ok(cap) = std::env::var("NOISE_FLOOR_THREADS") {
        let cap: usize = cap
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("NOISE_FLOOR_THREADS must be a positive integer, got '{cap}'")))?;
        if cap == 0 {
            return Err(Error::Config("NOISE_FLOOR_THREADS must be >= 1".into()));
        }
        count = count.min(cap);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(count.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draws by the inverse-CDF transform of open-interval uniforms.
pub fn gaussian_vector(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let normal = Normal::standard();
    (0..len)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            normal.inverse_cdf(u)
        })
        .collect()
}

/// `G_α(λ_k)` for every grid point, row-major by grid index.
fn g_table(family: &Regularizer, grid: &AlphaGrid, eigenvalues: &[f64]) -> Vec<Vec<f64>> {
    grid.alphas()
        .iter()
        .map(|&a| eigenvalues.iter().map(|&l| g(family.h(a, l))).collect())
        .collect()
}

/// `(sup_k [|ζ(α_k)| − V(α_k)]_+, sup_k |ζ(α_k)|)` for rotated noise `xi`.
fn zeta_sup(g_rows: &[Vec<f64>], v: &[f64], xi: &[f64]) -> (f64, f64) {
    let centered: Vec<f64> = xi.iter().map(|x| 1.0 - x * x).collect();
    let mut exceed: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for (row, &vk) in g_rows.iter().zip(v) {
        let zeta: f64 = row.iter().zip(&centered).map(|(g, c)| g * c).sum();
        sup = sup.max(zeta.abs());
        exceed = exceed.max(zeta.abs() - vk);
    }
    (exceed.max(0.0), sup)
}

/// Expected sup-exceedance of `|ζ|` over the envelope on a fixed grid.
pub fn simulate_zeta_exceedance(
    eigenvalues: &[f64],
    family: &Regularizer,
    grid: &AlphaGrid,
    replicates: usize,
    seed: u64,
    force: bool,
    threads: Option<usize>,
) -> Result<ZetaExceedance> {
    if replicates == 0 {
        return Err(Error::Config("replicates must be >= 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty grid".into()));
    }
    if grid.d_alpha_max() < MIN_D_ALPHA_MAX && !force {
        return Err(Error::Config(format!(
            "D(alpha_max) = {} < {MIN_D_ALPHA_MAX}; pass force to simulate anyway",
            grid.d_alpha_max()
        )));
    }
    let rows = g_table(family, grid, eigenvalues);
    let v = grid.v_values();
    let pool = worker_pool(threads)?;
    let draws: Vec<(f64, f64)> = pool.install(|| {
        (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(seed, r);
                let xi = gaussian_vector(&mut rng, eigenvalues.len());
                zeta_sup(&rows, v, &xi)
            })
            .collect()
    });
    let exceed: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let sups: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let ex = Summary::of(&exceed);
    let mean_sup = Summary::of(&sups).mean;
    Ok(ZetaExceedance {
        replicates,
        epsilon: grid.epsilon(),
        d_alpha_max: grid.d_alpha_max(),
        mean_exceedance: ex.mean,
        se_exceedance: ex.se,
        mean_sup_abs_zeta: mean_sup,
        normalized_ratio: ex.mean * grid.epsilon() / grid.d_alpha_max().sqrt(),
    })
}

/// Synthetic design `X_ij = z_ij/(j + 1)` with iid standard normal `z`.
pub fn synthetic_design(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, DESIGN_STREAM);
    let z = gaussian_vector(&mut rng, n * p);
    DMatrix::from_fn(n, p, |i, j| z[i * p + j] / (j + 1) as f64)
}

/// Everything fixed across replicates at one sample size.
struct Level {
    n: usize,
    eigenvalues: Vec<f64>,
    family: Regularizer,
    grid: AlphaGrid,
    g_rows: Vec<Vec<f64>>,
    kind: LevelKind,
    /// Noiseless spectral coordinates, when the signal is known.
    signal: Option<Vec<f64>>,
}

enum LevelKind {
    Linear { basis: SpectralBasis, mean: Vec<f64> },
    Spline { estimator: SplineNoiseEstimator, mean: Vec<f64> },
}

impl Level {
    fn build(config: &SimulationConfig, n: usize) -> Result<Self> {
        match &config.scenario {
            Scenario::PureNoise | Scenario::FixedBeta { .. } => {
                let x = synthetic_design(config.seed, n, config.p);
                let beta = match &config.scenario {
                    Scenario::FixedBeta { beta } => beta.clone(),
                    _ => vec![0.0; config.p],
                };
                let basis = SpectralBasis::decompose(&x, noise_floor_core::spectral::DEFAULT_RANK_TOLERANCE)?;
                let eigenvalues = basis.eigenvalues().to_vec();
                let family = config.family.bind(&eigenvalues)?;
                let grid = config.grid.build(&family, &eigenvalues, n)?;
                let mean = (&x * DVector::from_column_slice(&beta)).as_slice().to_vec();
                let signal = basis.signal_coordinates(&beta)?;
                let g_rows = g_table(&family, &grid, &eigenvalues);
                Ok(Self { n, eigenvalues, family, grid, g_rows, kind: LevelKind::Linear { basis, mean }, signal: Some(signal) })
            }
            Scenario::Sobolev { function, m } => {
                if config.family != FamilyKind::Tikhonov {
                    return Err(Error::Config("the spline scenario uses the tikhonov family".into()));
                }
                let design = uniform_design(n);
                let basis = demmler_reinsch(&design, *m)?;
                let mean: Vec<f64> = design.iter().map(|&x| function.eval(x)).collect();
                let scale = (n as f64).sqrt();
                let signal: Vec<f64> = basis.coefficients(&mean)?.iter().map(|c| c * scale).collect();
                let estimator = SplineNoiseEstimator::new(basis, &config.grid)?;
                let eigenvalues = estimator.lambdas().to_vec();
                let grid = estimator.grid().clone();
                let family = Regularizer::Tikhonov;
                let g_rows = g_table(&family, &grid, &eigenvalues);
                Ok(Self { n, eigenvalues, family, grid, g_rows, kind: LevelKind::Spline { estimator, mean }, signal: Some(signal) })
            }
        }
    }

    fn replicate(&self, config: &SimulationConfig, rng: &mut ChaCha20Rng) -> Result<ReplicateRecord> {
        let xi = gaussian_vector(rng, self.n);
        let sigma = config.sigma;
        let (model, rotated) = match &self.kind {
            LevelKind::Linear { basis, mean } => {
                let y: Vec<f64> = mean.iter().zip(&xi).map(|(m, e)| m + sigma * e).collect();
                (basis.project(&y)?, basis.rotate(&xi)?)
            }
            LevelKind::Spline { estimator, mean } => {
                let y: Vec<f64> = mean.iter().zip(&xi).map(|(m, e)| m + sigma * e).collect();
                let scale = (self.n as f64).sqrt();
                let rotated = estimator.basis().coefficients(&xi)?.iter().map(|c| c * scale).collect();
                (estimator.basis().spectral_model(&y)?, rotated)
            }
        };
        let (sigma2_hat, alpha_hat) = match config.fixed_alpha {
            Some(alpha) => (sigma2_alpha(&model, &self.family, alpha)?, alpha),
            None => {
                let report = select_alpha(&model, &self.family, &self.grid)?;
                (report.sigma2_hat, report.alpha_hat)
            }
        };
        let delta = delta_diagnostic(sigma2_hat, sigma, &xi)?;
        let (sup_exceedance, sup_abs_zeta) = zeta_sup(&self.g_rows, self.grid.v_values(), &rotated);
        Ok(ReplicateRecord { sigma2_hat, alpha_hat, delta, sup_exceedance, sup_abs_zeta })
    }
}

pub fn run_experiment(config: &SimulationConfig, threads: Option<usize>) -> Result<SimulationResult> {
    config.validate()?;
    let pool = worker_pool(threads)?;
    let mut levels = Vec::new();
    for (li, n) in config.sizes().into_iter().enumerate() {
        let level = Level::build(config, n)?;
        let records: Vec<ReplicateRecord> = pool.install(|| {
            (0..config.replicates as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream_rng(config.seed, ((li as u64) << 40) | r);
                    level.replicate(config, &mut rng)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        if let Some(bad) = records.iter().position(|r| {
            ![r.sigma2_hat, r.alpha_hat, r.delta, r.sup_exceedance, r.sup_abs_zeta].iter().all(|v| v.is_finite())
        }) {
            return Err(Error::Config(format!("replicate {bad} at n = {n} produced a non-finite value")));
        }
        let column = |f: fn(&ReplicateRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
        let aggregates = Aggregates {
            sigma2_hat: Summary::of(&column(|r| r.sigma2_hat)),
            alpha_hat: Summary::of(&column(|r| r.alpha_hat)),
            delta: Summary::of(&column(|r| r.delta)),
            sup_exceedance: Summary::of(&column(|r| r.sup_exceedance)),
            sup_abs_zeta: Summary::of(&column(|r| r.sup_abs_zeta)),
        };
        let oracle = level.signal.as_ref().and_then(|s| {
            oracle_quantities(s, &level.eigenvalues, n, &level.family, &level.grid, config.sigma)
                .ok()
                .map(|o| OracleSummary {
                    r_eps: o.r_eps,
                    alpha_oracle: o.alpha_oracle,
                    rho: o.rho,
                    gap: aggregates.delta.mean / o.r_eps,
                })
        });
        levels.push(LevelResult {
            n,
            alpha_max: level.grid.alpha_max(),
            alpha_min: level.grid.alpha_min(),
            d_alpha_max: level.grid.d_alpha_max(),
            grid_points: level.grid.len(),
            aggregates,
            oracle,
            records,
        });
    }
    let rate_fit = if levels.len() >= 2 {
        let xs: Vec<f64> = levels.iter().map(|l| (l.n as f64).ln()).collect();
        let ys: Vec<f64> = levels.iter().map(|l| l.aggregates.delta.mean.ln()).collect();
        Some(least_squares(&xs, &ys))
    } else {
        None
    };
    Ok(SimulationResult { config: config.clone(), levels, rate_fit })
}

/// Unweighted least-squares line `y ≈ intercept + exponent·x`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> RateFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let exponent = sxy / sxx;
    RateFit { exponent, intercept: my - exponent * mx }
}

/// Mean `Δ(σ̂²_α̂)` over `r_{A,ε}(β)` at the last ladder size.
pub fn oracle_gap(config: &SimulationConfig, threads: Option<usize>) -> Result<f64> {
    if matches!(config.scenario, Scenario::PureNoise) {
        return Err(Error::Config("oracle gap needs a known nonzero signal".into()));
    }
    let result = run_experiment(config, threads)?;
    let level = result.levels.last().expect("at least one level");
    level.oracle.map(|o| o.gap).ok_or_else(|| Error::Core(noise_floor_core::Error::DegenerateOracle))
}
