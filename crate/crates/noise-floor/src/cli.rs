//! Argument parsing and subcommand drivers.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use noise_floor_core::envelope::{AlphaGrid, GridSpec, GridWarning, DEFAULT_EPSILON};
use noise_floor_core::estimator::{select_alpha, EstimateWarning};
use noise_floor_core::spectral::{classical_unbiased, spectralize, DEFAULT_RANK_TOLERANCE};
use noise_floor_core::splines::{demmler_reinsch, uniform_design, SplineWarning};
use noise_floor_core::{EstimateReport, FamilyKind, LinearModelData, Regularizer, SplineNoiseEstimator};
use serde::{Deserialize, Serialize};

use crate::io::{read_matrix_csv, read_vector_csv};
use crate::montecarlo::{run_experiment, Scenario, SimulationConfig, SimulationResult, TestFunction};
use crate::report::{format_float, to_json_string, write_csv, write_report, Format, Tabular};

/// Noise-level estimation for linear models and smoothing splines.
#[derive(Parser, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[command(name = "noise-floor", version, about)]
pub struct CliConfig {
    /// Suppress the human-readable summary on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Estimate σ² from a design matrix and a response vector.
    Estimate(EstimateArgs),
    /// Estimate σ² with a smoothing spline on a one-dimensional design.
    Spline(SplineArgs),
    /// Run a seeded Monte Carlo experiment.
    Simulate(SimulateArgs),
    /// Inspect the α grid and its envelope.
    Envelope {
        #[command(subcommand)]
        action: EnvelopeCommand,
    },
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeCommand {
    /// Print α, D(α), W(α), V_ε(α) and the simplified envelope per grid point.
    Dump(EnvelopeArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridArgs {
    /// Envelope slack ε in (0, 1].
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Smallest α on the grid [default: max(α_max·1e-8, smallest α with W(α) ≤ n/2)].
    #[arg(long)]
    pub alpha_min: Option<f64>,
    /// Largest α on the grid [default: largest α with D(α) ≥ 5].
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// Geometric D-ratio r between grid points [default: ε²/Q].
    #[arg(long)]
    pub grid_ratio: Option<f64>,
}

impl GridArgs {
    pub fn spec(&self) -> GridSpec {
        GridSpec { epsilon: self.epsilon, alpha_min: self.alpha_min, alpha_max: self.alpha_max, ratio: self.grid_ratio }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    s.parse().map_err(|_| format!("unknown family '{s}' (expected tikhonov, cutoff or landweber)"))
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("file not found: {s}"))
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateArgs {
    /// Design matrix CSV (n rows, p columns).
    #[arg(long, value_parser = existing_file)]
    pub x: PathBuf,
    /// Response CSV (one column of n values).
    #[arg(long, value_parser = existing_file)]
    pub y: PathBuf,
    /// Regularizer family: tikhonov, cutoff or landweber.
    #[arg(long, value_parser = parse_family, default_value = "tikhonov")]
    pub family: FamilyKind,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Eigenvalues below this fraction of the largest are treated as zero.
    #[arg(long, default_value_t = DEFAULT_RANK_TOLERANCE)]
    pub rank_tolerance: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineArgs {
    /// Two-column CSV of (x, y) pairs.
    #[arg(long, value_parser = existing_file, conflicts_with_all = ["x", "y"], required_unless_present = "y")]
    pub data: Option<PathBuf>,
    /// Design points CSV [default: uniform (i − 1/2)/n].
    #[arg(long, value_parser = existing_file, requires = "y")]
    pub x: Option<PathBuf>,
    /// Response CSV.
    #[arg(long, value_parser = existing_file)]
    pub y: Option<PathBuf>,
    /// Smoothness order m.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Include fitted values in the JSON report.
    #[arg(long)]
    pub fitted: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ScenarioKind {
    PureNoise,
    FixedBeta,
    Sobolev,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioKind,
    /// Sample size.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Number of regressors (linear scenarios).
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated coefficients for fixed_beta (length p) [default: all ones].
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    /// Regression function for sobolev: sin2pi or bump.
    #[arg(long, default_value = "sin2pi")]
    pub function: TestFunction,
    /// Smoothness order for sobolev.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Comma-separated sample sizes to sweep; fits the Δ rate when given.
    #[arg(long, value_delimiter = ',')]
    pub n_ladder: Option<Vec<usize>>,
    /// Evaluate σ̂² at this α instead of selecting it.
    #[arg(long)]
    pub fixed_alpha: Option<f64>,
    #[arg(long, value_parser = parse_family, default_value = "tikhonov")]
    pub family: FamilyKind,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Worker threads [default: all cores; NOISE_FLOOR_THREADS caps it].
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write one CSV row per replicate to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn simulation_config(&self) -> SimulationConfig {
        let scenario = match self.scenario {
            ScenarioKind::PureNoise => Scenario::PureNoise,
            ScenarioKind::FixedBeta => Scenario::FixedBeta { beta: self.beta.clone().unwrap_or_else(|| vec![1.0; self.p]) },
            ScenarioKind::Sobolev => Scenario::Sobolev { function: self.function, m: self.m },
        };
        SimulationConfig {
            scenario,
            n: self.n,
            p: self.p,
            sigma: self.sigma,
            family: self.family,
            grid: self.grid.spec(),
            replicates: self.replicates,
            seed: self.seed,
            fixed_alpha: self.fixed_alpha,
            n_ladder: self.n_ladder.clone().unwrap_or_default(),
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeArgs {
    /// CSV of eigenvalues (one column).
    #[arg(long, value_parser = existing_file, required_unless_present = "spline_n")]
    pub eigenvalues: Option<PathBuf>,
    /// Use the spline spectrum of this many uniform design points instead.
    #[arg(long, conflicts_with = "eigenvalues")]
    pub spline_n: Option<usize>,
    /// Smoothness order for --spline-n.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Sample size for the automatic α_min [default: number of eigenvalues].
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_family, default_value = "tikhonov")]
    pub family: FamilyKind,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Any warning that can appear in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Warning {
    Grid(GridWarning),
    Estimate(EstimateWarning),
    Spline(SplineWarning),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub alpha: f64,
    pub d: f64,
    pub w: f64,
    pub v: f64,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub alpha_max: f64,
    pub alpha_max_auto: bool,
    pub alpha_min: f64,
    pub alpha_min_auto: bool,
    pub ratio: f64,
    pub ratio_auto: bool,
    pub points: usize,
    pub clamped_points: usize,
}

impl GridSettings {
    fn new(grid: &AlphaGrid, spec: &GridSpec) -> Self {
        Self {
            alpha_max: grid.alpha_max(),
            alpha_max_auto: spec.alpha_max.is_none(),
            alpha_min: grid.alpha_min(),
            alpha_min_auto: spec.alpha_min.is_none(),
            ratio: grid.ratio(),
            ratio_auto: spec.ratio.is_none(),
            points: grid.len(),
            clamped_points: grid.clamped_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub p: usize,
    pub rank: usize,
    pub alpha_index: usize,
    pub w_alpha: f64,
    pub d_alpha: f64,
    pub q_alpha: f64,
    pub v_alpha: f64,
    pub trace_fraction: f64,
    pub d_alpha_max: f64,
    pub condition_a_constant: f64,
    /// `Σ_{k>p} Ȳ_k²/(n − p)` for linear models with n > p.
    pub classical_unbiased: Option<f64>,
    pub grid_settings: GridSettings,
    pub grid: Vec<GridRow>,
}

/// Report of the `estimate` and `spline` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub sigma2_hat: f64,
    pub alpha_hat: f64,
    pub epsilon: f64,
    pub family: FamilyKind,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<Warning>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fitted: Option<Vec<f64>>,
}

impl EstimateOutput {
    fn new(
        report: &EstimateReport,
        grid: &AlphaGrid,
        spec: &GridSpec,
        family: FamilyKind,
        shape: (usize, usize, usize),
        classical: Option<f64>,
    ) -> Self {
        let (n, p, rank) = shape;
        let rows = (0..grid.len())
            .map(|i| GridRow {
                alpha: grid.alphas()[i],
                d: grid.d_values()[i],
                w: grid.w_values()[i],
                v: grid.v_values()[i],
                criterion: report.criterion_values[i],
            })
            .collect();
        let mut warnings: Vec<Warning> = grid.warnings().iter().cloned().map(Warning::Grid).collect();
        warnings.extend(report.warnings.iter().cloned().map(Warning::Estimate));
        Self {
            sigma2_hat: report.sigma2_hat,
            alpha_hat: report.alpha_hat,
            epsilon: grid.epsilon(),
            family,
            diagnostics: Diagnostics {
                n,
                p,
                rank,
                alpha_index: report.alpha_index,
                w_alpha: report.w_at_alpha_hat,
                d_alpha: report.d_at_alpha_hat,
                q_alpha: report.q_at_alpha_hat,
                v_alpha: report.v_at_alpha_hat,
                trace_fraction: report.w_at_alpha_hat / n as f64,
                d_alpha_max: grid.d_alpha_max(),
                condition_a_constant: report.condition_a_constant,
                classical_unbiased: classical,
                grid_settings: GridSettings::new(grid, spec),
                grid: rows,
            },
            warnings,
            fitted: None,
        }
    }
}

impl Tabular for EstimateOutput {
    fn header(&self) -> Vec<&'static str> {
        vec!["alpha", "d", "w", "v", "criterion"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.diagnostics
            .grid
            .iter()
            .map(|r| [r.alpha, r.d, r.w, r.v, r.criterion].iter().map(|&v| format_float(v)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub alpha: f64,
    pub d: f64,
    pub w: f64,
    pub v: f64,
    pub v_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeDump {
    pub family: FamilyKind,
    pub epsilon: f64,
    pub d_alpha_max: f64,
    pub grid_settings: GridSettings,
    pub warnings: Vec<Warning>,
    pub points: Vec<EnvelopePoint>,
}

impl Tabular for EnvelopeDump {
    fn header(&self) -> Vec<&'static str> {
        vec!["alpha", "d", "w", "v", "v_tilde"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.points.iter().map(|p| [p.alpha, p.d, p.w, p.v, p.v_tilde].iter().map(|&v| format_float(v)).collect()).collect()
    }
}

impl Tabular for SimulationResult {
    fn header(&self) -> Vec<&'static str> {
        vec!["n", "replicate", "sigma2_hat", "alpha_hat", "delta", "sup_exceedance", "sup_abs_zeta"]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.levels
            .iter()
            .flat_map(|level| {
                level.records.iter().enumerate().map(move |(i, r)| {
                    let mut row = vec![level.n.to_string(), i.to_string()];
                    row.extend([r.sigma2_hat, r.alpha_hat, r.delta, r.sup_exceedance, r.sup_abs_zeta].iter().map(|&v| format_float(v)));
                    row
                })
            })
            .collect()
    }
}

fn emit<T: Serialize + Tabular>(value: &T, output: &OutputArgs) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => write_report(value, path, output.format)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match output.format {
                Format::Json => lock.write_all(to_json_string(value)?.as_bytes())?,
                Format::Csv => write_csv(value, &mut lock)?,
            }
        }
    }
    Ok(())
}

fn summarize_estimate(out: &EstimateOutput) {
    eprintln!("sigma2_hat   {:.6e}", out.sigma2_hat);
    eprintln!("alpha_hat    {:.6e}  (grid point {} of {})", out.alpha_hat, out.diagnostics.alpha_index + 1, out.diagnostics.grid.len());
    eprintln!("W/n          {:.4}", out.diagnostics.trace_fraction);
    eprintln!("V_eps        {:.4}", out.diagnostics.v_alpha);
    for w in &out.warnings {
        eprintln!("warning: {}", serde_json::to_string(w).unwrap_or_default());
    }
}

pub fn run_estimate(args: &EstimateArgs) -> anyhow::Result<EstimateOutput> {
    let x = read_matrix_csv(&args.x)?;
    let y = read_vector_csv(&args.y)?;
    if y.len() != x.nrows() {
        bail!("X has {} rows but y has {} values", x.nrows(), y.len());
    }
    let data = LinearModelData::new(x, DVector::from_vec(y))?;
    let model = spectralize(&data, args.rank_tolerance)?;
    let family = args.family.bind(model.eigenvalues())?;
    let spec = args.grid.spec();
    let grid = spec.build(&family, model.eigenvalues(), model.n()).context("building the alpha grid")?;
    let report = select_alpha(&model, &family, &grid)?;
    let classical = classical_unbiased(&model).ok();
    Ok(EstimateOutput::new(&report, &grid, &spec, args.family, (model.n(), model.p(), model.rank()), classical))
}

pub fn run_spline(args: &SplineArgs) -> anyhow::Result<EstimateOutput> {
    let (design, y) = match (&args.data, &args.x, &args.y) {
        (Some(path), _, _) => {
            let m = read_matrix_csv(path)?;
            if m.ncols() != 2 {
                bail!("{}: expected two columns (x, y), got {}", path.display(), m.ncols());
            }
            (m.column(0).iter().copied().collect::<Vec<_>>(), m.column(1).iter().copied().collect::<Vec<_>>())
        }
        (None, Some(xp), Some(yp)) => (read_vector_csv(xp)?, read_vector_csv(yp)?),
        (None, None, Some(yp)) => {
            let y = read_vector_csv(yp)?;
            (uniform_design(y.len()), y)
        }
        _ => bail!("provide --data, or --y with optional --x"),
    };
    if design.len() != y.len() {
        bail!("design has {} points but y has {} values", design.len(), y.len());
    }
    // Sort by design point; the basis requires increasing x.
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| design[a].total_cmp(&design[b]));
    let xs: Vec<f64> = order.iter().map(|&i| design[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let basis = demmler_reinsch(&xs, args.m)?;
    let spline_warnings: Vec<Warning> = basis.warnings().iter().cloned().map(Warning::Spline).collect();
    let spec = args.grid.spec();
    let estimator = SplineNoiseEstimator::new(basis, &spec).context("building the alpha grid")?;
    let fit = estimator.estimate(&ys)?;
    let n = ys.len();
    let mut out = EstimateOutput::new(&fit.estimate, estimator.grid(), &spec, FamilyKind::Tikhonov, (n, n, n - args.m), None);
    out.warnings.extend(spline_warnings);
    if args.fitted {
        // Back to input order.
        let mut fitted = vec![0.0; n];
        for (k, &i) in order.iter().enumerate() {
            fitted[i] = fit.fitted[k];
        }
        out.fitted = Some(fitted);
    }
    Ok(out)
}

pub fn run_envelope(args: &EnvelopeArgs) -> anyhow::Result<EnvelopeDump> {
    let eigenvalues = match (&args.eigenvalues, args.spline_n) {
        (Some(path), _) => {
            let mut l = read_vector_csv(path)?;
            l.sort_by(|a, b| b.total_cmp(a));
            l
        }
        (None, Some(n)) => demmler_reinsch(&uniform_design(n), args.m)?.lambdas(),
        _ => bail!("provide --eigenvalues or --spline-n"),
    };
    let n = args.n.or(args.spline_n).unwrap_or(eigenvalues.len());
    let family: Regularizer = args.family.bind(&eigenvalues)?;
    let spec = args.grid.spec();
    let grid = spec.build(&family, &eigenvalues, n)?;
    let tilde = grid.v_tilde_values();
    let points = (0..grid.len())
        .map(|i| EnvelopePoint {
            alpha: grid.alphas()[i],
            d: grid.d_values()[i],
            w: grid.w_values()[i],
            v: grid.v_values()[i],
            v_tilde: tilde[i],
        })
        .collect();
    Ok(EnvelopeDump {
        family: args.family,
        epsilon: grid.epsilon(),
        d_alpha_max: grid.d_alpha_max(),
        grid_settings: GridSettings::new(&grid, &spec),
        warnings: grid.warnings().iter().cloned().map(Warning::Grid).collect(),
        points,
    })
}

fn summarize_simulation(result: &SimulationResult) {
    eprintln!(
        "{:>7} {:>14} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "n", "mean sigma2", "se", "mean delta", "exceedance", "sup|zeta|", "gap"
    );
    for l in &result.levels {
        let a = &l.aggregates;
        let gap = l.oracle.map_or("-".to_string(), |o| format!("{:.3}", o.gap));
        eprintln!(
            "{:>7} {:>14.6} {:>12.3e} {:>12.4} {:>12.4} {:>12.4} {:>10}",
            l.n, a.sigma2_hat.mean, a.sigma2_hat.se, a.delta.mean, a.sup_exceedance.mean, a.sup_abs_zeta.mean, gap
        );
    }
    if let Some(fit) = result.rate_fit {
        eprintln!("rate exponent of E delta vs n: {:.4}", fit.exponent);
    }
}

pub fn run_simulate(args: &SimulateArgs) -> anyhow::Result<SimulationResult> {
    let config = args.simulation_config();
    Ok(run_experiment(&config, args.threads)?)
}

fn write_simulation(result: &SimulationResult, args: &SimulateArgs) -> anyhow::Result<()> {
    let out = OutputArgs { out: args.out.clone(), format: Format::Json };
    emit(result, &out)?;
    if let Some(path) = &args.csv {
        write_report(result, path, Format::Csv)?;
    }
    Ok(())
}

pub fn run(config: &CliConfig) -> anyhow::Result<()> {
    match &config.command {
        Command::Estimate(args) => {
            let out = run_estimate(args)?;
            if !config.quiet {
                summarize_estimate(&out);
            }
            emit(&out, &args.output)
        }
        Command::Spline(args) => {
            let out = run_spline(args)?;
            if !config.quiet {
                summarize_estimate(&out);
            }
            emit(&out, &args.output)
        }
        Command::Simulate(args) => {
            let result = run_simulate(args)?;
            if !config.quiet {
                summarize_simulation(&result);
            }
            write_simulation(&result, args)
        }
        Command::Envelope { action: EnvelopeCommand::Dump(args) } => {
            let dump = run_envelope(args)?;
            emit(&dump, &args.output)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<CliConfig, clap::Error> {
        CliConfig::try_parse_from(std::iter::once("noise-floor").chain(args.iter().copied()))
    }

    #[test]
    fn verify_command_definition() {
        use clap::CommandFactory;
        CliConfig::command().debug_assert();
    }

    #[test]
    fn unknown_family_is_a_usage_error() {
        let err = parse(&["simulate", "--scenario", "pure_noise", "--family", "banana"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn simulate_config_round_trips() {
        let cfg = parse(&["simulate", "--scenario", "pure_noise", "--n", "200", "--p", "50", "--seed", "42"]).unwrap();
        let text = to_json_string(&cfg).unwrap();
        let back: CliConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let Command::Simulate(args) = &cfg.command else { panic!("wrong subcommand") };
        assert_eq!(args.grid.epsilon, 0.5);
        assert_eq!(args.family, FamilyKind::Tikhonov);
    }

    #[test]
    fn missing_file_is_rejected() {
        let err = parse(&["estimate", "--x", "/nonexistent/X.csv", "--y", "/nonexistent/y.csv"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
