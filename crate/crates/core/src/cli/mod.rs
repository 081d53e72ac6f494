//! Command-line surface: `fit` and `infer` on a CSV file, `simulate` and
//! `phase` for Monte-Carlo experiments.
//!
//! Every failure is reported as `<module>: <message>` followed by a hint.

mod report;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use report::{
    matrix_of, rows_of, vec_of, ContrastReport, CovarianceRows, Diagnostic, EstimateReport, Interval, Rows,
};

use crate::bandwidth::{BandwidthParams, BandwidthSpec};
use crate::dataio::{bin_domains, load_csv, minmax_scale, sigma_filter, split_target};
use crate::design::DomainSample;
use crate::error::DvcmError;
use crate::estimators::{fit_dvcm, fit_target_only};
use crate::family::Family;
use crate::inference::{confidence_intervals, contrast_test, standard_errors, wald_test};
use crate::penalty::PenaltyOptions;
use crate::pipeline::{fit_transfer, TransferSettings};
use crate::simulation::{
    phase_sweep, run_bandwidth_grid, write_grid_csv, write_phase_csv, GridRow, PenaltyChoice, PhaseResult,
    SimConfig, VaryParam,
};

/// An error tagged with the module that raised it.
#[derive(Debug)]
pub struct CliError {
    pub module: &'static str,
    pub error: DvcmError,
}

impl CliError {
    pub fn hint(&self) -> &'static str {
        match &self.error {
            DvcmError::Schema(_) => "check the column flags against the CSV header",
            DvcmError::Parse { .. } => "every used cell must be a finite number; missing values are not imputed",
            DvcmError::EmptyWindow { .. } => "widen --bandwidth or choose a u0 with nearby source domains",
            DvcmError::Singular { .. } => "use fewer covariates, a lower --order or a wider --bandwidth",
            DvcmError::DegenerateVariance(_) => "the target responses carry no variation to calibrate the penalty",
            DvcmError::DegenerateScale(_) => "the domain identifier must take at least two distinct values",
            DvcmError::Config(_) => "fix the configuration file or flag named above",
            DvcmError::Experiment { .. } => "inspect the first error; a wider bandwidth grid often helps",
            DvcmError::NotConverged { .. } => "the likelihood may be separable; try a wider --bandwidth",
            DvcmError::Io(_) => "check that the path exists and is writable",
            DvcmError::Domain(_) | DvcmError::Argument(_) => "see `dvcm <command> --help` for valid values",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}\n  hint: {}", self.module, self.error, self.hint())
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn in_module(module: &'static str) -> impl Fn(DvcmError) -> CliError {
    move |error| CliError { module, error }
}

/// Module responsible for an error raised inside the estimation pipeline.
fn pipeline_module(error: DvcmError) -> CliError {
    let module = match &error {
        DvcmError::EmptyWindow { .. } => "design",
        DvcmError::Singular { context, .. } if context.contains("MSE") => "penalty",
        DvcmError::DegenerateVariance(_) => "penalty",
        DvcmError::DegenerateScale(_) => "bandwidth",
        _ => "estimators",
    };
    CliError { module, error }
}

fn cli_arg(module: &'static str, msg: impl Into<String>) -> CliError {
    CliError {
        module,
        error: DvcmError::Argument(msg.into()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "dvcm", version, about = "Transfer learning for domain-varying coefficient models")]
pub struct Cli {
    /// Worker threads for simulations (falls back to DVCM_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the three estimators on a CSV file and write a JSON report.
    Fit(FitArgs),
    /// Monte-Carlo MSE of the three estimators over a bandwidth grid.
    Simulate(SimulateArgs),
    /// MSE of the fine-tuned estimator along a parameter sweep, with log-log slopes.
    Phase(PhaseArgs),
    /// Fit, then test a null value or a linear contrast.
    Infer(InferArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Column holding the domain identifier.
    #[arg(long, required_unless_present = "u_expr", conflicts_with = "u_expr")]
    pub u_col: Option<String>,
    /// Linear expression of columns giving the identifier, e.g. "age - education - 6".
    #[arg(long)]
    pub u_expr: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',', required = true)]
    pub x_cols: Vec<String>,
    #[arg(long)]
    pub y_col: String,
    /// Prepend a column of ones to the covariates.
    #[arg(long)]
    pub intercept: bool,
    /// Target domain, as a bin midpoint on the scaled identifier.
    #[arg(long)]
    pub u0: f64,
    #[arg(long, default_value = "gaussian")]
    pub family: Family,
    /// Local polynomial order.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Smoothness of the coefficient curves.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    /// auto, undersmooth or a positive number.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    /// Spread of the identifiers; estimated from the sources when absent.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub e0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    /// Penalty multiplier in (0.5, 2).
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Seed for the target split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target split fractions: pilot, fine-tuning and an optional held-out part.
    #[arg(long, default_value = "1/3,1/3,1/3")]
    pub split: String,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Outlier filter width on the identifier, in standard deviations.
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Comma-separated null value for the Wald test.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "contrast")]
    pub null_theta: Option<Vec<f64>>,
    /// Comma-separated contrast vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "zeta")]
    pub contrast: Option<Vec<f64>>,
    /// Hypothesized value of the contrast.
    #[arg(long, allow_hyphen_values = true)]
    pub zeta: Option<f64>,
}

/// Inline settings layered over a configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct SimOverrides {
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of source domains.
    #[arg(long = "k")]
    pub k: Option<usize>,
    #[arg(long)]
    pub n_bar: Option<usize>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SimOverrides {
    pub fn resolve(&self) -> Result<SimConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => SimConfig::from_path(path).map_err(in_module("simulation"))?,
            None => SimConfig::gaussian_default(),
        };
        if let Some(v) = self.family {
            cfg.family = v;
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.n_bar {
            cfg.n_bar = v;
        }
        if let Some(v) = self.n0 {
            cfg.n0 = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.reps {
            cfg.reps = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate().map_err(in_module("simulation"))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimOverrides,
    /// Comma-separated bandwidth grid, replacing the configured one.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

fn parse_penalty(s: &str) -> Result<PenaltyChoice, String> {
    match s {
        "estimated" => Ok(PenaltyChoice::Estimated),
        "oracle" => Ok(PenaltyChoice::Oracle),
        "zero" => Ok(PenaltyChoice::Zero),
        "infinite" => Ok(PenaltyChoice::Infinite),
        other => Err(format!("expected estimated, oracle, zero or infinite; got `{other}`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct PhaseArgs {
    #[command(flatten)]
    pub sim: SimOverrides,
    /// Parameter to sweep: K, gamma or n.
    #[arg(long)]
    pub vary: VaryParam,
    /// Comma-separated sweep values, increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    /// Number of log-log segments to fit.
    #[arg(long, default_value_t = 3)]
    pub segments: usize,
    /// Shrinkage used by the fine-tuned estimator.
    #[arg(long, default_value = "oracle", value_parser = parse_penalty)]
    pub penalty: PenaltyChoice,
}

/// Parses `a/b` or decimal fractions separated by commas.
pub fn parse_fractions(text: &str) -> Result<Vec<f64>, DvcmError> {
    text.split(',')
        .map(|part| {
            let part = part.trim();
            let bad = || DvcmError::Argument(format!("cannot parse split fraction `{part}`"));
            match part.split_once('/') {
                Some((a, b)) => {
                    let a: f64 = a.trim().parse().map_err(|_| bad())?;
                    let b: f64 = b.trim().parse().map_err(|_| bad())?;
                    Ok(a / b)
                }
                None => part.parse().map_err(|_| bad()),
            }
        })
        .collect()
}

fn write_output(out: Option<&Path>, body: &[u8]) -> Result<(), CliError> {
    let io = in_module("cli");
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(|e| io(e.into()))?);
            f.write_all(body).map_err(|e| io(e.into()))?;
            f.flush().map_err(|e| io(e.into()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body).map_err(|e| io(e.into()))
        }
    }
}

/// Loads, filters, scales and bins the data; returns the target and sources.
fn prepare_panel(args: &FitArgs) -> Result<(DomainSample, Vec<DomainSample>), CliError> {
    let io = in_module("dataio");
    let u_spec = args
        .u_col
        .as_deref()
        .or(args.u_expr.as_deref())
        .ok_or_else(|| cli_arg("dataio", "one of --u-col or --u-expr is required"))?;
    let table = load_csv(&args.data, u_spec, &args.x_cols, &args.y_col, args.intercept).map_err(&io)?;
    let mask = sigma_filter(&table.u(), args.sigma).map_err(&io)?;
    let table = table.filter_rows(&mask).map_err(&io)?;
    let scaled = minmax_scale(&table.u()).map_err(&io)?;
    let table = table.with_u(&scaled).map_err(&io)?;
    let panel = bin_domains(&table, args.bins).map_err(&io)?;
    let (target, sources) = panel.split_target_domain(args.u0).map_err(&io)?;
    if sources.is_empty() {
        return Err(cli_arg("dataio", "the data hold no source domain besides the target"));
    }
    Ok((target, sources))
}

fn settings(args: &FitArgs, bandwidth: BandwidthSpec) -> TransferSettings {
    TransferSettings {
        family: args.family,
        order: args.order,
        bandwidth,
        bandwidth_params: BandwidthParams {
            beta: args.beta,
            gamma: args.gamma,
            e0: args.e0,
            c: args.c,
            epsilon: args.epsilon,
        },
        penalty: PenaltyOptions {
            delta: args.delta,
            ..PenaltyOptions::default()
        },
        ..TransferSettings::default()
    }
}

fn check_fit_args(args: &FitArgs) -> Result<(BandwidthSpec, Vec<f64>), CliError> {
    let bandwidth: BandwidthSpec = args.bandwidth.parse().map_err(in_module("bandwidth"))?;
    if !(args.delta > 0.5 && args.delta < 2.0) {
        return Err(cli_arg("penalty", format!("--delta must lie in (0.5, 2), got {}", args.delta)));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(cli_arg("inference", format!("--level must lie in (0, 1), got {}", args.level)));
    }
    if !(args.beta > 0.0) {
        return Err(cli_arg("bandwidth", format!("--beta must be positive, got {}", args.beta)));
    }
    let fractions = parse_fractions(&args.split).map_err(in_module("dataio"))?;
    if !(2..=3).contains(&fractions.len()) {
        return Err(cli_arg(
            "dataio",
            "--split takes two or three fractions: pilot, fine-tuning and optionally held-out",
        ));
    }
    Ok((bandwidth, fractions))
}

fn mean_loss(sample: &DomainSample, theta: &DVector<f64>, family: Family) -> f64 {
    let eta = &sample.x * theta;
    let total: f64 = eta
        .iter()
        .zip(sample.y.iter())
        .map(|(&e, &y)| family.loss_unchecked(e, y))
        .sum();
    total / sample.n() as f64
}

/// Runs the real-data pipeline and returns its report.
///
/// The target is split into pilot, fine-tuning and optional held-out parts.
/// The fine-tuned estimator pilots on sources plus the pilot part and
/// fine-tunes on the second part; the two comparison estimators use both
/// parts. A held-out part yields out-of-sample losses among the diagnostics.
pub fn cmd_fit(args: &FitArgs) -> Result<EstimateReport, CliError> {
    let (bandwidth, fractions) = check_fit_args(args)?;
    let (target, sources) = prepare_panel(args)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let parts = split_target(&target, &fractions, &mut rng).map_err(in_module("dataio"))?;
    let (d1, d2) = (&parts[0], &parts[1]);

    let fit = fit_transfer(&sources, d1, d2, args.u0, &settings(args, bandwidth)).map_err(pipeline_module)?;
    let h = fit.bandwidth.h;

    let both = DomainSample::concat(&[d1, d2]).map_err(in_module("design"))?;
    let theta_lr = fit_target_only(&both, args.family).map_err(pipeline_module)?;
    let mut all = vec![DomainSample { u: args.u0, ..both }];
    all.extend(sources.iter().cloned());
    let theta_dvcm = fit_dvcm(&all, args.u0, h, args.order, args.family)
        .map_err(pipeline_module)?
        .theta;

    let theta_tl = fit.theta_tl().clone();
    let sigma = &fit.covariance.sigma_tl;
    let ci = confidence_intervals(&theta_tl, sigma, args.level).map_err(in_module("inference"))?;

    let mut diagnostics: Vec<Diagnostic> = fit
        .diagnostics
        .iter()
        .map(|(k, v)| Diagnostic {
            key: k.clone(),
            value: v.clone(),
        })
        .collect();
    let mut note = |key: &str, value: String| {
        diagnostics.push(Diagnostic {
            key: key.into(),
            value,
        })
    };
    note("n_sources", sources.len().to_string());
    note("n_source_rows", sources.iter().map(DomainSample::n).sum::<usize>().to_string());
    note("n_target_rows", target.n().to_string());
    note(
        "split_sizes",
        parts.iter().map(|d| d.n().to_string()).collect::<Vec<_>>().join(","),
    );
    if let Some(test) = parts.get(2) {
        for (name, theta) in [("lr", &theta_lr), ("dvcm", &theta_dvcm), ("tl", &theta_tl)] {
            note(&format!("test_loss_{name}"), format!("{:e}", mean_loss(test, theta, args.family)));
        }
    }

    Ok(EstimateReport {
        u0: args.u0,
        family: args.family,
        theta_lr: vec_of(&theta_lr),
        theta_dvcm: vec_of(&theta_dvcm),
        theta_tl: vec_of(&theta_tl),
        q_hat: rows_of(&fit.q),
        bandwidth: fit.bandwidth.clone(),
        covariance: (&fit.covariance).into(),
        se: standard_errors(sigma),
        level: args.level,
        ci: ci.into_iter().map(|(lower, upper)| Interval { lower, upper }).collect(),
        diagnostics,
        wald: None,
        contrast: None,
    })
}

/// Fits, then appends a Wald test of `--null-theta` and/or a contrast test.
pub fn cmd_infer(args: &InferArgs) -> Result<EstimateReport, CliError> {
    let p_expected = args.fit.x_cols.len() + usize::from(args.fit.intercept);
    let check = |v: &[f64], what: &str| {
        if v.len() == p_expected {
            Ok(())
        } else {
            Err(cli_arg(
                "inference",
                format!("{what} has length {} but the model has {p_expected} coefficients", v.len()),
            ))
        }
    };
    if let Some(v) = &args.null_theta {
        check(v, "--null-theta")?;
    }
    if let Some(v) = &args.contrast {
        check(v, "--contrast")?;
    }
    if args.null_theta.is_none() && args.contrast.is_none() {
        return Err(cli_arg("inference", "give --null-theta or --contrast with --zeta"));
    }

    let mut report = cmd_fit(&args.fit)?;
    let theta = DVector::from_vec(report.theta_tl.clone());
    let sigma = matrix_of(&report.covariance.sigma_tl);
    let module = in_module("inference");
    if let Some(v) = &args.null_theta {
        report.wald = Some(wald_test(&theta, &sigma, &DVector::from_vec(v.clone())).map_err(&module)?);
    }
    if let Some(v) = &args.contrast {
        let zeta = args
            .zeta
            .ok_or_else(|| cli_arg("inference", "--contrast needs --zeta"))?;
        let test = contrast_test(&theta, &sigma, &DVector::from_vec(v.clone()), zeta).map_err(&module)?;
        report.contrast = Some(ContrastReport {
            contrast: v.clone(),
            zeta,
            test,
        });
    }
    Ok(report)
}

/// Runs the bandwidth-grid experiment and writes its CSV table.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<GridRow>, CliError> {
    let mut cfg = args.sim.resolve()?;
    if let Some(grid) = &args.grid {
        cfg.bandwidth_grid = grid.clone();
    }
    let rows = run_bandwidth_grid(&cfg).map_err(in_module("simulation"))?;
    let mut body = Vec::new();
    write_grid_csv(&rows, &mut body).map_err(in_module("simulation"))?;
    write_output(args.sim.out.as_deref(), &body)?;
    Ok(rows)
}

/// Runs a phase sweep and writes the MSE table and fitted slopes.
pub fn cmd_phase(args: &PhaseArgs) -> Result<PhaseResult, CliError> {
    if args.grid.len() < 2 * args.segments + 2 {
        return Err(cli_arg(
            "simulation",
            format!(
                "a grid of {} points cannot support {} segments; give at least {}",
                args.grid.len(),
                args.segments,
                2 * args.segments + 2
            ),
        ));
    }
    let mut cfg = args.sim.resolve()?;
    cfg.penalty = args.penalty;
    let result = phase_sweep(&cfg, args.vary, &args.grid, args.segments).map_err(in_module("simulation"))?;
    let mut body = Vec::new();
    write_phase_csv(&result, &mut body).map_err(in_module("simulation"))?;
    write_output(args.sim.out.as_deref(), &body)?;
    Ok(result)
}

/// Sizes the global worker pool from `--threads` or `DVCM_THREADS`.
pub fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let threads = match threads {
        Some(t) => Some(t),
        None => match std::env::var("DVCM_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| cli_arg("cli", format!("DVCM_THREADS must be a positive integer, got `{v}`")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(cli_arg("cli", "--threads must be at least 1"));
        }
        // a pool built earlier in the process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    match &cli.command {
        Command::Fit(args) => {
            let report = cmd_fit(args)?;
            emit_report(&report, args.out.as_deref())
        }
        Command::Infer(args) => {
            let report = cmd_infer(args)?;
            emit_report(&report, args.fit.out.as_deref())
        }
        Command::Simulate(args) => cmd_simulate(args).map(|_| ()),
        Command::Phase(args) => cmd_phase(args).map(|_| ()),
    }
}

fn emit_report(report: &EstimateReport, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = report
        .to_json()
        .map_err(|e| cli_arg("cli", format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_output(out, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        let f = parse_fractions("1/3,1/3,1/3").unwrap();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(parse_fractions("0.5, 0.5").unwrap(), vec![0.5, 0.5]);
        assert!(parse_fractions("a/3").is_err());
    }

    #[test]
    fn argument_parsing() {
        let cli = Cli::try_parse_from([
            "dvcm", "fit", "--data", "x.csv", "--u-col", "u", "--x-cols", "a,b", "--y-col", "y", "--u0", "0.25",
        ])
        .unwrap();
        let Command::Fit(args) = cli.command else { panic!() };
        assert_eq!(args.x_cols, vec!["a", "b"]);
        assert_eq!(args.family, Family::Gaussian);

        assert!(Cli::try_parse_from(["dvcm", "fit", "--data", "x.csv", "--x-cols", "a", "--y-col", "y", "--u0", "0"])
            .is_err());
        let cli = Cli::try_parse_from([
            "dvcm", "infer", "--data", "x.csv", "--u-col", "u", "--x-cols", "a", "--y-col", "y", "--u0", "0.25",
            "--null-theta", "-1.5,2e-3",
        ])
        .unwrap();
        let Command::Infer(args) = cli.command else { panic!() };
        assert_eq!(args.null_theta, Some(vec![-1.5, 2e-3]));

        let cli = Cli::try_parse_from(["dvcm", "phase", "--vary", "K", "--grid", "2,4,8"]).unwrap();
        let Command::Phase(args) = cli.command else { panic!() };
        assert_eq!(args.penalty, PenaltyChoice::Oracle);
    }

    #[test]
    fn zero_bandwidth_rejected_before_reading_data() {
        let cli = Cli::try_parse_from([
            "dvcm", "fit", "--data", "/nonexistent.csv", "--u-col", "u", "--x-cols", "a", "--y-col", "y", "--u0",
            "0.25", "--bandwidth", "0",
        ])
        .unwrap();
        let Command::Fit(args) = cli.command else { panic!() };
        let err = cmd_fit(&args).unwrap_err();
        assert_eq!(err.module, "bandwidth");
        assert!(matches!(err.error, DvcmError::Argument(_)));
        assert!(err.to_string().starts_with("bandwidth: "));
    }

    #[test]
    fn short_phase_grid_rejected() {
        let cli = Cli::try_parse_from(["dvcm", "phase", "--vary", "K", "--grid", "5"]).unwrap();
        let Command::Phase(args) = cli.command else { panic!() };
        assert!(matches!(cmd_phase(&args).unwrap_err().error, DvcmError::Argument(_)));
    }
}
