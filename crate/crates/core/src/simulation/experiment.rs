use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PenaltyChoice, SimConfig};
use super::dgp::{generate_dataset, true_theta, ORACLE_STREAM_OFFSET};
use crate::bandwidth::{resolve_bandwidth, BandwidthParams, BandwidthSpec};
use crate::error::{DvcmError, Result};
use crate::estimators::fit_dvcm;
use crate::family::Family;
use crate::inference::{confidence_intervals, wald_test};
use crate::linalg::spd_inverse;
use crate::penalty::PenaltyOptions;
use crate::pipeline::{fit_transfer, PenaltyMode, TransferSettings};

/// Share of failed replications above which an experiment is rejected.
const MAX_FAILURE_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Lr,
    Dvcm,
    Tl,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Lr, Estimator::Dvcm, Estimator::Tl];
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Lr => "lr",
            Estimator::Dvcm => "dvcm",
            Estimator::Tl => "tl",
        })
    }
}

/// The three estimates from one replication.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub h: f64,
    pub truth: DVector<f64>,
    pub lr: DVector<f64>,
    pub dvcm: DVector<f64>,
    pub tl: DVector<f64>,
    pub sigma_tl: DMatrix<f64>,
}

impl RepOutcome {
    pub fn estimate(&self, which: Estimator) -> &DVector<f64> {
        match which {
            Estimator::Lr => &self.lr,
            Estimator::Dvcm => &self.dvcm,
            Estimator::Tl => &self.tl,
        }
    }

    pub fn squared_error(&self, which: Estimator) -> f64 {
        (self.estimate(which) - &self.truth).norm_squared()
    }
}

/// All replications of one experiment, in replication order.
#[derive(Debug, Clone)]
pub struct PairedRun {
    pub outcomes: Vec<Option<RepOutcome>>,
    pub first_error: Option<String>,
}

impl PairedRun {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_none()).count()
    }

    pub fn successes(&self) -> impl Iterator<Item = &RepOutcome> {
        self.outcomes.iter().flatten()
    }

    pub fn check(&self) -> Result<()> {
        let failed = self.failures();
        let total = self.outcomes.len();
        if failed as f64 > MAX_FAILURE_SHARE * total as f64 || failed == total {
            return Err(DvcmError::Experiment {
                failed,
                total,
                first_error: self.first_error.clone().unwrap_or_default(),
            });
        }
        Ok(())
    }
}

/// Monte-Carlo mean squared error with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseSummary {
    pub estimator: Estimator,
    pub mse: f64,
    pub se: f64,
    pub successes: usize,
    pub failures: usize,
}

/// Pipeline settings for an experiment with the given bandwidth and penalty.
pub fn transfer_settings(cfg: &SimConfig, bandwidth: BandwidthSpec, mode: PenaltyMode) -> TransferSettings {
    TransferSettings {
        family: cfg.family,
        order: cfg.order,
        bandwidth,
        bandwidth_params: BandwidthParams {
            beta: cfg.beta,
            gamma: Some(cfg.gamma),
            e0: cfg.e0,
            c: cfg.c,
            epsilon: cfg.epsilon,
        },
        penalty: PenaltyOptions {
            delta: cfg.delta,
            ..PenaltyOptions::default()
        },
        penalty_mode: mode,
        newton: Default::default(),
    }
}

/// Runs the transfer pipeline on replication `rep`.
pub fn run_replication(
    cfg: &SimConfig,
    rep: u64,
    bandwidth: BandwidthSpec,
    mode: &PenaltyMode,
) -> Result<RepOutcome> {
    let data = generate_dataset(cfg, rep);
    let (pilot, fine) = data.target_halves();
    let settings = transfer_settings(cfg, bandwidth, mode.clone());
    let fit = fit_transfer(&data.sources, &pilot, &fine, cfg.u0, &settings)?;
    Ok(RepOutcome {
        h: fit.bandwidth.h,
        truth: true_theta(cfg.theta_spec, cfg.p, cfg.u0),
        lr: fit.theta_lr.clone(),
        dvcm: fit.pilot.theta.clone(),
        tl: fit.tl.theta_tl.clone(),
        sigma_tl: fit.covariance.sigma_tl,
    })
}

fn noise_scale(cfg: &SimConfig) -> f64 {
    match cfg.family {
        Family::Gaussian => cfg.noise_sd * cfg.noise_sd,
        Family::Logistic | Family::Poisson => 1.0,
    }
}

/// Oracle penalty `delta sigma^2 / n0 M^{-1}`, with `M` the pilot MSE matrix
/// estimated from `cfg.oracle_reps` independent pre-pass replications.
pub fn oracle_penalty(cfg: &SimConfig, bandwidth: BandwidthSpec) -> Result<DMatrix<f64>> {
    let settings = transfer_settings(cfg, bandwidth, PenaltyMode::Zero);
    let truth = true_theta(cfg.theta_spec, cfg.p, cfg.u0);
    let errors: Vec<Result<DVector<f64>>> = (0..cfg.oracle_reps as u64)
        .into_par_iter()
        .map(|r| {
            let data = generate_dataset(cfg, ORACLE_STREAM_OFFSET + r);
            let (pilot, _) = data.target_halves();
            let mut domains = vec![pilot];
            domains.extend(data.sources);
            let bw = resolve_bandwidth(settings.bandwidth, &domains, cfg.u0, &settings.bandwidth_params)?;
            let fit = fit_dvcm(&domains, cfg.u0, bw.h, cfg.order, cfg.family)?;
            Ok(fit.theta - &truth)
        })
        .collect();
    let mut m = DMatrix::zeros(cfg.p, cfg.p);
    let mut ok = 0usize;
    let mut first_error = None;
    for e in &errors {
        match e {
            Ok(e) => {
                m += e * e.transpose();
                ok += 1;
            }
            Err(err) => {
                first_error.get_or_insert_with(|| err.to_string());
            }
        }
    }
    let failed = errors.len() - ok;
    if failed as f64 > MAX_FAILURE_SHARE * errors.len() as f64 || ok == 0 {
        return Err(DvcmError::Experiment {
            failed,
            total: errors.len(),
            first_error: first_error.unwrap_or_default(),
        });
    }
    m /= ok as f64;
    let inv = spd_inverse(&m, "oracle pilot MSE matrix")?;
    Ok(inv * (cfg.delta * noise_scale(cfg) / cfg.n0 as f64))
}

/// Penalty mode implied by the experiment's penalty choice.
pub fn penalty_mode(cfg: &SimConfig, bandwidth: BandwidthSpec) -> Result<PenaltyMode> {
    Ok(match cfg.penalty {
        PenaltyChoice::Estimated => PenaltyMode::Estimated,
        PenaltyChoice::Zero => PenaltyMode::Zero,
        PenaltyChoice::Infinite => PenaltyMode::Infinite,
        PenaltyChoice::Oracle => PenaltyMode::Given(oracle_penalty(cfg, bandwidth)?),
    })
}

/// Runs all replications of `cfg`, computing the three estimators on shared data.
pub fn run_paired(cfg: &SimConfig, bandwidth: BandwidthSpec) -> Result<PairedRun> {
    cfg.validate()?;
    let mode = penalty_mode(cfg, bandwidth)?;
    run_paired_with(cfg, bandwidth, &mode)
}

pub fn run_paired_with(cfg: &SimConfig, bandwidth: BandwidthSpec, mode: &PenaltyMode) -> Result<PairedRun> {
    let results: Vec<Result<RepOutcome>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| run_replication(cfg, rep, bandwidth, mode))
        .collect();
    let mut first_error = None;
    let outcomes = results
        .into_iter()
        .map(|r| match r {
            Ok(o) => Some(o),
            Err(e) => {
                first_error.get_or_insert_with(|| e.to_string());
                None
            }
        })
        .collect();
    Ok(PairedRun { outcomes, first_error })
}

/// Mean squared error of one estimator over the successful replications.
pub fn summarize(run: &PairedRun, which: Estimator) -> Result<MseSummary> {
    run.check()?;
    let errs: Vec<f64> = run.successes().map(|o| o.squared_error(which)).collect();
    let m = errs.len() as f64;
    let mse = errs.iter().sum::<f64>() / m;
    let var = if errs.len() > 1 {
        errs.iter().map(|e| (e - mse) * (e - mse)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(MseSummary {
        estimator: which,
        mse,
        se: (var / m).sqrt(),
        successes: errs.len(),
        failures: run.failures(),
    })
}

/// Monte-Carlo MSE of `which` at the fixed bandwidth `h`.
pub fn mc_mse(cfg: &SimConfig, which: Estimator, h: f64) -> Result<MseSummary> {
    let spec = BandwidthSpec::Fixed(h);
    summarize(&run_paired(cfg, spec)?, which)
}

/// One line of a results table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub x: f64,
    pub estimator: Estimator,
    pub mse: f64,
    pub se: f64,
    pub fail_count: usize,
}

/// MSE of all three estimators over the configured bandwidth grid.
///
/// An empty grid runs the configured bandwidth rule once and reports the
/// mean selected bandwidth as `x`.
pub fn run_bandwidth_grid(cfg: &SimConfig) -> Result<Vec<GridRow>> {
    cfg.validate()?;
    let specs: Vec<BandwidthSpec> = if cfg.bandwidth_grid.is_empty() {
        vec![cfg.bandwidth_rule.spec()]
    } else {
        cfg.bandwidth_grid.iter().map(|&h| BandwidthSpec::Fixed(h)).collect()
    };
    let mut rows = Vec::with_capacity(specs.len() * 3);
    for spec in specs {
        let run = run_paired(cfg, spec)?;
        run.check()?;
        let x = match spec {
            BandwidthSpec::Fixed(h) => h,
            _ => {
                let hs: Vec<f64> = run.successes().map(|o| o.h).collect();
                hs.iter().sum::<f64>() / hs.len() as f64
            }
        };
        for which in Estimator::ALL {
            let s = summarize(&run, which)?;
            rows.push(GridRow {
                x,
                estimator: which,
                mse: s.mse,
                se: s.se,
                fail_count: s.failures,
            });
        }
    }
    Ok(rows)
}

/// Writes a results table as CSV with 17 significant digits.
pub fn write_grid_csv<W: Write>(rows: &[GridRow], mut out: W) -> Result<()> {
    writeln!(out, "x,estimator,mse,se,fail_count")?;
    for r in rows {
        writeln!(out, "{:.16e},{},{:.16e},{:.16e},{}", r.x, r.estimator, r.mse, r.se, r.fail_count)?;
    }
    Ok(())
}

/// Standardized fine-tuned estimates `(theta_tl_j - theta_j) / se_j` under the undersmoothed rule.
#[derive(Debug, Clone)]
pub struct StandardizedDraws {
    /// One row per successful replication.
    pub values: DMatrix<f64>,
    pub failures: usize,
}

/// Standard errors below this multiple of `1 + |theta_j|` are rounding noise.
const MIN_RELATIVE_SE: f64 = 1e-10;

fn standardize(o: &RepOutcome) -> Option<Vec<f64>> {
    (0..o.tl.len())
        .map(|j| {
            let se = o.sigma_tl[(j, j)].max(0.0).sqrt();
            let z = (o.tl[j] - o.truth[j]) / se;
            (se > MIN_RELATIVE_SE * (1.0 + o.tl[j].abs()) && z.is_finite()).then_some(z)
        })
        .collect()
}

pub fn standardized_estimates(cfg: &SimConfig, reps: usize) -> Result<StandardizedDraws> {
    let cfg = SimConfig { reps, ..cfg.clone() };
    let run = run_paired(&cfg, BandwidthSpec::Undersmooth)?;
    let rows: Vec<Option<Vec<f64>>> = run
        .outcomes
        .iter()
        .map(|o| o.as_ref().and_then(standardize))
        .collect();
    let good: Vec<&Vec<f64>> = rows.iter().flatten().collect();
    let failures = rows.len() - good.len();
    if failures as f64 > MAX_FAILURE_SHARE * rows.len() as f64 || good.is_empty() {
        return Err(DvcmError::Experiment {
            failed: failures,
            total: rows.len(),
            first_error: run
                .first_error
                .unwrap_or_else(|| "standard error is zero or undefined".into()),
        });
    }
    let values = DMatrix::from_fn(good.len(), cfg.p, |i, j| good[i][j]);
    Ok(StandardizedDraws { values, failures })
}

/// Empirical coverage of marginal intervals and the size of the Wald test at the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub coverage: Vec<f64>,
    pub wald_rejection: f64,
    pub successes: usize,
    pub failures: usize,
}

pub fn calibration(cfg: &SimConfig, level: f64, bandwidth: BandwidthSpec) -> Result<Calibration> {
    let run = run_paired(cfg, bandwidth)?;
    run.check()?;
    let mut covered = vec![0usize; cfg.p];
    let mut rejected = 0usize;
    let mut used = 0usize;
    for o in run.successes() {
        let (Ok(ci), Ok(w)) = (
            confidence_intervals(&o.tl, &o.sigma_tl, level),
            wald_test(&o.tl, &o.sigma_tl, &o.truth),
        ) else {
            continue;
        };
        used += 1;
        for (j, (lo, hi)) in ci.iter().enumerate() {
            if *lo <= o.truth[j] && o.truth[j] <= *hi {
                covered[j] += 1;
            }
        }
        if w.p_value < 1.0 - level {
            rejected += 1;
        }
    }
    if used == 0 {
        return Err(DvcmError::Experiment {
            failed: run.outcomes.len(),
            total: run.outcomes.len(),
            first_error: "no replication produced a usable covariance".into(),
        });
    }
    Ok(Calibration {
        coverage: covered.iter().map(|&c| c as f64 / used as f64).collect(),
        wald_rejection: rejected as f64 / used as f64,
        successes: used,
        failures: run.outcomes.len() - used,
    })
}
