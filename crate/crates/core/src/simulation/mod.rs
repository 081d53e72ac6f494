//! Reproducible Monte-Carlo experiments: the data-generating process, MSE
//! over bandwidth grids, phase-transition sweeps with log-log slopes, and
//! normality and calibration diagnostics for the fine-tuned estimator.
//!
//! Every replication draws from its own random streams keyed by
//! `(seed, replication, role)`, so results do not depend on thread count or
//! scheduling.

mod config;
mod dgp;
mod experiment;
mod phase;

pub use config::{BandwidthRuleConfig, PenaltyChoice, SimConfig, ThetaSpec};
pub use dgp::{generate_dataset, stream, true_theta, SimDataset, StreamRole};
pub use experiment::{
    calibration, mc_mse, oracle_penalty, penalty_mode, run_bandwidth_grid, run_paired, run_paired_with,
    run_replication, standardized_estimates, summarize, transfer_settings, write_grid_csv, Calibration,
    Estimator, GridRow, MseSummary, PairedRun, RepOutcome, StandardizedDraws,
};
pub use phase::{fit_loglog_slopes, phase_sweep, write_phase_csv, PhaseResult, PhaseRow, SlopeFit, VaryParam};

pub use crate::stats::ks_normality;
