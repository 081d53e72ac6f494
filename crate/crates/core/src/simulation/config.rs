use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthSpec;
use crate::error::{DvcmError, Result};
use crate::family::Family;

/// Shape of the true coefficient function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSpec {
    /// Smooth curves with a continuous second but discontinuous third derivative.
    #[default]
    #[serde(alias = "paper_default")]
    Standard,
    /// Both leading coordinates equal to `tanh(8 (u - 0.2))`.
    TanhPair,
}

/// Source of the shrinkage matrix inside an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyChoice {
    /// Data-driven estimate.
    #[default]
    Estimated,
    /// `delta sigma^2 / n0` times the inverse of the Monte-Carlo pilot MSE matrix.
    Oracle,
    Zero,
    Infinite,
}

/// How an experiment picks its bandwidth when it is not swept over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRuleConfig {
    #[default]
    Auto,
    Undersmooth,
}

impl BandwidthRuleConfig {
    pub fn spec(self) -> BandwidthSpec {
        match self {
            BandwidthRuleConfig::Auto => BandwidthSpec::Auto,
            BandwidthRuleConfig::Undersmooth => BandwidthSpec::Undersmooth,
        }
    }
}

fn default_noise_sd() -> f64 {
    0.5
}
fn default_cov_rho() -> f64 {
    0.7
}
fn default_order() -> usize {
    1
}
fn default_beta() -> f64 {
    2.0
}
fn default_delta() -> f64 {
    1.0
}
fn default_oracle_reps() -> usize {
    200
}
fn default_e0() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    0.2
}
fn default_c() -> f64 {
    1.0
}

/// A Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub family: Family,
    pub p: usize,
    #[serde(alias = "K")]
    pub k: usize,
    /// Observations per source domain.
    pub n_bar: usize,
    /// Size of each target split; the target holds `2 n0` points.
    pub n0: usize,
    /// Length of the centered uniform law of the source identifiers.
    pub gamma: f64,
    #[serde(default)]
    pub u0: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_cov_rho")]
    pub cov_rho: f64,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub bandwidth_grid: Vec<f64>,
    #[serde(default)]
    pub theta_spec: ThetaSpec,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub penalty: PenaltyChoice,
    /// Replications used to estimate the pilot MSE matrix for the oracle penalty.
    #[serde(default = "default_oracle_reps")]
    pub oracle_reps: usize,
    #[serde(default)]
    pub bandwidth_rule: BandwidthRuleConfig,
    #[serde(default = "default_e0")]
    pub e0: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl SimConfig {
    /// Defaults of the Gaussian bandwidth experiment.
    pub fn gaussian_default() -> Self {
        SimConfig {
            family: Family::Gaussian,
            p: 4,
            k: 5,
            n_bar: 600,
            n0: 50,
            gamma: 1.0,
            u0: 0.0,
            noise_sd: 0.5,
            cov_rho: 0.7,
            reps: 200,
            seed: 1,
            bandwidth_grid: Vec::new(),
            theta_spec: ThetaSpec::Standard,
            order: 1,
            beta: 2.0,
            delta: 1.0,
            penalty: PenaltyChoice::Estimated,
            oracle_reps: 200,
            bandwidth_rule: BandwidthRuleConfig::Auto,
            e0: 1.0,
            c: 1.0,
            epsilon: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DvcmError::Config(m));
        if self.p == 0 || self.k == 0 || self.n_bar == 0 || self.n0 == 0 {
            return bad("p, K, n_bar and n0 must all be positive".into());
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.cov_rho > -1.0 && self.cov_rho < 1.0) {
            return bad(format!("cov_rho must lie in (-1, 1), got {}", self.cov_rho));
        }
        if !(self.noise_sd >= 0.0) {
            return bad(format!("noise_sd must be non-negative, got {}", self.noise_sd));
        }
        if self.reps < 2 {
            return bad(format!("reps must be at least 2, got {}", self.reps));
        }
        if let Some(h) = self.bandwidth_grid.iter().find(|h| !(**h > 0.0)) {
            return bad(format!("bandwidth grid entries must be positive, got {h}"));
        }
        if !(self.delta > 0.5 && self.delta < 2.0) {
            return bad(format!("delta must lie in (0.5, 2), got {}", self.delta));
        }
        if self.penalty == PenaltyChoice::Oracle && self.oracle_reps < 2 {
            return bad("oracle_reps must be at least 2".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| DvcmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            DvcmError::Config(m) => DvcmError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
