use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bandwidth::BandwidthChoice;
use crate::family::Family;
use crate::inference::{ContrastTest, CovarianceReport, WaldTest};

/// Row-major matrix as nested arrays.
pub type Rows = Vec<Vec<f64>>;

pub fn rows_of(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_of(rows: &Rows) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRows {
    pub sigma_tl: Rows,
    pub psi_hat: Rows,
    pub v_lr: Rows,
    pub v_dvcm: Rows,
    pub b_q: Rows,
}

impl From<&CovarianceReport> for CovarianceRows {
    fn from(c: &CovarianceReport) -> Self {
        CovarianceRows {
            sigma_tl: rows_of(&c.sigma_tl),
            psi_hat: rows_of(&c.psi_hat),
            v_lr: rows_of(&c.v_lr),
            v_dvcm: rows_of(&c.v_dvcm),
            b_q: rows_of(&c.b_q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub contrast: Vec<f64>,
    pub zeta: f64,
    #[serde(flatten)]
    pub test: ContrastTest,
}

/// Everything a fit produces, as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub u0: f64,
    pub family: Family,
    pub theta_lr: Vec<f64>,
    pub theta_dvcm: Vec<f64>,
    pub theta_tl: Vec<f64>,
    pub q_hat: Rows,
    pub bandwidth: BandwidthChoice,
    pub covariance: CovarianceRows,
    pub se: Vec<f64>,
    pub level: f64,
    pub ci: Vec<Interval>,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wald: Option<WaldTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast: Option<ContrastReport>,
}

impl EstimateReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn diagnostic(&self, key: &str) -> Option<&str> {
        self.diagnostics.iter().find(|d| d.key == key).map(|d| d.value.as_str())
    }
}
