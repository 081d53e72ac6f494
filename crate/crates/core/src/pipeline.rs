//! The two-split transfer procedure: a pilot fit on sources plus the pilot
//! split of the target, a shrinkage matrix, fine-tuning on the held-out
//! target split, and the covariance of the result.

use nalgebra::{DMatrix, DVector};

use crate::bandwidth::{resolve_bandwidth, BandwidthChoice, BandwidthParams, BandwidthSpec};
use crate::design::DomainSample;
use crate::error::{DvcmError, Result};
use crate::estimators::{fit_dvcm_with, fit_target_only_with, fit_tl_with, LocalFit, NewtonOptions, TlFit};
use crate::family::Family;
use crate::inference::{psi_hat, sigma_tl, v_hat_target, CovarianceReport};
use crate::penalty::{estimate_q_from_fit, estimate_variance_sandwich, PenaltyEstimate, PenaltyOptions};

/// Where the shrinkage matrix comes from.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PenaltyMode {
    /// Data-driven estimate from the pilot split.
    #[default]
    Estimated,
    /// No shrinkage: the fine-tuned estimate is the target-only fit.
    Zero,
    /// Infinite shrinkage: the fine-tuned estimate is the pilot.
    Infinite,
    /// A user-supplied matrix.
    Given(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct TransferSettings {
    pub family: Family,
    pub order: usize,
    pub bandwidth: BandwidthSpec,
    pub bandwidth_params: BandwidthParams,
    pub penalty: PenaltyOptions,
    pub penalty_mode: PenaltyMode,
    pub newton: NewtonOptions,
}

impl Default for TransferSettings {
    fn default() -> Self {
        TransferSettings {
            family: Family::Gaussian,
            order: 1,
            bandwidth: BandwidthSpec::Auto,
            bandwidth_params: BandwidthParams::default(),
            penalty: PenaltyOptions::default(),
            penalty_mode: PenaltyMode::Estimated,
            newton: NewtonOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferFit {
    pub bandwidth: BandwidthChoice,
    pub pilot: LocalFit,
    /// Ingredients of the data-driven penalty; `None` under an override.
    pub penalty: Option<PenaltyEstimate>,
    pub q: DMatrix<f64>,
    pub tl: TlFit,
    /// Target-only fit on the fine-tuning split.
    pub theta_lr: DVector<f64>,
    pub covariance: CovarianceReport,
    pub diagnostics: Vec<(String, String)>,
}

impl TransferFit {
    pub fn theta_tl(&self) -> &DVector<f64> {
        &self.tl.theta_tl
    }

    pub fn theta_dvcm(&self) -> &DVector<f64> {
        &self.pilot.theta
    }
}

/// Runs the full transfer procedure.
///
/// The pilot and the bandwidth use `target_pilot` together with `sources`;
/// the penalty scale and `n0` come from `target_pilot`; fine-tuning and the
/// target-side covariance terms use `target_finetune`.
pub fn fit_transfer(
    sources: &[DomainSample],
    target_pilot: &DomainSample,
    target_finetune: &DomainSample,
    u0: f64,
    settings: &TransferSettings,
) -> Result<TransferFit> {
    if target_pilot.p() != target_finetune.p() {
        return Err(DvcmError::argument("pilot and fine-tuning splits differ in width"));
    }
    let family = settings.family;
    let mut domains = Vec::with_capacity(sources.len() + 1);
    domains.push(DomainSample { u: u0, ..target_pilot.clone() });
    domains.extend(sources.iter().cloned());

    let bandwidth = resolve_bandwidth(settings.bandwidth, &domains, u0, &settings.bandwidth_params)?;
    let mut diagnostics: Vec<(String, String)> = bandwidth
        .diagnostics
        .iter()
        .map(|m| ("bandwidth".to_string(), m.clone()))
        .collect();

    let pilot = fit_dvcm_with(&domains, u0, bandwidth.h, settings.order, family, &settings.newton)?;
    diagnostics.push(("pilot_iterations".into(), pilot.iterations.to_string()));
    if !pilot.converged {
        return Err(DvcmError::NotConverged {
            iterations: pilot.iterations,
            gradient: f64::NAN,
        });
    }

    let p = target_pilot.p();
    let (penalty, q, v_dvcm) = match &settings.penalty_mode {
        PenaltyMode::Estimated => {
            let est = estimate_q_from_fit(
                &pilot,
                &domains,
                target_pilot,
                settings.bandwidth_params.beta,
                &settings.penalty,
            )?;
            diagnostics.push(("penalty_condition".into(), format!("{:e}", est.condition)));
            diagnostics.extend(est.warnings.iter().map(|w| ("penalty".to_string(), w.clone())));
            let q = est.q.clone();
            let v = est.var_mat.clone();
            (Some(est), q, v)
        }
        PenaltyMode::Zero => (None, DMatrix::zeros(p, p), estimate_variance_sandwich(&pilot, family)?),
        PenaltyMode::Infinite => (None, DMatrix::zeros(p, p), estimate_variance_sandwich(&pilot, family)?),
        PenaltyMode::Given(q) => (None, q.clone(), estimate_variance_sandwich(&pilot, family)?),
    };

    let theta_lr = fit_target_only_with(target_finetune, family, &settings.newton)?;
    let v_lr = v_hat_target(target_finetune, &theta_lr, family)?;

    let (tl, covariance) = if settings.penalty_mode == PenaltyMode::Infinite {
        let tl = TlFit {
            theta_tl: pilot.theta.clone(),
            theta_pilot: pilot.theta.clone(),
            q: q.clone(),
            converged: true,
            iterations: 0,
        };
        let psi = psi_hat(target_finetune, &pilot.theta, family)?;
        let cov = CovarianceReport {
            sigma_tl: v_dvcm.clone(),
            psi_hat: psi.clone(),
            v_lr,
            v_dvcm,
            b_q: psi,
        };
        (tl, cov)
    } else {
        let tl = fit_tl_with(target_finetune, &pilot.theta, &q, family, &settings.newton)?;
        if !tl.converged {
            return Err(DvcmError::NotConverged {
                iterations: tl.iterations,
                gradient: f64::NAN,
            });
        }
        let psi = psi_hat(target_finetune, &tl.theta_tl, family)?;
        let cov = sigma_tl(&psi, &q, &v_lr, &v_dvcm)?;
        (tl, cov)
    };
    diagnostics.push(("tl_iterations".into(), tl.iterations.to_string()));

    Ok(TransferFit {
        bandwidth,
        pilot,
        penalty,
        q,
        tl,
        theta_lr,
        covariance,
        diagnostics,
    })
}
