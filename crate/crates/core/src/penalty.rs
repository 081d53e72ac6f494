//! Data-driven shrinkage matrix for the fine-tuning step.
//!
//! The penalty is `Q = delta * scale / n0 * (bias bias^T + V)^{-1}` where
//! `scale` is the Pearson dispersion of the target-only fit, `bias` a
//! plug-in estimate of the pilot's leading bias and `V` a sandwich estimate
//! of the pilot's variance. Strong shrinkage results when the pilot is
//! precise relative to the target-only estimator.

use nalgebra::{DMatrix, DVector};

use crate::design::{build_local_design, common_width, poly_features, uniform_kernel, DomainSample};
use crate::error::{DvcmError, Result};
use crate::estimators::{fit_dvcm, fit_target_only, LocalFit};
use crate::family::Family;
use crate::linalg::{self, condition_estimate, leading_block, spd_solve_matrix, symmetrize};

/// How the bandwidth for the derivative fit behind the bias term is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DerivativeBandwidth {
    /// Reuse the main bandwidth as is.
    Same,
    /// Reuse the main bandwidth, widened just enough to hold `beta + 1`
    /// distinct domain identifiers when it holds fewer.
    #[default]
    Widen,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyOptions {
    pub delta: f64,
    pub derivative_bandwidth: DerivativeBandwidth,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        PenaltyOptions {
            delta: 1.0,
            derivative_bandwidth: DerivativeBandwidth::Widen,
        }
    }
}

/// Shrinkage matrix with the ingredients it was built from.
#[derive(Debug, Clone)]
pub struct PenaltyEstimate {
    pub q: DMatrix<f64>,
    pub scale: f64,
    pub bias_vec: DVector<f64>,
    pub var_mat: DMatrix<f64>,
    pub delta: f64,
    pub n0: usize,
    /// Condition number of `bias bias^T + V`.
    pub condition: f64,
    pub warnings: Vec<String>,
}

/// Mean squared Pearson residual of `theta_hat` on `target`.
pub fn estimate_scale(target: &DomainSample, theta_hat: &DVector<f64>, family: Family) -> Result<f64> {
    if theta_hat.len() != target.p() {
        return Err(DvcmError::argument("estimate_scale: coefficient width mismatch"));
    }
    let eta = &target.x * theta_hat;
    let mut acc = 0.0;
    for i in 0..target.n() {
        let var = family.b2(eta[i]);
        if !(var > 0.0) {
            return Err(DvcmError::DegenerateVariance(format!(
                "variance function vanishes at observation {i} (eta={})",
                eta[i]
            )));
        }
        let r = target.y[i] - family.inverse_link(eta[i]);
        acc += r * r / var;
    }
    Ok(acc / target.n() as f64)
}

/// Kernel moment matrix `(nh)^{-1} sum_k n_k Phi(t_k) Phi(t_k)^T t_k^r W(t_k)^s`.
pub fn zeta_hat(
    domains: &[DomainSample],
    u0: f64,
    h: f64,
    order: usize,
    r: u32,
    s: u32,
) -> Result<DMatrix<f64>> {
    if !(h > 0.0) {
        return Err(DvcmError::argument(format!("bandwidth must be positive, got {h}")));
    }
    let n: usize = domains.iter().map(|d| d.n()).sum();
    let mut out = DMatrix::zeros(order + 1, order + 1);
    if n == 0 {
        return Ok(out);
    }
    for d in domains {
        let t = (d.u - u0) / h;
        let w = uniform_kernel(t).powi(s as i32);
        let factor = d.n() as f64 * t.powi(r as i32) * w;
        if factor == 0.0 {
            continue;
        }
        let phi = poly_features(t, order);
        out += &phi * phi.transpose() * factor;
    }
    Ok(out / (n as f64 * h))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Bandwidth actually used for the order-`beta` derivative fit.
pub fn derivative_bandwidth(
    domains: &[DomainSample],
    u0: f64,
    h: f64,
    beta: u32,
    policy: DerivativeBandwidth,
) -> Result<f64> {
    match policy {
        DerivativeBandwidth::Same => Ok(h),
        DerivativeBandwidth::Fixed(hd) if hd > 0.0 => Ok(hd),
        DerivativeBandwidth::Fixed(hd) => Err(DvcmError::argument(format!(
            "derivative bandwidth must be positive, got {hd}"
        ))),
        DerivativeBandwidth::Widen => {
            let mut ids: Vec<f64> = domains.iter().map(|d| d.u).collect();
            ids.sort_by(f64::total_cmp);
            ids.dedup();
            let needed = beta as usize + 1;
            if ids.len() < needed {
                return Err(DvcmError::argument(format!(
                    "order-{beta} derivative fit needs {needed} distinct domain identifiers, found {}",
                    ids.len()
                )));
            }
            let mut by_distance: Vec<(f64, f64)> =
                ids.iter().map(|&u| ((u - u0).abs(), u)).collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
            let reach = by_distance[needed - 1].0;
            if reach < h {
                Ok(h)
            } else {
                Ok(h.max(reach * (1.0 + 1e-9) + f64::MIN_POSITIVE))
            }
        }
    }
}

/// Estimate of the `beta`-th derivative of the coefficient function at `u0`
/// from an order-`beta` local fit.
pub fn estimate_derivative(
    domains: &[DomainSample],
    u0: f64,
    h: f64,
    beta: u32,
    family: Family,
) -> Result<DVector<f64>> {
    if beta == 0 {
        return Err(DvcmError::argument("derivative order must be at least 1"));
    }
    let fit = fit_dvcm(domains, u0, h, beta as usize, family)?;
    let p = fit.design.p;
    let block = fit.alpha.rows(beta as usize * p, p).into_owned();
    Ok(block / h.powi(beta as i32))
}

/// `[zeta_{0,1}^{-1} zeta_{beta,1}]_{1,1} / beta!` for an order-`order` fit.
pub fn bias_factor(domains: &[DomainSample], u0: f64, h: f64, order: usize, beta: u32) -> Result<f64> {
    let z0 = zeta_hat(domains, u0, h, order, 0, 1)?;
    let zb = zeta_hat(domains, u0, h, order, beta, 1)?;
    let ratio = spd_solve_matrix(&z0, &zb, "kernel moment matrix zeta_{0,1}")?;
    Ok(ratio[(0, 0)] / factorial(beta))
}

/// Plug-in estimate of the leading bias of the local fit of order `order` at bandwidth `h`.
pub fn estimate_bias(
    domains: &[DomainSample],
    u0: f64,
    h: f64,
    order: usize,
    beta: u32,
    family: Family,
    policy: DerivativeBandwidth,
) -> Result<DVector<f64>> {
    let factor = bias_factor(domains, u0, h, order, beta)?;
    let hd = derivative_bandwidth(domains, u0, h, beta, policy)?;
    let deriv = estimate_derivative(domains, u0, hd, beta, family)?;
    Ok(deriv * (factor * h.powi(beta as i32)))
}

/// Sandwich estimate `A Lambda^{-1} Delta Lambda^{-1} A^T` of the variance of `fit.theta`.
pub fn estimate_variance_sandwich(fit: &LocalFit, family: Family) -> Result<DMatrix<f64>> {
    let d = &fit.design;
    let dim = d.dim();
    let nh = d.n_total as f64 * d.bandwidth;
    let eta = &d.z_rows * &fit.alpha;
    let mut w_lambda = DVector::zeros(d.n_rows());
    let mut w_delta = DVector::zeros(d.n_rows());
    for i in 0..d.n_rows() {
        let s = family.derivatives_unchecked(eta[i], d.y[i]);
        let k = d.kernel[i];
        w_lambda[i] = s.s2 * k / nh;
        w_delta[i] = s.s1 * s.s1 * k * k / (nh * nh);
    }
    let lambda = linalg::weighted_gram(&d.z_rows, &w_lambda);
    let delta = linalg::weighted_gram(&d.z_rows, &w_delta);
    let chol = linalg::cholesky(&lambda, "sandwich bread Lambda")?;
    let left = chol.solve(&delta);
    let full = chol.solve(&left.transpose());
    debug_assert_eq!(full.nrows(), dim);
    Ok(symmetrize(&leading_block(&full, d.p)))
}

/// Assembles the penalty from its ingredients.
pub fn penalty_from_parts(
    scale: f64,
    bias_vec: DVector<f64>,
    var_mat: DMatrix<f64>,
    delta: f64,
    n0: usize,
) -> Result<PenaltyEstimate> {
    if !(delta > 0.5 && delta < 2.0) {
        return Err(DvcmError::argument(format!(
            "delta must lie in (0.5, 2), got {delta}"
        )));
    }
    if n0 == 0 {
        return Err(DvcmError::argument("target sample size must be positive"));
    }
    let m = &bias_vec * bias_vec.transpose() + &var_mat;
    let condition = condition_estimate(&m);
    let m_inv = linalg::spd_inverse(&m, "pilot MSE matrix bias bias' + V").map_err(|e| match e {
        DvcmError::Singular { context, .. } => DvcmError::Singular { context, condition },
        other => other,
    })?;
    let q = symmetrize(&(m_inv * (delta * scale / n0 as f64)));
    Ok(PenaltyEstimate {
        q,
        scale,
        bias_vec,
        var_mat,
        delta,
        n0,
        condition,
        warnings: Vec::new(),
    })
}

/// Penalty built around an already fitted pilot.
///
/// `domains` are the domains the pilot was fitted on (they drive the bias
/// term); `target_pilot` is the target split that supplies the scale and `n0`.
pub fn estimate_q_from_fit(
    pilot: &LocalFit,
    domains: &[DomainSample],
    target_pilot: &DomainSample,
    beta: f64,
    options: &PenaltyOptions,
) -> Result<PenaltyEstimate> {
    let family = pilot.family;
    let d = &pilot.design;
    let mut warnings = Vec::new();
    let var_mat = estimate_variance_sandwich(pilot, family)?;

    let bias_vec = if beta > 0.0 && beta.fract() == 0.0 {
        estimate_bias(
            domains,
            d.center,
            d.bandwidth,
            d.order,
            beta as u32,
            family,
            options.derivative_bandwidth,
        )?
    } else {
        warnings.push(format!(
            "bias term set to zero: no plug-in bias estimator for non-integer beta={beta}"
        ));
        DVector::zeros(d.p)
    };

    let theta_glr = fit_target_only(target_pilot, family)?;
    let scale = estimate_scale(target_pilot, &theta_glr, family)?;
    let mut est = penalty_from_parts(scale, bias_vec, var_mat, options.delta, target_pilot.n())?;
    est.warnings = warnings;
    Ok(est)
}

/// Fits the pilot on `domains` and returns the penalty for fine-tuning.
#[allow(clippy::too_many_arguments)]
pub fn estimate_q(
    domains: &[DomainSample],
    target_pilot: &DomainSample,
    u0: f64,
    h: f64,
    order: usize,
    beta: f64,
    delta: f64,
    family: Family,
) -> Result<PenaltyEstimate> {
    common_width(domains)?;
    let pilot = fit_dvcm(domains, u0, h, order, family)?;
    let options = PenaltyOptions {
        delta,
        ..PenaltyOptions::default()
    };
    estimate_q_from_fit(&pilot, domains, target_pilot, beta, &options)
}

/// Effective kernel mass `(nh)^{-1} sum_k n_k W(t_k)`, the `(1,1)` entry of `zeta_{0,1}`.
pub fn kernel_mass(domains: &[DomainSample], u0: f64, h: f64) -> Result<f64> {
    let design = build_local_design(domains, u0, h, 0)?;
    Ok(design.s_h / (design.n_total as f64 * h))
}
