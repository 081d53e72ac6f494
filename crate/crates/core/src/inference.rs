//! Covariance of the transfer estimator, Wald and contrast tests, and
//! marginal confidence intervals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::DomainSample;
use crate::error::{DvcmError, Result};
use crate::family::Family;
use crate::linalg::{cholesky, spd_inverse, symmetrize, weighted_gram};
use crate::stats::{chi2_sf, normal_quantile, two_sided_p};

/// The unified covariance `Sigma_TL` together with its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub sigma_tl: DMatrix<f64>,
    pub psi_hat: DMatrix<f64>,
    pub v_lr: DMatrix<f64>,
    pub v_dvcm: DMatrix<f64>,
    /// `Psi + Q`.
    pub b_q: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastTest {
    pub z: f64,
    pub p_value: f64,
}

fn check_width(target: &DomainSample, theta: &DVector<f64>) -> Result<()> {
    if theta.len() != target.p() {
        return Err(DvcmError::argument(format!(
            "coefficient vector has length {} but the design has {} columns",
            theta.len(),
            target.p()
        )));
    }
    Ok(())
}

/// `(1/n0) sum b''(x' theta) x x'`.
pub fn psi_hat(target: &DomainSample, theta_hat: &DVector<f64>, family: Family) -> Result<DMatrix<f64>> {
    check_width(target, theta_hat)?;
    let n = target.n() as f64;
    let eta = &target.x * theta_hat;
    let w = eta.map(|e| family.b2(e) / n);
    Ok(weighted_gram(&target.x, &w))
}

/// Robust sandwich variance of the target-only estimator, on the scale of the estimator itself.
pub fn v_hat_target(target: &DomainSample, theta_hat: &DVector<f64>, family: Family) -> Result<DMatrix<f64>> {
    let psi = psi_hat(target, theta_hat, family)?;
    let n = target.n() as f64;
    let eta = &target.x * theta_hat;
    let w = DVector::from_fn(target.n(), |i, _| {
        let r = target.y[i] - family.b1(eta[i]);
        r * r / n
    });
    let meat = weighted_gram(&target.x, &w);
    let chol = cholesky(&psi, "target information matrix Psi")?;
    let left = chol.solve(&meat);
    let full = chol.solve(&left.transpose());
    Ok(symmetrize(&(full / n)))
}

/// `B^{-1} Q V_dvcm Q B^{-1} + B^{-1} Psi V_lr Psi B^{-1}` with `B = Psi + Q`.
pub fn sigma_tl(
    psi: &DMatrix<f64>,
    q: &DMatrix<f64>,
    v_lr: &DMatrix<f64>,
    v_dvcm: &DMatrix<f64>,
) -> Result<CovarianceReport> {
    let p = psi.nrows();
    for (name, m) in [("Q", q), ("V_lr", v_lr), ("V_dvcm", v_dvcm)] {
        if m.nrows() != p || m.ncols() != p {
            return Err(DvcmError::argument(format!("{name} must be {p}x{p}")));
        }
    }
    let b_q = psi + q;
    let b_inv = spd_inverse(&b_q, "B = Psi + Q")?;
    let shrink = &b_inv * q;
    let keep = &b_inv * psi;
    let s = &shrink * v_dvcm * shrink.transpose() + &keep * v_lr * keep.transpose();
    Ok(CovarianceReport {
        sigma_tl: symmetrize(&s),
        psi_hat: psi.clone(),
        v_lr: v_lr.clone(),
        v_dvcm: v_dvcm.clone(),
        b_q,
    })
}

/// Wald test of `theta = null_value`, referred to chi-square with `p` degrees of freedom.
pub fn wald_test(theta: &DVector<f64>, sigma: &DMatrix<f64>, null_value: &DVector<f64>) -> Result<WaldTest> {
    let p = theta.len();
    if null_value.len() != p || sigma.nrows() != p || sigma.ncols() != p {
        return Err(DvcmError::argument(format!(
            "null vector has length {} but the estimate has length {p}",
            null_value.len()
        )));
    }
    let diff = theta - null_value;
    let chol = cholesky(sigma, "covariance Sigma_TL")?;
    let statistic = diff.dot(&chol.solve(&diff)).max(0.0);
    Ok(WaldTest {
        statistic,
        df: p,
        p_value: chi2_sf(statistic, p),
    })
}

/// Two-sided test of `v' theta = zeta`.
pub fn contrast_test(
    theta: &DVector<f64>,
    sigma: &DMatrix<f64>,
    v: &DVector<f64>,
    zeta: f64,
) -> Result<ContrastTest> {
    if v.len() != theta.len() {
        return Err(DvcmError::argument(format!(
            "contrast has length {} but the estimate has length {}",
            v.len(),
            theta.len()
        )));
    }
    let var = (sigma * v).dot(v);
    if !(var > 0.0) {
        return Err(DvcmError::argument("contrast variance v' Sigma v must be positive"));
    }
    let z = (v.dot(theta) - zeta) / var.sqrt();
    Ok(ContrastTest {
        z,
        p_value: two_sided_p(z),
    })
}

/// Marginal normal intervals `theta_j +- z sqrt(Sigma_jj)`.
pub fn confidence_intervals(theta: &DVector<f64>, sigma: &DMatrix<f64>, level: f64) -> Result<Vec<(f64, f64)>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(DvcmError::argument(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let z = normal_quantile(0.5 + level / 2.0);
    Ok(theta
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let half = z * sigma[(j, j)].max(0.0).sqrt();
            (t - half, t + half)
        })
        .collect())
}

/// Standard errors `sqrt(Sigma_jj)`.
pub fn standard_errors(sigma: &DMatrix<f64>) -> Vec<f64> {
    (0..sigma.nrows()).map(|j| sigma[(j, j)].max(0.0).sqrt()).collect()
}
