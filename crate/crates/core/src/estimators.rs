//! Point estimators: target-only (G)LR, pooled local-polynomial (G)DVCM and
//! the penalized transfer estimator, all sharing one weighted Newton solver.

use nalgebra::{DMatrix, DVector};

use crate::design::{build_local_design, DomainSample, LocalDesign};
use crate::error::{DvcmError, Result};
use crate::family::Family;
use crate::linalg::{self, weighted_gram};

/// Newton solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Convergence threshold on the gradient max-norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Adds `eps * I` with `eps = 1e-10 * trace / dim` to singular Hessians instead of failing.
    pub jitter: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tolerance: 1e-9,
            max_iterations: 100,
            max_halvings: 30,
            jitter: false,
        }
    }
}

/// Quadratic penalty `1/2 (a - center)^T q (a - center)`.
#[derive(Debug, Clone, Copy)]
pub struct Penalty<'a> {
    pub q: &'a DMatrix<f64>,
    pub center: &'a DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub solution: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub gradient_norm: f64,
}

struct Objective<'a> {
    z: &'a DMatrix<f64>,
    w: &'a DVector<f64>,
    y: &'a DVector<f64>,
    family: Family,
    penalty: Option<Penalty<'a>>,
}

impl Objective<'_> {
    fn value(&self, alpha: &DVector<f64>) -> f64 {
        let eta = self.z * alpha;
        let mut f = 0.0;
        for i in 0..eta.len() {
            if self.w[i] != 0.0 {
                f += self.w[i] * self.family.loss_unchecked(eta[i], self.y[i]);
            }
        }
        if let Some(pen) = self.penalty {
            let d = alpha - pen.center;
            f += 0.5 * d.dot(&(pen.q * &d));
        }
        f
    }

    fn gradient_hessian(&self, alpha: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let eta = self.z * alpha;
        let mut g1 = DVector::zeros(eta.len());
        let mut w2 = DVector::zeros(eta.len());
        for i in 0..eta.len() {
            let d = self.family.derivatives_unchecked(eta[i], self.y[i]);
            g1[i] = self.w[i] * d.s1;
            w2[i] = self.w[i] * d.s2;
        }
        let mut grad = self.z.tr_mul(&g1);
        let mut hess = weighted_gram(self.z, &w2);
        if let Some(pen) = self.penalty {
            grad += pen.q * (alpha - pen.center);
            hess += pen.q;
        }
        (grad, hess)
    }
}

fn solve_newton_step(
    hess: &DMatrix<f64>,
    grad: &DVector<f64>,
    jitter: bool,
    context: &str,
) -> Result<DVector<f64>> {
    match linalg::spd_solve(hess, grad, context) {
        Ok(step) => Ok(step),
        Err(err) if jitter => {
            let dim = hess.nrows() as f64;
            let eps = (1e-10 * hess.trace() / dim).max(f64::MIN_POSITIVE);
            let mut h = hess.clone();
            for i in 0..hess.nrows() {
                h[(i, i)] += eps;
            }
            linalg::spd_solve(&h, grad, context).map_err(|_| err)
        }
        Err(err) => Err(err),
    }
}

/// Minimizes `sum_i w_i l(z_i^T a, y_i) + 1/2 ||a - c||_Q^2` by damped Newton.
///
/// Steps are halved while the objective fails to decrease. When the
/// iteration budget runs out the best iterate is returned with
/// `converged == false`.
pub fn newton_weighted(
    design_rows: &DMatrix<f64>,
    weights: &DVector<f64>,
    y: &DVector<f64>,
    family: Family,
    init: &DVector<f64>,
    penalty: Option<Penalty<'_>>,
    options: &NewtonOptions,
) -> Result<NewtonResult> {
    let dim = design_rows.ncols();
    if design_rows.nrows() != weights.len() || weights.len() != y.len() || init.len() != dim {
        return Err(DvcmError::argument("newton: inconsistent dimensions"));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(DvcmError::argument("newton: weights must be finite and nonnegative"));
    }
    if let Some(pen) = penalty {
        if pen.q.nrows() != dim || pen.q.ncols() != dim || pen.center.len() != dim {
            return Err(DvcmError::argument("newton: penalty dimensions do not match"));
        }
    }
    let obj = Objective {
        z: design_rows,
        w: weights,
        y,
        family,
        penalty,
    };

    let mut alpha = init.clone();
    let mut f = obj.value(&alpha);
    let mut iterations = 0;
    loop {
        let (grad, hess) = obj.gradient_hessian(&alpha);
        let gnorm = grad.amax();
        if gnorm <= options.tolerance {
            return Ok(NewtonResult {
                solution: alpha,
                converged: true,
                iterations,
                objective: f,
                gradient_norm: gnorm,
            });
        }
        if iterations >= options.max_iterations {
            return Ok(NewtonResult {
                solution: alpha,
                converged: false,
                iterations,
                objective: f,
                gradient_norm: gnorm,
            });
        }
        let step = solve_newton_step(&hess, &grad, options.jitter, "newton hessian")?;
        iterations += 1;

        // Gaussian objectives are quadratic: the full step is exact.
        if family == Family::Gaussian {
            alpha -= &step;
            f = obj.value(&alpha);
            continue;
        }

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=options.max_halvings {
            let candidate = &alpha - &step * scale;
            let fc = obj.value(&candidate);
            if fc.is_finite() && fc <= f {
                alpha = candidate;
                f = fc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // No descent possible at working precision.
            let (grad, _) = obj.gradient_hessian(&alpha);
            let gnorm = grad.amax();
            return Ok(NewtonResult {
                solution: alpha,
                converged: gnorm <= options.tolerance,
                iterations,
                objective: f,
                gradient_norm: gnorm,
            });
        }
    }
}

/// Fitted local-polynomial coefficients.
#[derive(Debug, Clone)]
pub struct LocalFit {
    /// Stacked coefficients over `(l + 1) * p` coordinates.
    pub alpha: DVector<f64>,
    /// Leading `p` coordinates of `alpha`.
    pub theta: DVector<f64>,
    pub design: LocalDesign,
    pub family: Family,
    pub converged: bool,
    pub iterations: usize,
}

/// Transfer-learning fit on the fine-tuning split.
#[derive(Debug, Clone)]
pub struct TlFit {
    pub theta_tl: DVector<f64>,
    pub theta_pilot: DVector<f64>,
    pub q: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Target-only (G)LR estimate.
pub fn fit_target_only(target: &DomainSample, family: Family) -> Result<DVector<f64>> {
    fit_target_only_with(target, family, &NewtonOptions::default())
}

pub fn fit_target_only_with(
    target: &DomainSample,
    family: Family,
    options: &NewtonOptions,
) -> Result<DVector<f64>> {
    let (n, p) = (target.n(), target.p());
    if n <= p {
        return Err(DvcmError::argument(format!(
            "target-only fit needs more observations ({n}) than covariates ({p})"
        )));
    }
    if family == Family::Gaussian {
        let xtx = target.x.tr_mul(&target.x);
        let xty = target.x.tr_mul(&target.y);
        return linalg::spd_solve(&xtx, &xty, "target-only normal equations");
    }
    let w = DVector::from_element(n, 1.0 / n as f64);
    let res = newton_weighted(
        &target.x,
        &w,
        &target.y,
        family,
        &DVector::zeros(p),
        None,
        options,
    )?;
    if !res.converged {
        return Err(DvcmError::NotConverged {
            iterations: res.iterations,
            gradient: res.gradient_norm,
        });
    }
    Ok(res.solution)
}

/// Pooled local-polynomial estimate of the coefficients at `u0`.
pub fn fit_dvcm(
    domains: &[DomainSample],
    u0: f64,
    h: f64,
    order: usize,
    family: Family,
) -> Result<LocalFit> {
    fit_dvcm_with(domains, u0, h, order, family, &NewtonOptions::default())
}

pub fn fit_dvcm_with(
    domains: &[DomainSample],
    u0: f64,
    h: f64,
    order: usize,
    family: Family,
    options: &NewtonOptions,
) -> Result<LocalFit> {
    let design = build_local_design(domains, u0, h, order)?;
    fit_on_design(design, domains, family, options)
}

pub(crate) fn fit_on_design(
    design: LocalDesign,
    domains: &[DomainSample],
    family: Family,
    options: &NewtonOptions,
) -> Result<LocalFit> {
    let p = design.p;
    let dim = design.dim();
    let (alpha, converged, iterations) = if family == Family::Gaussian {
        let gram = weighted_gram(&design.z_rows, &design.weights);
        let rhs = design
            .z_rows
            .tr_mul(&design.y.component_mul(&design.weights));
        let alpha = match linalg::spd_solve(&gram, &rhs, "local design Z'WZ") {
            Ok(a) => a,
            Err(err) if options.jitter => {
                let res = newton_weighted(
                    &design.z_rows,
                    &design.weights,
                    &design.y,
                    family,
                    &DVector::zeros(dim),
                    None,
                    options,
                )
                .map_err(|_| err)?;
                res.solution
            }
            Err(err) => return Err(err),
        };
        (alpha, true, 1)
    } else {
        let mut init = DVector::zeros(dim);
        if let Some(start) = warm_start(domains, design.center, family) {
            init.rows_mut(0, p).copy_from(&start);
        }
        let res = newton_weighted(
            &design.z_rows,
            &design.weights,
            &design.y,
            family,
            &init,
            None,
            options,
        )
        .map_err(|e| match e {
            DvcmError::Singular { condition, .. } => {
                DvcmError::singular("local design Hessian", condition)
            }
            other => other,
        })?;
        (res.solution, res.converged, res.iterations)
    };
    let theta = alpha.rows(0, p).into_owned();
    Ok(LocalFit {
        alpha,
        theta,
        design,
        family,
        converged,
        iterations,
    })
}

/// Target-only estimate on the domain sitting at `u0`, when one exists and is fittable.
fn warm_start(domains: &[DomainSample], u0: f64, family: Family) -> Option<DVector<f64>> {
    let at_center: Vec<&DomainSample> = domains.iter().filter(|d| d.u == u0).collect();
    if at_center.is_empty() {
        return None;
    }
    let target = DomainSample::concat(&at_center).ok()?;
    fit_target_only(&target, family).ok()
}

/// Ridge-type fine-tuning of `theta_pilot` on the fine-tuning split.
pub fn fit_tl(
    target_finetune: &DomainSample,
    theta_pilot: &DVector<f64>,
    q: &DMatrix<f64>,
    family: Family,
) -> Result<TlFit> {
    fit_tl_with(target_finetune, theta_pilot, q, family, &NewtonOptions::default())
}

pub fn fit_tl_with(
    target_finetune: &DomainSample,
    theta_pilot: &DVector<f64>,
    q: &DMatrix<f64>,
    family: Family,
    options: &NewtonOptions,
) -> Result<TlFit> {
    let (n, p) = (target_finetune.n(), target_finetune.p());
    if theta_pilot.len() != p || q.nrows() != p || q.ncols() != p {
        return Err(DvcmError::argument("fit_tl: pilot and penalty must match covariate width"));
    }
    if (q - q.transpose()).amax() > 1e-8 * (1.0 + q.amax()) {
        return Err(DvcmError::argument("fit_tl: penalty matrix must be symmetric"));
    }
    let inv_n = 1.0 / n as f64;
    if family == Family::Gaussian {
        let a = target_finetune.x.tr_mul(&target_finetune.x) * inv_n + q;
        let b = target_finetune.x.tr_mul(&target_finetune.y) * inv_n + q * theta_pilot;
        let theta_tl = linalg::spd_solve(&a, &b, "fine-tuning system X'X/n0 + Q")?;
        return Ok(TlFit {
            theta_tl,
            theta_pilot: theta_pilot.clone(),
            q: q.clone(),
            converged: true,
            iterations: 1,
        });
    }
    let w = DVector::from_element(n, inv_n);
    let res = newton_weighted(
        &target_finetune.x,
        &w,
        &target_finetune.y,
        family,
        theta_pilot,
        Some(Penalty {
            q,
            center: theta_pilot,
        }),
        options,
    )?;
    Ok(TlFit {
        theta_tl: res.solution,
        theta_pilot: theta_pilot.clone(),
        q: q.clone(),
        converged: res.converged,
        iterations: res.iterations,
    })
}
