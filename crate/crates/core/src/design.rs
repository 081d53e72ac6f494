//! Kernel weights, polynomial feature maps and the stacked local design.

use nalgebra::{DMatrix, DVector};

use crate::error::{DvcmError, Result};

/// Observations from one domain: identifier `u`, covariates (rows are
/// observations) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSample {
    pub u: f64,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl DomainSample {
    pub fn new(u: f64, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(DvcmError::argument("domain sample has no observations"));
        }
        if x.nrows() != y.len() {
            return Err(DvcmError::argument(format!(
                "covariate rows ({}) and responses ({}) differ",
                x.nrows(),
                y.len()
            )));
        }
        if !u.is_finite() || x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(DvcmError::Domain("domain sample contains non-finite values".into()));
        }
        Ok(DomainSample { u, x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// New sample holding the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> DomainSample {
        DomainSample {
            u: self.u,
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
        }
    }

    /// Concatenation of samples sharing the same identifier.
    pub fn concat(parts: &[&DomainSample]) -> Result<DomainSample> {
        let first = parts
            .first()
            .ok_or_else(|| DvcmError::argument("nothing to concatenate"))?;
        let p = first.p();
        let n: usize = parts.iter().map(|d| d.n()).sum();
        let mut x = DMatrix::zeros(n, p);
        let mut y = DVector::zeros(n);
        let mut r = 0;
        for part in parts {
            if part.p() != p {
                return Err(DvcmError::argument("samples have different covariate widths"));
            }
            for i in 0..part.n() {
                x.set_row(r, &part.x.row(i));
                y[r] = part.y[i];
                r += 1;
            }
        }
        Ok(DomainSample { u: first.u, x, y })
    }
}

/// Checks that all domains are non-empty and share the same covariate width.
pub fn common_width(domains: &[DomainSample]) -> Result<usize> {
    let first = domains
        .first()
        .ok_or_else(|| DvcmError::argument("no domains supplied"))?;
    let p = first.p();
    if domains.iter().any(|d| d.p() != p) {
        return Err(DvcmError::argument("domains have different covariate widths"));
    }
    Ok(p)
}

/// Uniform kernel `W(t) = 1/2` on `|t| <= 1`.
pub fn uniform_kernel(t: f64) -> f64 {
    if t.abs() <= 1.0 {
        0.5
    } else {
        0.0
    }
}

/// Polynomial feature map `(1, t, t^2/2!, ..., t^l/l!)`.
pub fn poly_features(t: f64, order: usize) -> DVector<f64> {
    let mut out = DVector::zeros(order + 1);
    let mut term = 1.0;
    out[0] = 1.0;
    for j in 1..=order {
        term *= t / j as f64;
        out[j] = term;
    }
    out
}

/// Signed-order variant used at API boundaries where the order comes from user input.
pub fn poly_features_checked(t: f64, order: i64) -> Result<DVector<f64>> {
    if order < 0 {
        return Err(DvcmError::argument(format!(
            "polynomial order must be nonnegative, got {order}"
        )));
    }
    Ok(poly_features(t, order as usize))
}

/// Stacked local-polynomial design around `center`.
///
/// Only rows with positive kernel weight are stored. `weights` are the
/// kernel weights divided by `s_h`, the total kernel mass over all rows.
#[derive(Debug, Clone)]
pub struct LocalDesign {
    pub z_rows: DMatrix<f64>,
    pub weights: DVector<f64>,
    pub kernel: DVector<f64>,
    pub t: DVector<f64>,
    pub y: DVector<f64>,
    pub s_h: f64,
    pub order: usize,
    pub bandwidth: f64,
    pub center: f64,
    pub row_domain: Vec<usize>,
    pub p: usize,
    /// Total number of observations over all domains, inside the window or not.
    pub n_total: usize,
}

impl LocalDesign {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        (self.order + 1) * self.p
    }

    /// Number of distinct kernel offsets `t` with positive weight.
    pub fn distinct_offsets(&self) -> usize {
        let mut seen: Vec<f64> = self.t.iter().copied().collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        seen.len()
    }
}

pub fn build_local_design(
    domains: &[DomainSample],
    u0: f64,
    h: f64,
    order: usize,
) -> Result<LocalDesign> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(DvcmError::argument(format!("bandwidth must be positive, got {h}")));
    }
    let p = common_width(domains)?;
    let n_total: usize = domains.iter().map(|d| d.n()).sum();

    let in_window: Vec<(usize, f64, f64)> = domains
        .iter()
        .enumerate()
        .filter_map(|(k, d)| {
            let t = (d.u - u0) / h;
            let w = uniform_kernel(t);
            (w > 0.0).then_some((k, t, w))
        })
        .collect();
    let s_h: f64 = in_window.iter().map(|&(k, _, w)| w * domains[k].n() as f64).sum();
    if s_h <= 0.0 {
        let nearest = domains
            .iter()
            .map(|d| (d.u - u0).abs())
            .fold(f64::INFINITY, f64::min);
        return Err(DvcmError::EmptyWindow { u0, h, nearest });
    }

    let rows: usize = in_window.iter().map(|&(k, _, _)| domains[k].n()).sum();
    let dim = (order + 1) * p;
    let mut z = DMatrix::zeros(rows, dim);
    let mut weights = DVector::zeros(rows);
    let mut kernel = DVector::zeros(rows);
    let mut tv = DVector::zeros(rows);
    let mut y = DVector::zeros(rows);
    let mut row_domain = Vec::with_capacity(rows);

    let mut r = 0;
    for &(k, t, w) in &in_window {
        let phi = poly_features(t, order);
        let d = &domains[k];
        for i in 0..d.n() {
            for (j, &f) in phi.iter().enumerate() {
                for c in 0..p {
                    z[(r, j * p + c)] = f * d.x[(i, c)];
                }
            }
            weights[r] = w / s_h;
            kernel[r] = w;
            tv[r] = t;
            y[r] = d.y[i];
            row_domain.push(k);
            r += 1;
        }
    }

    Ok(LocalDesign {
        z_rows: z,
        weights,
        kernel,
        t: tv,
        y,
        s_h,
        order,
        bandwidth: h,
        center: u0,
        row_domain,
        p,
        n_total,
    })
}

/// Sorted distances `|u0 - U_k|` over source domains with their extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDistances {
    pub sorted: Vec<f64>,
    pub d1: f64,
    pub dk: f64,
}

pub fn domain_distances(sources: &[DomainSample], u0: f64) -> Result<DomainDistances> {
    if sources.is_empty() {
        return Err(DvcmError::argument("no source domains"));
    }
    let mut sorted: Vec<f64> = sources.iter().map(|d| (d.u - u0).abs()).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(DomainDistances {
        d1: sorted[0],
        dk: sorted[sorted.len() - 1],
        sorted,
    })
}
