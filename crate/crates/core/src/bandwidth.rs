//! Bandwidth rules: a rate-optimal median rule for estimation and an
//! undersmoothed rule for inference.
//!
//! Throughout, `domains[0]` is the target domain and `domains[1..]` are the
//! sources. `n` is the total sample size over all domains.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{domain_distances, DomainSample};
use crate::error::{DvcmError, Result};
use crate::stats::mean_sd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    MedianRule,
    Undersmoothed,
    Fixed,
}

/// A selected bandwidth with the quantities that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthChoice {
    pub h: f64,
    pub rule: BandwidthRule,
    pub rate_term: f64,
    pub d1: f64,
    pub dk: f64,
    pub e0: f64,
    pub beta: f64,
    pub gamma: f64,
    pub n: usize,
    /// `h K / gamma > 1`, reported by the undersmoothed rule.
    pub feasible: Option<bool>,
    pub diagnostics: Vec<String>,
}

/// Tuning constants shared by the rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthParams {
    pub beta: f64,
    /// Spread of the domain identifiers; estimated from the sources when `None`.
    pub gamma: Option<f64>,
    pub e0: f64,
    pub c: f64,
    pub epsilon: f64,
}

impl Default for BandwidthParams {
    fn default() -> Self {
        BandwidthParams {
            beta: 2.0,
            gamma: None,
            e0: 1.0,
            c: 1.0,
            epsilon: 0.2,
        }
    }
}

/// How the bandwidth is chosen, as given on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthSpec {
    Auto,
    Undersmooth,
    Fixed(f64),
}

impl FromStr for BandwidthSpec {
    type Err = DvcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(BandwidthSpec::Auto),
            "undersmooth" => Ok(BandwidthSpec::Undersmooth),
            other => {
                let h: f64 = other.parse().map_err(|_| {
                    DvcmError::argument(format!(
                        "bandwidth must be `auto`, `undersmooth` or a positive number, got `{other}`"
                    ))
                })?;
                if !(h > 0.0) || !h.is_finite() {
                    return Err(DvcmError::argument(format!("bandwidth must be positive, got {h}")));
                }
                Ok(BandwidthSpec::Fixed(h))
            }
        }
    }
}

impl fmt::Display for BandwidthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthSpec::Auto => f.write_str("auto"),
            BandwidthSpec::Undersmooth => f.write_str("undersmooth"),
            BandwidthSpec::Fixed(h) => write!(f, "{h}"),
        }
    }
}

fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b).min(a.min(b).max(c))
}

fn split(domains: &[DomainSample]) -> Result<(&[DomainSample], usize)> {
    if domains.len() < 2 {
        return Err(DvcmError::argument("bandwidth selection needs at least one source domain"));
    }
    Ok((&domains[1..], domains.iter().map(|d| d.n()).sum()))
}

/// Moment-matched spread `sqrt(12) * sd(U_1..U_K)` of the source identifiers.
///
/// With fewer than two distinct sources this falls back to `2 max_k |U_k - u0|`,
/// the length of a centered interval covering them.
pub fn default_gamma(sources: &[DomainSample], u0: f64) -> Result<f64> {
    let us: Vec<f64> = sources.iter().map(|d| d.u).collect();
    let (_, sd) = mean_sd(&us);
    let gamma = if us.len() >= 2 && sd > 0.0 {
        sd * 12f64.sqrt()
    } else {
        2.0 * us.iter().map(|u| (u - u0).abs()).fold(0.0, f64::max)
    };
    if !(gamma > 0.0) {
        return Err(DvcmError::DegenerateScale(
            "cannot infer the identifier spread: all sources sit at the target; pass gamma explicitly"
                .into(),
        ));
    }
    Ok(gamma)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(DvcmError::argument(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// `h = med(e0 (n/gamma)^{-1/(2 beta + 1)}, d_(1), d_(K))`.
pub fn select_bandwidth_median(
    domains: &[DomainSample],
    u0: f64,
    beta: f64,
    gamma: f64,
    e0: f64,
) -> Result<BandwidthChoice> {
    check_positive("gamma", gamma)?;
    check_positive("e0", e0)?;
    check_positive("beta", beta)?;
    let (sources, n) = split(domains)?;
    let dist = domain_distances(sources, u0)?;
    let rate_term = e0 * (n as f64 / gamma).powf(-1.0 / (2.0 * beta + 1.0));
    let h = median3(rate_term, dist.d1, dist.dk);
    let mut diagnostics = Vec::new();
    if !(h > 0.0) {
        diagnostics.push("selected bandwidth is zero: sources coincide with the target".into());
    }
    Ok(BandwidthChoice {
        h,
        rule: BandwidthRule::MedianRule,
        rate_term,
        d1: dist.d1,
        dk: dist.dk,
        e0,
        beta,
        gamma,
        n,
        feasible: None,
        diagnostics,
    })
}

/// `h = c (gamma/n)^{(1+eps)/(2 beta + 1)}`, kept just above `d_(1)`.
pub fn select_bandwidth_undersmoothed(
    domains: &[DomainSample],
    u0: f64,
    beta: f64,
    gamma: f64,
    c: f64,
    epsilon: f64,
) -> Result<BandwidthChoice> {
    check_positive("gamma", gamma)?;
    check_positive("c", c)?;
    check_positive("beta", beta)?;
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(DvcmError::argument(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let (sources, n) = split(domains)?;
    let k = sources.len();
    let dist = domain_distances(sources, u0)?;
    let base = gamma / n as f64;
    let rate_term = base.powf(1.0 / (2.0 * beta + 1.0));
    let mut h = c * base.powf((1.0 + epsilon) / (2.0 * beta + 1.0));
    let mut diagnostics = Vec::new();
    if epsilon == 0.0 {
        diagnostics.push("epsilon = 0 gives the rate-optimal exponent: no undersmoothing".into());
    }
    if h <= dist.d1 {
        h = dist.d1 * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        diagnostics.push(format!(
            "bandwidth clipped to just above the nearest source distance {}",
            dist.d1
        ));
        if h > rate_term {
            diagnostics.push(format!(
                "infeasible undersmoothing: h={h} exceeds the rate-optimal scale {rate_term}"
            ));
        }
    }
    let feasible = h * k as f64 / gamma > 1.0;
    if !feasible {
        diagnostics.push(format!(
            "h K / gamma = {} is not above 1: too few domains inside the window",
            h * k as f64 / gamma
        ));
    }
    Ok(BandwidthChoice {
        h,
        rule: BandwidthRule::Undersmoothed,
        rate_term,
        d1: dist.d1,
        dk: dist.dk,
        e0: c,
        beta,
        gamma,
        n,
        feasible: Some(feasible),
        diagnostics,
    })
}

/// Resolves a [`BandwidthSpec`] against the data.
pub fn resolve_bandwidth(
    spec: BandwidthSpec,
    domains: &[DomainSample],
    u0: f64,
    params: &BandwidthParams,
) -> Result<BandwidthChoice> {
    if let BandwidthSpec::Fixed(h) = spec {
        check_positive("bandwidth", h)?;
        let (sources, n) = split(domains)?;
        let dist = domain_distances(sources, u0)?;
        return Ok(BandwidthChoice {
            h,
            rule: BandwidthRule::Fixed,
            rate_term: h,
            d1: dist.d1,
            dk: dist.dk,
            e0: params.e0,
            beta: params.beta,
            gamma: params
                .gamma
                .or_else(|| default_gamma(sources, u0).ok())
                .unwrap_or(0.0),
            n,
            feasible: None,
            diagnostics: Vec::new(),
        });
    }
    let (sources, _) = split(domains)?;
    let gamma = match params.gamma {
        Some(g) => g,
        None => default_gamma(sources, u0)?,
    };
    match spec {
        BandwidthSpec::Auto => select_bandwidth_median(domains, u0, params.beta, gamma, params.e0),
        BandwidthSpec::Undersmooth => select_bandwidth_undersmoothed(
            domains,
            u0,
            params.beta,
            gamma,
            params.c,
            params.epsilon,
        ),
        BandwidthSpec::Fixed(_) => unreachable!(),
    }
}
