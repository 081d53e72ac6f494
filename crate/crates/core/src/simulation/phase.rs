use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use super::experiment::{run_paired, summarize, Estimator};
use crate::error::{DvcmError, Result};

/// A continuous piecewise-linear fit in log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Knots on the original x scale, one fewer than the segments.
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    pub intercept: f64,
    pub sse: f64,
}

impl SlopeFit {
    /// `(start, slope)` per segment, the first starting at `x0`.
    pub fn segments(&self, x0: f64) -> Vec<(f64, f64)> {
        std::iter::once(x0)
            .chain(self.breakpoints.iter().copied())
            .zip(self.slopes.iter().copied())
            .collect()
    }
}

/// Every increasing choice of `count` knot indices in `lo..=hi` with gaps of at least `gap`.
fn knot_sets(lo: usize, hi: usize, count: usize, gap: usize) -> Vec<Vec<usize>> {
    if count == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in lo..=hi {
        for mut rest in knot_sets(first + gap, hi, count - 1, gap) {
            rest.insert(0, first);
            out.push(rest);
        }
        if first + gap > hi && count > 1 {
            break;
        }
    }
    out
}

fn hinge_fit(lx: &[f64], ly: &DVector<f64>, knots: &[usize]) -> Option<(DVector<f64>, f64)> {
    let n = lx.len();
    let design = DMatrix::from_fn(n, 2 + knots.len(), |i, j| match j {
        0 => 1.0,
        1 => lx[i],
        _ => (lx[i] - lx[knots[j - 2]]).max(0.0),
    });
    let coef = design.clone().svd(true, true).solve(ly, 1e-12).ok()?;
    let resid = ly - &design * &coef;
    Some((coef, resid.norm_squared()))
}

/// Continuous piecewise-linear least squares of `log y` on `log x` with
/// `n_segments` segments, knots searched exhaustively over the grid.
pub fn fit_loglog_slopes(xs: &[f64], ys: &[f64], n_segments: usize) -> Result<SlopeFit> {
    if n_segments == 0 {
        return Err(DvcmError::argument("need at least one segment"));
    }
    if xs.len() != ys.len() {
        return Err(DvcmError::argument("x and y grids differ in length"));
    }
    let n = xs.len();
    if n < 2 * n_segments + 2 {
        return Err(DvcmError::argument(format!(
            "{n} grid points cannot support {n_segments} segments; need at least {}",
            2 * n_segments + 2
        )));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DvcmError::argument("x grid must be strictly increasing"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(DvcmError::argument("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly = DVector::from_iterator(n, ys.iter().map(|y| y.ln()));

    // each segment spans at least two grid intervals
    let gap = 2;
    let candidates = knot_sets(gap, n - 1 - gap, n_segments - 1, gap);
    let mut best: Option<(Vec<usize>, DVector<f64>, f64)> = None;
    for knots in candidates {
        if let Some((coef, sse)) = hinge_fit(&lx, &ly, &knots) {
            if best.as_ref().is_none_or(|b| sse < b.2 - 1e-12 * (1.0 + b.2)) {
                best = Some((knots, coef, sse));
            }
        }
    }
    let (knots, coef, sse) =
        best.ok_or_else(|| DvcmError::argument("no admissible breakpoint configuration"))?;
    let mut slopes = Vec::with_capacity(n_segments);
    let mut slope = coef[1];
    slopes.push(slope);
    for j in 0..knots.len() {
        slope += coef[2 + j];
        slopes.push(slope);
    }
    Ok(SlopeFit {
        breakpoints: knots.iter().map(|&i| xs[i]).collect(),
        slopes,
        intercept: coef[0],
        sse,
    })
}

/// The experiment parameter varied by a phase sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VaryParam {
    /// Number of source domains.
    K,
    Gamma,
    /// Per-source sample size.
    N,
}

impl FromStr for VaryParam {
    type Err = DvcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(VaryParam::K),
            "gamma" => Ok(VaryParam::Gamma),
            "n" | "n_bar" => Ok(VaryParam::N),
            other => Err(DvcmError::argument(format!(
                "--vary must be one of K, gamma, n; got `{other}`"
            ))),
        }
    }
}

impl VaryParam {
    pub fn apply(self, cfg: &SimConfig, x: f64) -> Result<SimConfig> {
        let mut out = cfg.clone();
        let as_count = |x: f64| -> Result<usize> {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(DvcmError::argument(format!("grid value {x} is not a positive integer")))
            }
        };
        match self {
            VaryParam::K => out.k = as_count(x)?,
            VaryParam::N => out.n_bar = as_count(x)?,
            VaryParam::Gamma => out.gamma = x,
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub x: f64,
    pub mse: f64,
    pub se: f64,
    pub fail_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub vary: VaryParam,
    pub rows: Vec<PhaseRow>,
    pub fit: SlopeFit,
}

/// Monte-Carlo MSE of the fine-tuned estimator along `grid`, with fitted log-log slopes.
pub fn phase_sweep(cfg: &SimConfig, vary: VaryParam, grid: &[f64], n_segments: usize) -> Result<PhaseResult> {
    if grid.len() < 2 * n_segments + 2 {
        return Err(DvcmError::argument(format!(
            "grid of {} points is too short for {n_segments} segments (need {})",
            grid.len(),
            2 * n_segments + 2
        )));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &x in grid {
        let point = vary.apply(cfg, x)?;
        let run = run_paired(&point, point.bandwidth_rule.spec())?;
        let s = summarize(&run, Estimator::Tl)?;
        rows.push(PhaseRow {
            x,
            mse: s.mse,
            se: s.se,
            fail_count: s.failures,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    let fit = fit_loglog_slopes(&xs, &ys, n_segments)?;
    Ok(PhaseResult { vary, rows, fit })
}

/// Writes the sweep table followed by a segment table, both as CSV.
pub fn write_phase_csv<W: Write>(result: &PhaseResult, mut out: W) -> Result<()> {
    writeln!(out, "x,estimator,mse,se,fail_count")?;
    for r in &result.rows {
        writeln!(out, "{:.16e},tl,{:.16e},{:.16e},{}", r.x, r.mse, r.se, r.fail_count)?;
    }
    writeln!(out)?;
    writeln!(out, "segment,start,slope")?;
    let x0 = result.rows.first().map_or(f64::NAN, |r| r.x);
    for (i, (start, slope)) in result.fit.segments(x0).into_iter().enumerate() {
        writeln!(out, "{i},{start:.16e},{slope:.16e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let xs: Vec<f64> = (1..=8).map(|i| i as f64 * 3.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x.powf(-0.8)).collect();
        let f = fit_loglog_slopes(&xs, &ys, 1).unwrap();
        assert!((f.slopes[0] + 0.8).abs() < 1e-10);
        assert!(f.breakpoints.is_empty());

        let flat = vec![0.3; 8];
        let f = fit_loglog_slopes(&xs, &flat, 1).unwrap();
        assert!(f.slopes[0].abs() < 1e-12);
    }

    #[test]
    fn two_segments_with_knee() {
        let xs: Vec<f64> = (0..12).map(|i| 2f64.powi(i)).collect();
        let knee = 5;
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let l = x.ln();
                let lk = xs[knee].ln();
                (0.5 - 4.0 * (l - lk).max(0.0)).exp()
            })
            .collect();
        let f = fit_loglog_slopes(&xs, &ys, 2).unwrap();
        assert!(f.slopes[0].abs() < 1e-8);
        assert!((f.slopes[1] + 4.0).abs() < 1e-8);
        assert_eq!(f.breakpoints, vec![xs[knee]]);
    }

    #[test]
    fn three_segments_exact() {
        let xs: Vec<f64> = (0..14).map(|i| 1.5f64.powi(i)).collect();
        let (k1, k2) = (4, 9);
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let l = x.ln();
                (-0.5 * l - 3.5 * (l - xs[k1].ln()).max(0.0) + 3.2 * (l - xs[k2].ln()).max(0.0)).exp()
            })
            .collect();
        let f = fit_loglog_slopes(&xs, &ys, 3).unwrap();
        assert_eq!(f.breakpoints, vec![xs[k1], xs[k2]]);
        for (got, want) in f.slopes.iter().zip([-0.5, -4.0, -0.8]) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn input_checks() {
        assert!(fit_loglog_slopes(&[1.0], &[1.0], 1).is_err());
        assert!(fit_loglog_slopes(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0; 5], 2).is_err());
        assert!(fit_loglog_slopes(&[1.0, 1.0, 3.0, 4.0], &[1.0; 4], 1).is_err());
        let cfg = SimConfig::gaussian_default();
        assert!(phase_sweep(&cfg, VaryParam::K, &[5.0], 1).is_err());
        assert!("sigma".parse::<VaryParam>().is_err());
    }

    #[test]
    fn knot_enumeration() {
        let sets = knot_sets(2, 7, 2, 2);
        assert!(sets.iter().all(|s| s[1] >= s[0] + 2 && s[1] <= 7 && s[0] >= 2));
        assert!(sets.contains(&vec![2, 4]) && sets.contains(&vec![5, 7]));
        assert!(!sets.contains(&vec![6, 8]));
    }
}
