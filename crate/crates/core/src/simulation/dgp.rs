use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, StandardNormal};

use super::config::{SimConfig, ThetaSpec};
use crate::design::DomainSample;
use crate::family::Family;

/// Random-stream roles within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    U = 0,
    X = 1,
    Noise = 2,
}

const ROLES: u64 = 4;

/// Offset separating pre-pass replications from the main ones.
pub(crate) const ORACLE_STREAM_OFFSET: u64 = 1 << 40;

/// Independent generator for `(seed, replication, role)`.
pub fn stream(seed: u64, rep: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep * ROLES + role as u64);
    rng
}

fn g(u: f64) -> f64 {
    u.powi(3) * u.signum()
}

/// True coefficient vector `theta(u)` of width `p`.
pub fn true_theta(spec: ThetaSpec, p: usize, u: f64) -> DVector<f64> {
    DVector::from_fn(p, |j, _| match (spec, j) {
        (ThetaSpec::Standard, 0) => -(16.0 * (u - 0.2)).tanh() + g(u),
        (ThetaSpec::Standard, 1) => (5.0 * u + 2.5).exp() / 100.0 - 0.5 + g(u),
        (ThetaSpec::TanhPair, 0 | 1) => (8.0 * (u - 0.2)).tanh(),
        (_, j) => (-0.5f64).powi(j as i32 - 1) * (2.0 * u).exp(),
    })
}

/// One simulated panel: the target with `2 n0` rows and `K` sources.
#[derive(Debug, Clone)]
pub struct SimDataset {
    pub target: DomainSample,
    pub sources: Vec<DomainSample>,
}

impl SimDataset {
    /// The pilot and fine-tuning halves of the target.
    pub fn target_halves(&self) -> (DomainSample, DomainSample) {
        let n = self.target.n();
        let half = n / 2;
        let first: Vec<usize> = (0..half).collect();
        let second: Vec<usize> = (half..n).collect();
        (self.target.select_rows(&first), self.target.select_rows(&second))
    }
}

fn covariate_factor(p: usize, rho: f64) -> DMatrix<f64> {
    let m = p.saturating_sub(1);
    if m == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sigma = DMatrix::from_fn(m, m, |i, j| rho.powi((i as i32 - j as i32).abs()));
    sigma.cholesky().expect("AR(1) covariance is positive definite").l()
}

fn draw_domain(
    cfg: &SimConfig,
    u: f64,
    n: usize,
    factor: &DMatrix<f64>,
    x_rng: &mut ChaCha8Rng,
    noise_rng: &mut ChaCha8Rng,
) -> DomainSample {
    let p = cfg.p;
    let m = p - 1;
    let mut x = DMatrix::zeros(n, p);
    let mut z = DVector::zeros(m);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for v in z.iter_mut() {
            *v = x_rng.sample(StandardNormal);
        }
        let corr = factor * &z;
        for j in 0..m {
            x[(i, j + 1)] = corr[j];
        }
    }
    let theta = true_theta(cfg.theta_spec, p, u);
    let eta = &x * theta;
    let y = DVector::from_fn(n, |i, _| match cfg.family {
        Family::Gaussian => {
            let e: f64 = noise_rng.sample(StandardNormal);
            eta[i] + cfg.noise_sd * e
        }
        Family::Logistic => {
            let prob = Family::Logistic.inverse_link(eta[i]);
            f64::from(u8::from(Bernoulli::new(prob).unwrap().sample(noise_rng)))
        }
        Family::Poisson => {
            let mean = eta[i].exp();
            if mean > 0.0 {
                Poisson::new(mean).unwrap().sample(noise_rng)
            } else {
                0.0
            }
        }
    });
    DomainSample::new(u, x, y).expect("simulated domain is well formed")
}

/// Draws one replication of the data-generating process.
pub fn generate_dataset(cfg: &SimConfig, rep: u64) -> SimDataset {
    let mut u_rng = stream(cfg.seed, rep, StreamRole::U);
    let mut x_rng = stream(cfg.seed, rep, StreamRole::X);
    let mut noise_rng = stream(cfg.seed, rep, StreamRole::Noise);
    let factor = covariate_factor(cfg.p, cfg.cov_rho);

    let target = draw_domain(cfg, cfg.u0, 2 * cfg.n0, &factor, &mut x_rng, &mut noise_rng);
    let sources = (0..cfg.k)
        .map(|_| {
            let u = if cfg.gamma > 0.0 {
                cfg.u0 + cfg.gamma * (u_rng.random::<f64>() - 0.5)
            } else {
                cfg.u0
            };
            draw_domain(cfg, u, cfg.n_bar, &factor, &mut x_rng, &mut noise_rng)
        })
        .collect();
    SimDataset { target, sources }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::fit_dvcm;

    fn small() -> SimConfig {
        SimConfig {
            p: 3,
            k: 4,
            n_bar: 30,
            n0: 10,
            reps: 2,
            ..SimConfig::gaussian_default()
        }
    }

    #[test]
    fn theta_at_point_two() {
        let th = true_theta(ThetaSpec::Standard, 4, 0.2);
        assert!((th[0] - 0.008).abs() < 1e-15);
        let want = 3.5f64.exp() / 100.0 - 0.5 + 0.008;
        assert!((th[1] - want).abs() < 1e-14);
        assert!((th[1] + 0.160845).abs() < 1e-6);
        assert!((th[2] + 0.5 * 0.4f64.exp()).abs() < 1e-15);
        assert!((th[3] - 0.25 * 0.4f64.exp()).abs() < 1e-15);
        let tp = true_theta(ThetaSpec::TanhPair, 2, 0.2);
        assert_eq!(tp[0], 0.0);
        assert_eq!(tp[1], 0.0);
    }

    #[test]
    fn shapes_and_determinism() {
        let cfg = small();
        let a = generate_dataset(&cfg, 3);
        let b = generate_dataset(&cfg, 3);
        assert_eq!(a.target.n(), 20);
        assert_eq!(a.sources.len(), 4);
        assert!(a.sources.iter().all(|d| d.n() == 30 && d.u.abs() <= 0.5));
        assert_eq!(a.target.y, b.target.y);
        assert_eq!(a.sources[2].x, b.sources[2].x);
        let c = generate_dataset(&cfg, 4);
        assert_ne!(a.target.y, c.target.y);
        assert!(a.target.x.column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_gamma_puts_everything_at_target() {
        let cfg = SimConfig { gamma: 0.0, ..small() };
        let d = generate_dataset(&cfg, 0);
        assert!(d.sources.iter().all(|s| s.u == 0.0));
    }

    #[test]
    fn noiseless_gaussian_recovered() {
        let cfg = SimConfig { noise_sd: 0.0, ..small() };
        let d = generate_dataset(&cfg, 1);
        let mut domains = vec![d.target.clone()];
        domains.extend(d.sources.iter().cloned());
        let fit = fit_dvcm(&domains, 0.0, 1e-6, 0, Family::Gaussian).unwrap();
        let truth = true_theta(cfg.theta_spec, cfg.p, 0.0);
        assert!((fit.theta - truth).amax() < 1e-6);
    }

    #[test]
    fn glm_responses_in_support() {
        for family in [Family::Logistic, Family::Poisson] {
            let cfg = SimConfig { family, ..small() };
            let d = generate_dataset(&cfg, 0);
            for v in d.target.y.iter() {
                assert!(*v >= 0.0 && v.fract() == 0.0);
                if family == Family::Logistic {
                    assert!(*v <= 1.0);
                }
            }
        }
    }
}
