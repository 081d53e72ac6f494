//! Standard errors, confidence intervals, a Wald test and a linear contrast
//! for the fine-tuned estimate.

use dvcm::inference::{confidence_intervals, contrast_test, standard_errors, wald_test};
use dvcm::pipeline::{fit_transfer, TransferSettings};
use dvcm::bandwidth::BandwidthSpec;
use dvcm::simulation::{generate_dataset, true_theta, SimConfig};
use nalgebra::DVector;

fn main() -> dvcm::Result<()> {
    let cfg = SimConfig {
        k: 30,
        n_bar: 100,
        gamma: 0.1,
        ..SimConfig::gaussian_default()
    };
    let data = generate_dataset(&cfg, 3);
    let (pilot, fine) = data.target_halves();
    let settings = TransferSettings {
        bandwidth: BandwidthSpec::Undersmooth,
        ..TransferSettings::default()
    };
    let fit = fit_transfer(&data.sources, &pilot, &fine, cfg.u0, &settings)?;
    let theta = fit.theta_tl();
    let sigma = &fit.covariance.sigma_tl;
    let truth = true_theta(cfg.theta_spec, cfg.p, cfg.u0);

    let se = standard_errors(sigma);
    let ci = confidence_intervals(theta, sigma, 0.95)?;
    for j in 0..theta.len() {
        println!(
            "theta_{j}: {:.4} (se {:.4})  95% [{:.4}, {:.4}]  truth {:.4}",
            theta[j], se[j], ci[j].0, ci[j].1, truth[j]
        );
    }

    let at_truth = wald_test(theta, sigma, &truth)?;
    println!("Wald at the truth: stat {:.3} on {} df, p = {:.3}", at_truth.statistic, at_truth.df, at_truth.p_value);
    let at_zero = wald_test(theta, sigma, &DVector::zeros(cfg.p))?;
    println!("Wald at zero:      stat {:.3}, p = {:.3e}", at_zero.statistic, at_zero.p_value);

    // is the first slope equal to the second?
    let v = DVector::from_vec(vec![0.0, 1.0, -1.0, 0.0]);
    let c = contrast_test(theta, sigma, &v, 0.0)?;
    println!("theta_1 - theta_2 = 0: z = {:.3}, p = {:.3}", c.z, c.p_value);
    Ok(())
}
