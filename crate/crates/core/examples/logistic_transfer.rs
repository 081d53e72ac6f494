//! Transfer learning for a binary response. Pilot, fine-tuning and the
//! target-only fit all run damped Newton iterations.

use dvcm::pipeline::{fit_transfer, TransferSettings};
use dvcm::simulation::{generate_dataset, true_theta, SimConfig};
use dvcm::Family;

fn main() -> dvcm::Result<()> {
    let cfg = SimConfig {
        family: Family::Logistic,
        p: 3,
        k: 10,
        n_bar: 300,
        n0: 150,
        gamma: 0.5,
        ..SimConfig::gaussian_default()
    };
    let truth = true_theta(cfg.theta_spec, cfg.p, cfg.u0);
    let settings = TransferSettings {
        family: Family::Logistic,
        ..TransferSettings::default()
    };
    let reps = 30;
    let (mut lr, mut tl) = (0.0, 0.0);
    for rep in 0..reps {
        let data = generate_dataset(&cfg, rep);
        let (pilot, fine) = data.target_halves();
        let fit = fit_transfer(&data.sources, &pilot, &fine, cfg.u0, &settings)?;
        lr += (&fit.theta_lr - &truth).norm_squared();
        tl += (fit.theta_tl() - &truth).norm_squared();
        if rep == 0 {
            println!("truth {:.3?}", truth.as_slice());
            println!("lr    {:.3?}", fit.theta_lr.as_slice());
            println!("tl    {:.3?}", fit.theta_tl().as_slice());
        }
    }
    println!("mean squared error over {reps} draws: lr {:.4}, tl {:.4}", lr / reps as f64, tl / reps as f64);
    Ok(())
}
