//! How the shrinkage matrix moves the fine-tuned estimate between the
//! target-only fit (no shrinkage) and the pooled pilot (infinite shrinkage).

use dvcm::pipeline::{fit_transfer, PenaltyMode, TransferSettings};
use dvcm::simulation::{generate_dataset, true_theta, SimConfig};

fn main() -> dvcm::Result<()> {
    let cfg = SimConfig {
        k: 5,
        n_bar: 120,
        gamma: 1.0,
        ..SimConfig::gaussian_default()
    };
    let truth = true_theta(cfg.theta_spec, cfg.p, cfg.u0);
    let modes = [
        ("zero", PenaltyMode::Zero),
        ("estimated", PenaltyMode::Estimated),
        ("infinite", PenaltyMode::Infinite),
    ];
    let reps = 50;
    let mut sse = [0.0; 3];
    for rep in 0..reps {
        let data = generate_dataset(&cfg, rep);
        let (pilot, fine) = data.target_halves();
        for (slot, (_, mode)) in modes.iter().enumerate() {
            let settings = TransferSettings {
                penalty_mode: mode.clone(),
                ..TransferSettings::default()
            };
            let fit = fit_transfer(&data.sources, &pilot, &fine, cfg.u0, &settings)?;
            sse[slot] += (fit.theta_tl() - &truth).norm_squared();
            if rep == 0 && matches!(mode, PenaltyMode::Estimated) {
                let est = fit.penalty.as_ref().expect("estimated mode keeps its ingredients");
                println!("first replication: scale {:.4}, bias {:.4?}", est.scale, est.bias_vec.as_slice());
                for row in fit.q.row_iter() {
                    println!("  Q row {:.4?}", row.iter().collect::<Vec<_>>());
                }
            }
        }
    }
    for ((name, _), s) in modes.iter().zip(sse) {
        println!("{name:<10} mean squared error {:.5}", s / reps as f64);
    }
    Ok(())
}
