//! Transfer fit on the bundled wage panel, run through the library API.
//!
//! Experience (age - education - 6) is the domain identifier. After
//! outlier removal and min-max scaling it is cut into ten bins; the bin
//! around `u0 = 0.25` is the target and the others are sources.

use std::path::PathBuf;

use dvcm::dataio::{bin_domains, load_csv, minmax_scale, sigma_filter, split_target};
use dvcm::inference::confidence_intervals;
use dvcm::pipeline::{fit_transfer, TransferSettings};
use dvcm::DomainSample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dvcm::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_wages.csv");
    let x_cols = vec!["education".to_string(), "female".to_string()];
    let table = load_csv(&path, "age - education - 6", &x_cols, "log_wage", true)?;

    let keep = sigma_filter(&table.u(), 3.0)?;
    let table = table.filter_rows(&keep)?;
    let table = table.with_u(&minmax_scale(&table.u())?)?;
    let panel = bin_domains(&table, 10)?;
    let u0 = 0.25;
    let (target, sources) = panel.split_target_domain(u0)?;
    println!(
        "{} rows kept, target bin holds {}, {} source bins",
        table.n,
        target.n(),
        sources.len()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let parts = split_target(&target, &[1.0 / 3.0; 3], &mut rng)?;
    let fit = fit_transfer(&sources, &parts[0], &parts[1], u0, &TransferSettings::default())?;

    println!("bandwidth h = {:.4} ({:?})", fit.bandwidth.h, fit.bandwidth.rule);
    let ci = confidence_intervals(fit.theta_tl(), &fit.covariance.sigma_tl, 0.95)?;
    let names = ["intercept", "education", "female"];
    println!("{:<10} {:>9} {:>9} {:>9}   95% interval", "", "lr", "dvcm", "tl");
    for (j, name) in names.iter().enumerate() {
        println!(
            "{name:<10} {:>9.4} {:>9.4} {:>9.4}   [{:.4}, {:.4}]",
            fit.theta_lr[j],
            fit.theta_dvcm()[j],
            fit.theta_tl()[j],
            ci[j].0,
            ci[j].1
        );
    }

    let test: &DomainSample = &parts[2];
    let mse = |theta: &nalgebra::DVector<f64>| (&test.y - &test.x * theta).norm_squared() / test.n() as f64;
    println!(
        "held-out squared error: lr {:.4}, dvcm {:.4}, tl {:.4}",
        mse(&fit.theta_lr),
        mse(fit.theta_dvcm()),
        mse(fit.theta_tl())
    );
    Ok(())
}
