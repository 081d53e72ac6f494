//! The two bandwidth rules on one simulated panel: the median rule used
//! for estimation and the undersmoothed rule used for inference.

use dvcm::bandwidth::{select_bandwidth_median, select_bandwidth_undersmoothed};
use dvcm::simulation::{generate_dataset, SimConfig};

fn main() -> dvcm::Result<()> {
    for (k, gamma) in [(5, 5.0), (30, 0.1), (10, 1.0)] {
        let cfg = SimConfig {
            k,
            n_bar: 100,
            gamma,
            ..SimConfig::gaussian_default()
        };
        let data = generate_dataset(&cfg, 0);
        let mut domains = vec![data.target.clone()];
        domains.extend(data.sources);

        let median = select_bandwidth_median(&domains, cfg.u0, 2.0, gamma, 1.0)?;
        let under = select_bandwidth_undersmoothed(&domains, cfg.u0, 2.0, gamma, 1.0, 0.2)?;
        println!("K={k:<3} gamma={gamma:<4} n={}", median.n);
        println!(
            "  median rule   h={:.4}  (rate term {:.4}, d_(1) {:.4}, d_(K) {:.4})",
            median.h, median.rate_term, median.d1, median.dk
        );
        println!("  undersmoothed h={:.4}  feasible={:?}", under.h, under.feasible);
        for note in &under.diagnostics {
            println!("    note: {note}");
        }
    }
    Ok(())
}
