//! MSE of the fine-tuned estimator as the number of sources grows, with a
//! piecewise-linear fit on the log-log scale.

use dvcm::simulation::{phase_sweep, write_phase_csv, PenaltyChoice, SimConfig, VaryParam};

fn main() -> dvcm::Result<()> {
    let cfg = SimConfig {
        p: 2,
        k: 1,
        n_bar: 500,
        n0: 30,
        gamma: 0.1,
        reps: 40,
        seed: 5,
        penalty: PenaltyChoice::Oracle,
        oracle_reps: 100,
        ..SimConfig::gaussian_default()
    };
    let grid = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0];
    let result = phase_sweep(&cfg, VaryParam::K, &grid, 3)?;
    for row in &result.rows {
        println!("K={:<4} mse {:.3e} (se {:.1e})", row.x, row.mse, row.se);
    }
    println!("slopes {:?} at breakpoints {:?}", result.fit.slopes, result.fit.breakpoints);
    write_phase_csv(&result, std::io::stdout().lock())
}
