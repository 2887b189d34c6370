//! How long rank-one PGD takes to align with `X` as the dimension grows,
//! next to the hitting times of the limiting `(h, ρ)` flow.

use lmr::cli::batch::worker_pool;
use lmr::cli::config::ExperimentConfig;
use lmr::cli::sweep::{sweep, SweepParam};
use lmr::ode::{integrate, OdeSystem, ScalarState};

fn main() -> lmr::error::Result<()> {
    let ns = [64.0, 128.0, 256.0, 512.0, 1024.0];
    let base = ExperimentConfig {
        r: 1,
        repeats: 100,
        alpha: 0.3,
        ..ExperimentConfig::default()
    };
    let report = sweep(&base, SweepParam::N, &ns, &worker_pool()?)?;
    println!("{:>6} {:>10} {:>14} {:>10}", "n", "success", "iters to rho", "ODE time");
    for row in &report.rows {
        let ode = integrate(OdeSystem::Rank1, ScalarState::new(1.0, 1.0 / row.value), 1e-3, 30.0)?;
        println!(
            "{:>6} {:>10.2} {:>14.3} {:>10.4}",
            row.value,
            row.stats.success_rate(),
            row.stats.median_iters_rho.unwrap_or(f64::NAN),
            ode.hitting_time(0.99).unwrap_or(f64::NAN)
        );
    }
    if let Some((a, b, r2)) = report.log_fit_rho {
        println!("iters to rho = {a:.3} + {b:.3} ln n (R² {r2:.3})");
    }
    Ok(())
}
