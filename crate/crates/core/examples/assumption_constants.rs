//! Trajectory-wide `L` and `C_u` statistics of rank-5 F1 runs from random
//! starts, summarized by quantiles for a few dimensions.
//!
//! `cargo run --release --example assumption_constants -- [repeats]`

use lmr::cli::batch::{run_one, worker_pool};
use lmr::cli::config::ExperimentConfig;
use lmr::linalg::quantile;
use rayon::prelude::*;

fn main() -> lmr::error::Result<()> {
    let repeats: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(200);
    let pool = worker_pool()?;
    println!("{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "n", "L med", "L 95%", "C_u med", "C_u 95%", "crossed");
    for n in [128, 256, 512] {
        let cfg = ExperimentConfig {
            n,
            r: 5,
            repeats,
            ..ExperimentConfig::default()
        };
        let reports = pool.install(|| {
            (0..repeats)
                .into_par_iter()
                .map(|i| run_one(&cfg, i).map(|run| run.record.assumption_report()))
                .collect::<lmr::error::Result<Vec<_>>>()
        })?;
        let l: Vec<f64> = reports.iter().map(|r| r.l_max).collect();
        let cu: Vec<f64> = reports.iter().map(|r| r.cu_max).collect();
        let crossed = reports.iter().filter(|r| r.crossing_count > 0).count();
        let q = |v: &[f64], p: f64| quantile(v, p).unwrap_or(f64::NAN);
        println!(
            "{n:>6} {:>10.2} {:>10.2} {:>10.3} {:>10.3} {:>10}",
            q(&l, 0.5),
            q(&l, 0.95),
            q(&cu, 0.5),
            q(&cu, 0.95),
            crossed
        );
    }
    Ok(())
}
