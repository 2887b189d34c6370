//! Recovery from linear measurements with the empirical loss
//! `f(Z) = ½||T(Z) − T(X)||²`, for each measurement ensemble.

use lmr::init::{sample_grd, sample_ground_truth, stream_rng, RandomSpec};
use lmr::losses::{estimate_isometry_constants, make_ensemble, EnsembleKind, LossSpec};
use lmr::optimizer::{run_pgd, PgdConfig};

fn main() -> lmr::error::Result<()> {
    let (n, r) = (30, 2);
    let cases = [
        (EnsembleKind::GaussianSensing, 900, 0.3),
        (EnsembleKind::Completion, 500, 0.2),
        (EnsembleKind::PhaseRetrieval, 1500, 0.05),
    ];
    for (kind, m, alpha) in cases {
        let mut rng = stream_rng(4, kind as u64);
        let x = sample_ground_truth(n, n, &[1.0, 0.6], true, &mut rng)?;
        let ens = make_ensemble(kind, n, n, m, &mut rng)?;
        let spec = RandomSpec {
            n,
            n2: None,
            r,
            sigma_low: 0.5,
            sigma_high: 1.5,
            seed: 4,
            spsd: true,
        };
        let pairs: Vec<_> = (0..50)
            .map(|_| Ok((sample_grd(&spec, &mut rng)?, sample_grd(&spec, &mut rng)?)))
            .collect::<lmr::error::Result<_>>()?;
        let (lo, hi) = estimate_isometry_constants(&ens, &pairs)?;
        let z0 = sample_grd(&spec, &mut rng)?;
        // completion measurements shrink norms by the population scale
        let cfg = PgdConfig {
            alpha: alpha / ens.population_scale().powi(2),
            max_iter: 3000,
            ..PgdConfig::default()
        };
        let out = run_pgd(&LossSpec::empirical(x.clone(), ens)?, &z0, &cfg)?;
        let last = out.record.rows.last().expect("at least one row");
        println!(
            "{kind}: m = {m}, isometry ratios [{lo:.3}, {hi:.3}], {} after {} iterations, relative error {:.2e}",
            if out.record.converged { "converged" } else { "stopped" },
            out.record.final_iter,
            last.err_fro / x.fro_norm()
        );
    }
    Ok(())
}
