//! PGD on `½||Z − X||²` from a start that lies on the stable branch of a
//! spurious critical point: `X = diag(1, 1, 0)`, `Z0 = diag(1, 0, 1)`.
//!
//! The iterates stay at `diag(1, 0, 0.9^k)` and never leave the ball around
//! `diag(1, 0, 0)`.

use lmr::diagnostics::{mask_string, spurious_region_test};
use lmr::losses::LossSpec;
use lmr::manifold::{FactoredPoint, GroundTruth};
use lmr::optimizer::{run_pgd, PgdConfig};
use nalgebra::DMatrix;

fn basis(cols: &[usize]) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(3, cols.len());
    for (j, &c) in cols.iter().enumerate() {
        u[(c, j)] = 1.0;
    }
    u
}

fn main() -> lmr::error::Result<()> {
    let x = GroundTruth::spsd(basis(&[0, 1]), &[1.0, 1.0])?;
    let z0 = FactoredPoint::from_singular(basis(&[0, 2]), &[1.0, 1.0], basis(&[0, 2]))?;
    let cfg = PgdConfig {
        alpha: 0.1,
        max_iter: 60,
        delta: Some(0.1),
        ..PgdConfig::default()
    };
    let out = run_pgd(&LossSpec::f1(x.clone()), &z0, &cfg)?;
    println!("{:>4} {:>12} {:>12} {:>12}  stage", "k", "err", "closed form", "||P_T(Z-X)||");
    for row in out.record.rows.iter().step_by(5) {
        let q = 0.9f64.powi(row.iter as i32);
        println!(
            "{:>4} {:>12.9} {:>12.9} {:>12.3e}  {}",
            row.iter,
            row.err_fro,
            (1.0 + q * q).sqrt(),
            row.proj_err,
            row.stage
        );
    }
    let test = spurious_region_test(&out.point, &x, 0.1)?;
    println!(
        "final point: member {} of the ball around mask {}, distance to X {:.6}",
        test.member,
        mask_string(&test.nearest),
        test.err
    );
    Ok(())
}
