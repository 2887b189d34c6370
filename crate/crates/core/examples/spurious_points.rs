//! The spurious critical points of a rank-3 ground truth and the regions
//! around them in which PGD slows down.

use lmr::diagnostics::{enumerate_spurious, mask_string, spurious_region_test, spurious_residual};
use lmr::init::{sample_ground_truth, stream_rng};
use lmr::manifold::FactoredPoint;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> lmr::error::Result<()> {
    let mut rng = stream_rng(1, 0);
    let n = 12;
    let x = sample_ground_truth(n, n, &[2.0, 1.2, 0.5], true, &mut rng)?;
    let set = enumerate_spurious(&x);
    println!("{} spurious points", set.members.len());
    println!("{:>5} {:>5} {:>10} {:>12}", "mask", "rank", "||Z* - X||", "||P_T(Z*-X)||");
    for m in &set.members {
        println!(
            "{:>5} {:>5} {:>10.4} {:>12.2e}",
            mask_string(&m.mask),
            m.rank(),
            m.point.distance(x.point()),
            spurious_residual(m, &x)?
        );
    }

    // perturb one of them and test membership for growing radii
    let anchor = &set.members[3];
    let noise = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)) * 0.002;
    let z = FactoredPoint::from_dense(&(anchor.point.reconstruct() + noise), x.rank());
    for delta in [0.01, 0.05, 0.2] {
        let t = spurious_region_test(&z, &x, delta)?;
        println!(
            "delta {delta:<5} member {:<5} nearest {} projected error {:.3e}",
            t.member,
            mask_string(&t.nearest),
            t.proj_err
        );
    }
    Ok(())
}
