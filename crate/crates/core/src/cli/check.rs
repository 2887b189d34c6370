//! Invariant suite behind the `check` verb: small, fast versions of the
//! library's correctness properties.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::{enumerate_spurious, lojasiewicz_lower_bound, projected_error, spurious_residual};
use crate::error::Result;
use crate::init::{sample_grd, sample_ground_truth, stream_rng, RandomSpec};
use crate::linalg::{fro_inner, svd};
use crate::losses::{make_ensemble, EnsembleKind, LossSpec};
use crate::manifold::{retract, tangent_project, FactoredPoint, GroundTruth};
use crate::ode::{integrate, OdeSystem, ScalarState};
use crate::optimizer::{run_pgd, PgdConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_point(rng: &mut ChaCha8Rng, n1: usize, n2: usize, r: usize) -> Result<FactoredPoint> {
    let spec = RandomSpec {
        n: n1,
        n2: Some(n2),
        r,
        sigma_low: 0.2,
        sigma_high: 2.0,
        seed: 0,
        spsd: false,
    };
    sample_grd(&spec, rng)
}

fn outcome(name: &'static str, worst: f64, tol: f64, what: &str) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst <= tol,
        detail: format!("{what} {worst:.3e} (tol {tol:.0e})"),
    }
}

fn closed_form_trajectory() -> Result<CheckOutcome> {
    let basis = |cols: &[usize]| {
        let mut u = DMatrix::zeros(3, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            u[(c, j)] = 1.0;
        }
        u
    };
    let x = GroundTruth::spsd(basis(&[0, 1]), &[1.0, 1.0])?;
    let z0 = FactoredPoint::from_singular(basis(&[0, 2]), &[1.0, 1.0], basis(&[0, 2]))?;
    let cfg = PgdConfig {
        alpha: 0.1,
        max_iter: 50,
        delta: Some(0.1),
        ..PgdConfig::default()
    };
    let out = run_pgd(&LossSpec::f1(x), &z0, &cfg)?;
    let worst = out
        .record
        .rows
        .iter()
        .map(|row| {
            let q = 0.9f64.powi(row.iter as i32);
            (row.err_fro - (1.0 + q * q).sqrt()).abs()
        })
        .fold(0.0, f64::max);
    Ok(outcome("closed_form_trajectory", worst, 1e-10, "max error deviation"))
}

/// Structured projection against `(I ⊗ P_U + P_V ⊗ I − P_V ⊗ P_U) vec(W)`.
fn projector_oracle(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n1 = rng.random_range(2..=8);
        let n2 = rng.random_range(2..=8);
        let r = rng.random_range(1..=3.min(n1).min(n2));
        let z = random_point(rng, n1, n2, r)?;
        let w = gaussian(rng, n1, n2);
        let pu = z.left() * z.left().transpose();
        let pv = z.right() * z.right().transpose();
        let i1 = DMatrix::<f64>::identity(n1, n1);
        let i2 = DMatrix::<f64>::identity(n2, n2);
        let p = i2.kronecker(&pu) + pv.kronecker(&i1) - pv.kronecker(&pu);
        let vec_w = DMatrix::from_column_slice(n1 * n2, 1, w.as_slice());
        let dense = p * vec_w;
        let structured = tangent_project(&z, &w)?.dense();
        let diff = (DMatrix::from_column_slice(n1, n2, dense.as_slice()) - structured).norm();
        worst = worst.max(diff);
    }
    Ok(outcome("projector_oracle", worst, 1e-10, "max deviation"))
}

fn retraction_vs_dense(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(4..=24);
        let r = rng.random_range(1..=4.min(n / 2));
        let z = random_point(rng, n, n, r)?;
        let xi = tangent_project(&z, &gaussian(rng, n, n))?;
        let alpha = rng.random_range(0.01..0.3);
        let fast = retract(&z, &xi, alpha)?.point.reconstruct();
        let d = svd(&(z.reconstruct() + xi.dense() * alpha));
        let k = r.min(d.s.len());
        let dense = d.u.columns(0, k) * DMatrix::from_diagonal(&d.s.rows(0, k).into_owned()) * d.v.columns(0, k).transpose();
        worst = worst.max((fast - dense).norm());
    }
    Ok(outcome("retraction_vs_dense", worst, 1e-10, "max deviation"))
}

fn lojasiewicz_bounds(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut violations = 0;
    for _ in 0..500 {
        let n = rng.random_range(2..=16);
        let r = rng.random_range(1..=3.min(n));
        let z = random_point(rng, n, n, r)?;
        let d: Vec<f64> = {
            let mut d: Vec<f64> = (0..r).map(|_| rng.random_range(0.2..2.0)).collect();
            d.sort_by(|a, b| b.total_cmp(a));
            d
        };
        let x = sample_ground_truth(n, n, &d, false, rng)?;
        let err2 = z.distance(x.point()).powi(2);
        let proj2 = projected_error(&z, &x)?.powi(2);
        let lower = lojasiewicz_lower_bound(&z, &x) * err2;
        if proj2 < lower - 1e-10 || proj2 > err2 + 1e-10 {
            violations += 1;
        }
    }
    Ok(CheckOutcome {
        name: "lojasiewicz_bounds",
        passed: violations == 0,
        detail: format!("{violations} violations in 500 pairs"),
    })
}

fn gradient_fd(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let (n, r) = (6, 2);
    let eps = 1e-6;
    let mut worst = 0.0f64;
    let truth = sample_ground_truth(n, n, &[1.0, 0.6], true, rng)?;
    let sensing = make_ensemble(EnsembleKind::GaussianSensing, n, n, 60, rng)?;
    let specs = [
        LossSpec::f1(truth.clone()),
        LossSpec::f2(truth.clone(), 1.0)?,
        LossSpec::empirical(truth, sensing)?,
    ];
    for spec in &specs {
        let z = random_point(rng, n, n, r)?.reconstruct();
        let g = spec.gradient_dense(&z)?;
        for _ in 0..20 {
            let h = gaussian(rng, n, n);
            let fd = (spec.value_dense(&(&z + &h * eps))? - spec.value_dense(&(&z - &h * eps))?) / (2.0 * eps);
            let exact = fro_inner(&g, &h);
            worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
        }
    }
    Ok(outcome("gradient_finite_differences", worst, 1e-5, "max relative error"))
}

fn spurious_soundness(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    for r in 1..=4 {
        let d: Vec<f64> = (0..r).map(|i| 2.0 - 0.4 * i as f64).collect();
        let x = sample_ground_truth(10, 10, &d, true, rng)?;
        let set = enumerate_spurious(&x);
        counts_ok &= set.members.len() == (1 << r) - 1;
        for m in &set.members {
            worst = worst.max(spurious_residual(m, &x)?);
        }
    }
    Ok(CheckOutcome {
        name: "spurious_soundness",
        passed: counts_ok && worst <= 1e-10,
        detail: format!("member counts {}, max residual {worst:.3e}", if counts_ok { "ok" } else { "wrong" }),
    })
}

fn ode_fixed_point(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for system in [OdeSystem::Rank1, OdeSystem::PhaseRetrieval { theta: 1.0 }] {
        for _ in 0..20 {
            let s0 = ScalarState::new(rng.random_range(0.2..3.0), rng.random_range(0.05..1.0));
            let end = *integrate(system, s0, 0.01, 60.0)?.last();
            worst = worst.max((end.h - 1.0).abs().max((end.rho - 1.0).abs()));
        }
    }
    Ok(outcome("ode_fixed_point", worst, 1e-6, "max distance to (1, 1)"))
}

/// Runs every check; a check that errors counts as a failure.
pub fn run_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut rng = stream_rng(seed, 0);
    let checks: Vec<(&'static str, Box<dyn FnOnce(&mut ChaCha8Rng) -> Result<CheckOutcome>>)> = vec![
        ("closed_form_trajectory", Box::new(|_| closed_form_trajectory())),
        ("projector_oracle", Box::new(projector_oracle)),
        ("retraction_vs_dense", Box::new(retraction_vs_dense)),
        ("lojasiewicz_bounds", Box::new(lojasiewicz_bounds)),
        ("gradient_finite_differences", Box::new(gradient_fd)),
        ("spurious_soundness", Box::new(spurious_soundness)),
        ("ode_fixed_point", Box::new(ode_fixed_point)),
    ];
    checks
        .into_iter()
        .map(|(name, check)| {
            check(&mut rng).unwrap_or_else(|e| CheckOutcome {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
