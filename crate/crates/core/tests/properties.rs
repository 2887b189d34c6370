use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lmr::diagnostics::{angle_spectrum, lojasiewicz_lower_bound, lojasiewicz_ratio, spurious_region_test, subset_truncation};
use lmr::init::{sample_grd, sample_ground_truth, stream_rng, RandomSpec};
use lmr::linalg::{fro_inner, svd};
use lmr::losses::{make_ensemble, population_pr_loss, EnsembleKind, LossSpec};
use lmr::manifold::{retract, tangent_project, FactoredPoint, GroundTruth, MatrixAction};
use lmr::ode::{assemble_flow_derivative, factored_flow_derivative, integrate, OdeSystem, ScalarState};
use lmr::optimizer::{run_pgd, PgdConfig};

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn point(rng: &mut ChaCha8Rng, n1: usize, n2: usize, r: usize, spsd: bool) -> FactoredPoint {
    let spec = RandomSpec {
        n: n1,
        n2: Some(n2),
        r,
        sigma_low: 0.2,
        sigma_high: 2.0,
        seed: 0,
        spsd,
    };
    sample_grd(&spec, rng).unwrap()
}

fn truth(rng: &mut ChaCha8Rng, n: usize, r: usize) -> GroundTruth {
    let mut d: Vec<f64> = (0..r).map(|_| rng.random_range(0.3..2.0)).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    sample_ground_truth(n, n, &d, true, rng).unwrap()
}

/// `(n1, n2, r, seed)` with `r ≤ min(n1, n2)`.
fn shape(max_n: usize, max_r: usize) -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1..=max_n, 1..=max_n, any::<u64>()).prop_flat_map(move |(n1, n2, seed)| {
        (Just(n1), Just(n2), 1..=max_r.min(n1).min(n2), Just(seed))
    })
}

fn best_rank(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let eig = (m.transpose() * m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let v = eig.eigenvectors.select_columns(order.iter().take(r));
    m * &v * v.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(64)
    })]

    #[test]
    fn projection_is_idempotent((n1, n2, r, seed) in shape(10, 4)) {
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n1, n2, r, false);
        let once = tangent_project(&z, &gaussian(&mut rng, n1, n2)).unwrap().dense();
        let twice = tangent_project(&z, &once).unwrap().dense();
        prop_assert!((twice - &once).norm() <= 1e-10);
    }

    #[test]
    fn projection_is_self_adjoint((n1, n2, r, seed) in shape(10, 4)) {
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n1, n2, r, false);
        let w1 = gaussian(&mut rng, n1, n2);
        let w2 = gaussian(&mut rng, n1, n2);
        let a = fro_inner(&tangent_project(&z, &w1).unwrap().dense(), &w2);
        let b = fro_inner(&w1, &tangent_project(&z, &w2).unwrap().dense());
        prop_assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn projection_does_not_expand((n1, n2, r, seed) in shape(10, 4)) {
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n1, n2, r, false);
        let w = gaussian(&mut rng, n1, n2);
        prop_assert!(tangent_project(&z, &w).unwrap().fro_norm() <= w.norm() + 1e-12);
    }

    #[test]
    fn retraction_is_best_rank_r(r in 1usize..=5, extra in 0usize..=40, alpha in 0.001f64..1.0, seed in any::<u64>()) {
        let n = 2 * r + extra;
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n, n, r, false);
        let xi = tangent_project(&z, &gaussian(&mut rng, n, n)).unwrap();
        let got = retract(&z, &xi, alpha).unwrap();
        prop_assert!(!got.collapsed);
        let oracle = best_rank(&(z.reconstruct() + xi.dense() * alpha), r);
        prop_assert!((got.point.reconstruct() - oracle).norm() <= 1e-10);
    }

    #[test]
    fn retraction_is_first_order((n1, n2, r, seed) in shape(12, 3)) {
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n1, n2, r, false);
        let xi = tangent_project(&z, &gaussian(&mut rng, n1, n2)).unwrap();
        prop_assume!(xi.fro_norm() > 1e-3);
        let ratios: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&a| {
                let moved = retract(&z, &xi, a).unwrap().point.reconstruct();
                (moved - (z.reconstruct() + xi.dense() * a)).norm() / a
            })
            .collect();
        // ||R(Z, aξ) - Z - aξ|| / a = O(a) once a is small; at a = 0.1 the
        // second-order term may not have settled yet
        for w in ratios[1..].windows(2) {
            prop_assert!(w[1] <= 0.2 * w[0] + 1e-9, "{ratios:?}");
        }
        prop_assert!(ratios[4] <= 1e-3, "{ratios:?}");
    }

    #[test]
    fn singular_values_are_lipschitz((n1, n2, r, seed) in shape(10, 4)) {
        let mut rng = stream_rng(seed, 0);
        let a = gaussian(&mut rng, n1, n2);
        let b = &a + point(&mut rng, n1, n2, r, false).reconstruct() * 0.3;
        let (sa, sb) = (svd(&a).s, svd(&b).s);
        prop_assert!((sa - sb).norm() <= (a - b).norm() + 1e-12);
    }

    #[test]
    fn svd_reconstructs_low_rank_products((n1, n2, r, seed) in shape(40, 6)) {
        let mut rng = stream_rng(seed, 0);
        let m = gaussian(&mut rng, n1, r) * gaussian(&mut rng, r, n2);
        let d = svd(&m);
        let back = &d.u * DMatrix::from_diagonal(&d.s) * d.v.transpose();
        prop_assert!((back - &m).norm() <= 1e-12 * m.norm().max(1.0));
        prop_assert!(d.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sensing_operators_are_linear(kind in prop_oneof![
        Just(EnsembleKind::GaussianSensing),
        Just(EnsembleKind::Completion),
        Just(EnsembleKind::PhaseRetrieval)
    ], seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let n = 7;
        let ens = make_ensemble(kind, n, n, 50, &mut rng).unwrap();
        let (a, b) = (gaussian(&mut rng, n, n), gaussian(&mut rng, n, n));
        let (s, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let lhs = ens.apply_dense(&(&a * s + &b * t)).unwrap();
        let rhs = ens.apply_dense(&a).unwrap() * s + ens.apply_dense(&b).unwrap() * t;
        prop_assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn factored_losses_match_dense(n in 2usize..12, r in 1usize..=2, theta in 0.1f64..4.0, seed in any::<u64>()) {
        let r = r.min(n);
        let mut rng = stream_rng(seed, 0);
        let x = truth(&mut rng, n, r);
        let z = point(&mut rng, n, n, r, true);
        for spec in [LossSpec::f1(x.clone()), LossSpec::f2(x.clone(), theta).unwrap()] {
            let f = spec.value(&z).unwrap();
            let g = spec.value_dense(&z.reconstruct()).unwrap();
            prop_assert!((f - g).abs() <= 1e-10 * f.max(1.0));
        }
    }

    #[test]
    fn factored_sensing_gradient_matches_dense(kind in prop_oneof![
        Just(EnsembleKind::GaussianSensing),
        Just(EnsembleKind::Completion),
        Just(EnsembleKind::PhaseRetrieval)
    ], seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let (n, r) = (6, 2);
        let x = truth(&mut rng, n, r);
        let ens = make_ensemble(kind, n, n, 40, &mut rng).unwrap();
        let spec = LossSpec::empirical(x, ens).unwrap();
        let z = point(&mut rng, n, n, r, true);
        let factored = spec.gradient(&z).unwrap().to_dense();
        let dense = spec.gradient_dense(&z.reconstruct()).unwrap();
        prop_assert!((factored - dense).norm() <= 1e-10);
        let (value, _) = spec.evaluate(&z).unwrap();
        prop_assert!((value - spec.value(&z).unwrap()).abs() <= 1e-12 * value.max(1.0));
    }

    #[test]
    fn population_sandwich(n in 1usize..30, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n, n, 1, true);
        let x = point(&mut rng, n, n, 1, true);
        let d2 = z.distance(&x).powi(2);
        let real = population_pr_loss(&z, &x, 1.0, 1.0);
        let complex = population_pr_loss(&z, &x, 1.0, 0.5);
        prop_assert!(d2 <= real + 1e-12 && real <= 1.5 * d2 + 1e-12);
        prop_assert!(0.5 * d2 <= complex + 1e-12 && complex <= d2 + 1e-12);
    }

    #[test]
    fn projected_error_bounds((n, _, r, seed) in shape(16, 3)) {
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n, n, r, false);
        let x = truth(&mut rng, n, r);
        let ratio = lojasiewicz_ratio(&z, &x).unwrap();
        prop_assert!(ratio <= 1.0 + 1e-12);
        prop_assert!(ratio * ratio >= lojasiewicz_lower_bound(&z, &x) - 1e-10);
    }

    #[test]
    fn angle_spectrum_is_in_unit_interval((n, _, r, seed) in shape(16, 4)) {
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n, n, r, true);
        let x = truth(&mut rng, n, r);
        let (spec, _) = angle_spectrum(&z, &x);
        prop_assert!(spec.iter().all(|&v| (-1e-12..=1.0 + 1e-8).contains(&v)));
        prop_assert!(spec.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn region_membership_grows_with_delta(r in 1usize..=3, scale in 0.0f64..0.3, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let n = 8;
        let x = truth(&mut rng, n, r);
        let mask: Vec<bool> = (0..r).map(|i| i + 1 < r).collect();
        let base = subset_truncation(&x, &mask);
        let z = FactoredPoint::from_dense(&(base.reconstruct() + gaussian(&mut rng, n, n) * (scale / n as f64)), r);
        let half = x.d_min() / 2.0;
        let members: Vec<bool> = [0.02, 0.1, 0.3, 0.6, 0.99]
            .iter()
            .map(|&f| spurious_region_test(&z, &x, f * half).unwrap().member)
            .collect();
        for w in members.windows(2) {
            prop_assert!(!w[0] || w[1], "{members:?}");
        }
    }

    #[test]
    fn flow_derivative_matches_projection((n1, n2, r, seed) in shape(10, 3)) {
        let mut rng = stream_rng(seed, 0);
        let z = point(&mut rng, n1, n2, r, false);
        let m = gaussian(&mut rng, n1, n2);
        let (du, ds, dv) = factored_flow_derivative(&z, &m).unwrap();
        let assembled = assemble_flow_derivative(&z, &du, &ds, &dv);
        let projected = tangent_project(&z, &m).unwrap().dense();
        prop_assert!((assembled - projected).norm() <= 1e-10 * m.norm().max(1.0));
    }

    #[test]
    fn rho_never_decreases(h0 in 0.05f64..3.0, rho0 in 1e-4f64..1.0, theta in 0.1f64..4.0, pr in any::<bool>()) {
        let system = if pr { OdeSystem::PhaseRetrieval { theta } } else { OdeSystem::Rank1 };
        let traj = integrate(system, ScalarState::new(h0, rho0), 1e-2, 20.0).unwrap();
        for w in traj.states.windows(2) {
            prop_assert!(w[1].rho >= w[0].rho - 1e-12);
            prop_assert!(w[1].h > 0.0);
        }
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    for system in [OdeSystem::Rank1, OdeSystem::PhaseRetrieval { theta: 1.0 }] {
        let s0 = ScalarState::new(0.7, 0.2);
        let end = |dt: f64| *integrate(system, s0, dt, 2.0).unwrap().last();
        let reference = end(1e-4);
        let err = |dt: f64| {
            let e = end(dt);
            (e.h - reference.h).abs().max((e.rho - reference.rho).abs())
        };
        let ratio = err(0.04) / err(0.02);
        assert!((12.0..20.0).contains(&ratio), "{system:?}: ratio {ratio}");
    }
}

#[test]
fn positive_alignment_flows_to_ground_truth() {
    let mut rng = stream_rng(77, 0);
    for system in [OdeSystem::Rank1, OdeSystem::PhaseRetrieval { theta: 1.0 }] {
        for _ in 0..100 {
            let s0 = ScalarState::new(rng.random_range(0.05..3.0), rng.random_range(1e-3..1.0));
            let end = *integrate(system, s0, 0.01, 80.0).unwrap().last();
            assert!((end.h - 1.0).abs() < 1e-6 && (end.rho - 1.0).abs() < 1e-6, "{system:?} {s0:?} -> {end:?}");
        }
    }
}

#[test]
fn runs_are_bitwise_reproducible() {
    let go = || {
        let mut rng = stream_rng(5, 3);
        let x = truth(&mut rng, 20, 3);
        let spec = LossSpec::empirical(x, make_ensemble(EnsembleKind::GaussianSensing, 20, 20, 400, &mut rng).unwrap()).unwrap();
        let z0 = point(&mut rng, 20, 20, 3, true);
        run_pgd(&spec, &z0, &PgdConfig { max_iter: 60, ..PgdConfig::default() }).unwrap()
    };
    let (a, b) = (go(), go());
    assert_eq!(a.record.rows, b.record.rows);
    assert_eq!(a.point, b.point);
}

#[test]
fn f1_error_shrinks_near_ground_truth() {
    let mut rng = stream_rng(21, 0);
    let x = truth(&mut rng, 4, 1);
    let spec = LossSpec::f1(x.clone());
    let z0 = FactoredPoint::from_dense(&(x.point().reconstruct() + gaussian(&mut rng, 4, 4) * 0.05), 1);
    let out = run_pgd(&spec, &z0, &PgdConfig { alpha: 0.3, ..PgdConfig::default() }).unwrap();
    assert!(out.record.converged);
    for w in out.record.rows.windows(2) {
        assert!(w[1].err_fro <= w[0].err_fro * (1.0 + 1e-12));
    }
}
