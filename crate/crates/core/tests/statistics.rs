//! Distributional checks on the samplers and ensembles, with fixed seeds.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use lmr::init::{sample_grd, sample_rank1_gaussian, sample_stiefel, stream_rng, RandomSpec};
use lmr::losses::{estimate_isometry_constants, make_ensemble, EnsembleKind, MeasurementEnsemble};
use lmr::manifold::FactoredPoint;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn unit(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    &g / g.norm()
}

#[test]
fn square_stiefel_sample_is_orthogonal() {
    let mut rng = stream_rng(1, 0);
    for n in 1..=12 {
        let q = sample_stiefel(n, n, &mut rng).unwrap();
        assert!((q.determinant().abs() - 1.0).abs() < 1e-10);
        assert!((q.tr_mul(&q) - DMatrix::<f64>::identity(n, n)).norm() < 1e-10);
    }
}

#[test]
fn stiefel_law_is_rotation_invariant() {
    // E||u^T Q W||² = r/n for any fixed orthogonal Q.
    let (n, r, samples) = (64, 4, 3000);
    let mut rng = stream_rng(2, 0);
    let u0 = unit(&mut rng, n);
    let q = sample_stiefel(n, n, &mut rng).unwrap();
    for rotate in [false, true] {
        let stats: Vec<f64> = (0..samples)
            .map(|_| {
                let w = sample_stiefel(n, r, &mut rng).unwrap();
                let w = if rotate { &q * w } else { w };
                (u0.transpose() * w).norm_squared()
            })
            .collect();
        let (mean, se) = mean_se(&stats);
        let target = r as f64 / n as f64;
        assert!((mean - target).abs() <= 3.0 * se, "rotate={rotate}: {mean} vs {target} (se {se})");
    }
}

#[test]
fn stiefel_columns_rarely_orthogonal_to_a_fixed_vector() {
    // fraction of columns with |u0^T w_i|² ≥ c / (n ln n); c calibrated to 0.01
    let (n, r, samples) = (256, 5, 1000);
    let c = 0.01;
    let mut rng = stream_rng(3, 0);
    let u0 = unit(&mut rng, n);
    let threshold = c / (n as f64 * (n as f64).ln());
    let mut hits = 0;
    for _ in 0..samples {
        let w = sample_stiefel(n, r, &mut rng).unwrap();
        let proj = u0.transpose() * w;
        hits += proj.iter().filter(|&&p| p * p >= threshold).count();
    }
    let frac = hits as f64 / (samples * r) as f64;
    assert!(frac > 0.9, "fraction {frac}");
}

#[test]
fn grd_singular_values_are_uniform() {
    let spec = RandomSpec {
        n: 64,
        n2: None,
        r: 3,
        sigma_low: 0.5,
        sigma_high: 1.5,
        seed: 4,
        spsd: false,
    };
    let mut rng = spec.rng(0);
    let draws: Vec<Vec<f64>> = (0..10_000)
        .map(|_| sample_grd(&spec, &mut rng).unwrap().core().diagonal().iter().copied().collect())
        .collect();
    for j in 0..3 {
        let col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        let (mean, se) = mean_se(&col);
        assert!((mean - 1.0).abs() <= 3.0 * se, "sigma_{j}: {mean} (se {se})");
        assert!(col.iter().all(|s| (0.5..=1.5).contains(s)));
    }
}

#[test]
fn grd_with_equal_bounds_and_shared_factors() {
    let spec = RandomSpec {
        n: 10,
        n2: None,
        r: 3,
        sigma_low: 1.0,
        sigma_high: 1.0,
        seed: 5,
        spsd: true,
    };
    let z = sample_grd(&spec, &mut spec.rng(0)).unwrap();
    assert_eq!(z.left(), z.right());
    assert!(z.core().diagonal().iter().all(|&s| s == 1.0));
}

#[test]
fn rank_one_start_follows_scaled_chi_square() {
    // n ||Z0|| / c = n ||u0||² ~ χ²(n)
    let (n, c, samples) = (30, 2.0, 4000);
    let mut rng = stream_rng(6, 0);
    let mut stats: Vec<f64> = (0..samples)
        .map(|_| n as f64 * sample_rank1_gaussian(n, c, &mut rng).unwrap().fro_norm() / c)
        .collect();
    let (mean, se) = mean_se(&stats);
    assert!((mean - n as f64).abs() <= 3.0 * se, "{mean} vs {n}");
    stats.sort_by(f64::total_cmp);
    let law = ChiSquared::new(n as f64).unwrap();
    let ks = stats
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (f - i as f64 / samples as f64).abs().max((i as f64 + 1.0) / samples as f64 - f)
        })
        .fold(0.0, f64::max);
    let critical = 1.628 / (samples as f64).sqrt();
    assert!(ks < critical, "KS {ks} vs {critical}");
}

#[test]
fn one_dimensional_rank_one_start() {
    let mut rng = stream_rng(7, 0);
    let z = sample_rank1_gaussian(1, 3.0, &mut rng).unwrap();
    let mut replay = stream_rng(7, 0);
    let g: f64 = replay.sample(StandardNormal);
    assert!((z.reconstruct()[(0, 0)] - 3.0 * g * g).abs() < 1e-12);
}

#[test]
fn gaussian_sensing_preserves_norms_on_average() {
    let (n, m) = (20, 2000);
    let mut rng = stream_rng(8, 0);
    let ratios: Vec<f64> = (0..20)
        .map(|_| {
            let ens = make_ensemble(EnsembleKind::GaussianSensing, n, n, m, &mut rng).unwrap();
            let z = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let z = &z / z.norm();
            ens.apply_dense(&z).unwrap().norm_squared()
        })
        .collect();
    let (mean, _) = mean_se(&ratios);
    assert!((mean - 1.0).abs() <= 0.05, "{mean}");
}

#[test]
fn isometry_constants() {
    let mut rng = stream_rng(9, 0);
    let pair = |rng: &mut rand_chacha::ChaCha8Rng, n: usize, r: usize| {
        let spec = RandomSpec {
            n,
            n2: None,
            r,
            sigma_low: 0.5,
            sigma_high: 1.5,
            seed: 0,
            spsd: false,
        };
        (sample_grd(&spec, rng).unwrap(), sample_grd(&spec, rng).unwrap())
    };

    let full = MeasurementEnsemble::full_completion(6, 6).unwrap();
    let pairs: Vec<(FactoredPoint, FactoredPoint)> = (0..20).map(|_| pair(&mut rng, 6, 2)).collect();
    let (lo, hi) = estimate_isometry_constants(&full, &pairs).unwrap();
    assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);

    let ens = make_ensemble(EnsembleKind::GaussianSensing, 50, 50, 2000, &mut rng).unwrap();
    let pairs: Vec<(FactoredPoint, FactoredPoint)> = (0..500).map(|_| pair(&mut rng, 50, 2)).collect();
    let (lo, hi) = estimate_isometry_constants(&ens, &pairs).unwrap();
    assert!(lo > 0.5 && hi < 1.5 && lo <= hi, "({lo}, {hi})");

    let single = make_ensemble(EnsembleKind::GaussianSensing, 50, 50, 1, &mut rng).unwrap();
    let (lo, _) = estimate_isometry_constants(&single, &pairs).unwrap();
    assert!(lo < 0.1, "{lo}");

    assert!(estimate_isometry_constants(&ens, &[]).is_err());
}
