//! Random initializations: uniform Stiefel factors and random-spectrum points.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::manifold::{FactoredPoint, GroundTruth};

/// Parameters of the random-spectrum distribution `V1 Σ V2^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSpec {
    pub n: usize,
    /// Column dimension when it differs from `n`.
    pub n2: Option<usize>,
    pub r: usize,
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub seed: u64,
    /// Sample `V1 = V2`.
    pub spsd: bool,
}

impl RandomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.n < self.r {
            return Err(Error::param(
                "r",
                format!("need n ≥ r ≥ 1, got n = {}, r = {}", self.n, self.r),
            ));
        }
        if self.spsd && self.cols() != self.n {
            return Err(Error::param("spsd", "symmetric samples need a square shape"));
        }
        if self.cols() < self.r {
            return Err(Error::param("n2", format!("need n2 ≥ r, got {}", self.cols())));
        }
        // C1 = C2 is allowed so that fixed spectra can be drawn
        if !(self.sigma_low >= 0.0) || !(self.sigma_high >= self.sigma_low) || !self.sigma_high.is_finite() {
            return Err(Error::param(
                "sigma",
                format!("need 0 ≤ low ≤ high, got [{}, {}]", self.sigma_low, self.sigma_high),
            ));
        }
        Ok(())
    }

    pub fn cols(&self) -> usize {
        self.n2.unwrap_or(self.n)
    }

    /// Generator for the `stream`-th run of this spec.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        stream_rng(self.seed, stream)
    }
}

/// Seeded generator; distinct `stream` values give independent sequences.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    // column-major fill keeps the draw order independent of nalgebra internals
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Uniform sample from the Stiefel manifold `St(n, r)` as `G (G^T G)^{-1/2}`,
/// computed as the polar factor `P Q^T` of `G = P Σ Q^T`.
pub fn sample_stiefel<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if r > n {
        return Err(Error::dims(format!("r ≤ n = {n}"), format!("r = {r}")));
    }
    if r == 0 {
        return Ok(DMatrix::zeros(n, 0));
    }
    loop {
        let g = gaussian_matrix(n, r, 1.0 / (n as f64).sqrt(), rng);
        let d = svd(&g);
        let min_sv = d.s[r - 1];
        if min_sv > 1e-6 * d.s[0] {
            // forming the Gram matrix squares its condition number and costs
            // orthonormality for small n
            return Ok(d.u * d.v.transpose());
        }
        log::warn!("near-singular Gaussian draw in Stiefel sampling (σ_min {min_sv:e}); resampling");
    }
}

/// Draws `V1 diag(σ) V2^T` with `σ_j` i.i.d. uniform on `[C1, C2]`.
///
/// The core keeps the draw order; call [`FactoredPoint::normalize`] for a
/// sorted core.
pub fn sample_grd<R: Rng + ?Sized>(spec: &RandomSpec, rng: &mut R) -> Result<FactoredPoint> {
    spec.validate()?;
    let v1 = sample_stiefel(spec.n, spec.r, rng)?;
    let v2 = if spec.spsd {
        v1.clone()
    } else {
        sample_stiefel(spec.cols(), spec.r, rng)?
    };
    let sigma: Vec<f64> = if spec.sigma_low == spec.sigma_high {
        vec![spec.sigma_low; spec.r]
    } else {
        let dist = Uniform::new_inclusive(spec.sigma_low, spec.sigma_high)
            .map_err(|e| Error::param("sigma", e.to_string()))?;
        (0..spec.r).map(|_| rng.sample(dist)).collect()
    };
    FactoredPoint::from_singular(v1, &sigma, v2)
}

/// `Z0 = c u0 u0^T` with `u0 ~ N(0, I_n / n)`.
pub fn sample_rank1_gaussian<R: Rng + ?Sized>(n: usize, c: f64, rng: &mut R) -> Result<FactoredPoint> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param("c", format!("scale must be positive, got {c}")));
    }
    loop {
        let u0 = gaussian_matrix(n, 1, 1.0 / (n as f64).sqrt(), rng);
        let norm2 = u0.norm_squared();
        if norm2 > 0.0 {
            let v = &u0 / norm2.sqrt();
            return FactoredPoint::from_singular(v.clone(), &[c * norm2], v);
        }
    }
}

/// Random ground truth with the given singular values and Stiefel factors.
pub fn sample_ground_truth<R: Rng + ?Sized>(
    n1: usize,
    n2: usize,
    d: &[f64],
    spsd: bool,
    rng: &mut R,
) -> Result<GroundTruth> {
    let u = sample_stiefel(n1, d.len(), rng)?;
    if spsd {
        if n1 != n2 {
            return Err(Error::param("spsd", "symmetric truth needs a square shape"));
        }
        GroundTruth::spsd(u, d)
    } else {
        let v = sample_stiefel(n2, d.len(), rng)?;
        GroundTruth::new(u, d, v)
    }
}

/// Evenly spaced spectrum from `1` down to `low`, the default ground truth.
pub fn linear_spectrum(r: usize, low: f64) -> Vec<f64> {
    if r == 1 {
        return vec![1.0];
    }
    let step = (1.0 - low) / (r - 1) as f64;
    (0..r).map(|j| 1.0 - step * j as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;

    #[test]
    fn square_stiefel_is_orthogonal() {
        let mut rng = stream_rng(7, 0);
        let q = sample_stiefel(6, 6, &mut rng).unwrap();
        assert!(orthonormality_defect(&q) < 1e-12);
        assert!((q.determinant().abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn equal_bounds_give_fixed_spectrum() {
        let spec = RandomSpec {
            n: 10,
            n2: None,
            r: 3,
            sigma_low: 1.0,
            sigma_high: 1.0,
            seed: 1,
            spsd: false,
        };
        let z = sample_grd(&spec, &mut spec.rng(0)).unwrap();
        assert_eq!(z.core().diagonal().as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn spsd_factors_are_identical() {
        let spec = RandomSpec {
            n: 12,
            n2: None,
            r: 2,
            sigma_low: 0.5,
            sigma_high: 1.5,
            seed: 3,
            spsd: true,
        };
        let z = sample_grd(&spec, &mut spec.rng(4)).unwrap();
        assert_eq!(z.left(), z.right());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = sample_stiefel(5, 2, &mut stream_rng(9, 1)).unwrap();
        let b = sample_stiefel(5, 2, &mut stream_rng(9, 1)).unwrap();
        let c = sample_stiefel(5, 2, &mut stream_rng(9, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn scalar_rank1_is_scaled_square() {
        let mut rng = stream_rng(11, 0);
        let mut twin = stream_rng(11, 0);
        let z = sample_rank1_gaussian(1, 2.5, &mut rng).unwrap();
        let g: f64 = twin.sample(StandardNormal);
        assert!((z.reconstruct()[(0, 0)] - 2.5 * g * g).abs() < 1e-14);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = RandomSpec {
            n: 2,
            n2: None,
            r: 3,
            sigma_low: 0.5,
            sigma_high: 1.5,
            seed: 0,
            spsd: true,
        };
        assert!(spec.validate().is_err());
        spec.r = 1;
        spec.sigma_high = 0.1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn linear_spectrum_endpoints() {
        assert_eq!(linear_spectrum(1, 0.5), vec![1.0]);
        let d = linear_spectrum(3, 0.5);
        assert_eq!(d, vec![1.0, 0.75, 0.5]);
    }
}
