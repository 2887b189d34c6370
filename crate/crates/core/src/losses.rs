//! Objectives and their Euclidean gradients.
//!
//! `F1(Z) = ½||Z − X||²`, the weakly isometric `F2(Z) = θ/2 (||Z|| − ||X||)² + ||Z − X||²`
//! and the empirical loss `½||T(Z) − y||²` with `T(Z)_j = ⟨A_j, Z⟩/√m`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{FactoredPoint, GroundTruth, LowRankSum, MatrixAction};

/// Upper bound accepted for the `F2` weight θ.
pub const THETA_MAX: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    GaussianSensing,
    Completion,
    PhaseRetrieval,
}

impl std::fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnsembleKind::GaussianSensing => "gaussian_sensing",
            EnsembleKind::Completion => "completion",
            EnsembleKind::PhaseRetrieval => "phase_retrieval",
        })
    }
}

#[derive(Clone, Debug)]
enum Payload {
    /// `(n1·n2) × m`, column `j` is `vec(A_j)` (column-major).
    Dense(DMatrix<f64>),
    /// Same layout in single precision; products accumulate in `f64`.
    Single(SingleMatrix),
    Indices(Vec<(usize, usize)>),
    /// `n × m`, column `j` is `a_j` with `A_j = a_j a_j^T`.
    Vectors(DMatrix<f64>),
}

/// Column-major `f32` storage for large Gaussian ensembles, which are
/// bandwidth bound.
#[derive(Clone, Debug)]
struct SingleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl SingleMatrix {
    fn column(&self, j: usize) -> &[f32] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// `s Aᵀ x`.
    fn tr_mul(&self, s: f64, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.cols,
            (0..self.cols).map(|j| {
                let col = self.column(j);
                let mut acc = [0.0f64; 4];
                let (head, tail) = (col.chunks_exact(4), col.len() / 4 * 4);
                for (c, xs) in head.zip(x.chunks_exact(4)) {
                    for l in 0..4 {
                        acc[l] += c[l] as f64 * xs[l];
                    }
                }
                let mut sum = acc.iter().sum::<f64>();
                for i in tail..col.len() {
                    sum += col[i] as f64 * x[i];
                }
                s * sum
            }),
        )
    }

    /// `s A w`.
    fn mul(&self, s: f64, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0f64; self.rows];
        for (j, &wj) in w.iter().enumerate() {
            let c = s * wj;
            for (o, &a) in out.iter_mut().zip(self.column(j)) {
                *o += c * a as f64;
            }
        }
        out
    }
}

/// The measurement operator `T`.
#[derive(Clone, Debug)]
pub struct MeasurementEnsemble {
    kind: EnsembleKind,
    n1: usize,
    n2: usize,
    payload: Payload,
}

impl MeasurementEnsemble {
    pub fn from_dense(n1: usize, n2: usize, a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != n1 * n2 || a.ncols() == 0 {
            return Err(Error::dims(
                format!("{} × m with m ≥ 1", n1 * n2),
                format!("{} × {}", a.nrows(), a.ncols()),
            ));
        }
        Ok(Self {
            kind: EnsembleKind::GaussianSensing,
            n1,
            n2,
            payload: Payload::Dense(a),
        })
    }

    pub fn from_indices(n1: usize, n2: usize, indices: Vec<(usize, usize)>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::param("m", "need at least one index"));
        }
        if let Some(&(i, k)) = indices.iter().find(|&&(i, k)| i >= n1 || k >= n2) {
            return Err(Error::param(
                "indices",
                format!("({i}, {k}) outside {n1}×{n2}"),
            ));
        }
        Ok(Self {
            kind: EnsembleKind::Completion,
            n1,
            n2,
            payload: Payload::Indices(indices),
        })
    }

    pub fn from_vectors(a: DMatrix<f64>) -> Result<Self> {
        if a.ncols() == 0 {
            return Err(Error::param("m", "need at least one vector"));
        }
        Ok(Self {
            kind: EnsembleKind::PhaseRetrieval,
            n1: a.nrows(),
            n2: a.nrows(),
            payload: Payload::Vectors(a),
        })
    }

    /// Every index of an `n1 × n2` matrix exactly once.
    pub fn full_completion(n1: usize, n2: usize) -> Result<Self> {
        let idx = (0..n2).flat_map(|k| (0..n1).map(move |i| (i, k))).collect();
        Self::from_indices(n1, n2, idx)
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn m(&self) -> usize {
        match &self.payload {
            Payload::Dense(a) => a.ncols(),
            Payload::Single(a) => a.cols,
            Payload::Indices(idx) => idx.len(),
            Payload::Vectors(a) => a.ncols(),
        }
    }

    fn scale(&self) -> f64 {
        1.0 / (self.m() as f64).sqrt()
    }

    /// `sqrt(E||T(D)||² / ||D||²)` for `D` with zero trace; `1/√(n1 n2)` for
    /// uniform completion, `1` otherwise.
    pub fn population_scale(&self) -> f64 {
        match self.kind {
            EnsembleKind::Completion => 1.0 / ((self.n1 * self.n2) as f64).sqrt(),
            _ => 1.0,
        }
    }

    fn check(&self, shape: (usize, usize)) -> Result<()> {
        if shape != (self.n1, self.n2) {
            return Err(Error::dims(
                format!("{}×{}", self.n1, self.n2),
                format!("{}×{}", shape.0, shape.1),
            ));
        }
        Ok(())
    }

    /// `T(Z)` evaluated from the factors.
    pub fn apply(&self, z: &FactoredPoint) -> Result<DVector<f64>> {
        self.check(z.shape())?;
        let s = self.scale();
        let us = z.left() * z.core();
        let out = match &self.payload {
            Payload::Dense(a) => {
                let vz = z.reconstruct();
                let mut y = DVector::zeros(a.ncols());
                y.gemv_tr(s, a, &DVector::from_column_slice(vz.as_slice()), 0.0);
                y
            }
            Payload::Single(a) => a.tr_mul(s, z.reconstruct().as_slice()),
            Payload::Indices(idx) => DVector::from_iterator(
                idx.len(),
                idx.iter()
                    .map(|&(i, k)| s * us.row(i).dot(&z.right().row(k))),
            ),
            Payload::Vectors(a) => {
                let b = a.tr_mul(&us);
                let c = a.tr_mul(z.right());
                DVector::from_iterator(
                    a.ncols(),
                    (0..a.ncols()).map(|j| s * b.row(j).dot(&c.row(j))),
                )
            }
        };
        Ok(out)
    }

    /// `T(Z)` for a dense `Z`.
    pub fn apply_dense(&self, z: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check(z.shape())?;
        let s = self.scale();
        let out = match &self.payload {
            Payload::Dense(a) => {
                let mut y = DVector::zeros(a.ncols());
                y.gemv_tr(s, a, &DVector::from_column_slice(z.as_slice()), 0.0);
                y
            }
            Payload::Single(a) => a.tr_mul(s, z.as_slice()),
            Payload::Indices(idx) => {
                DVector::from_iterator(idx.len(), idx.iter().map(|&(i, k)| s * z[(i, k)]))
            }
            Payload::Vectors(a) => {
                let za = z * a;
                DVector::from_iterator(
                    a.ncols(),
                    (0..a.ncols()).map(|j| s * a.column(j).dot(&za.column(j))),
                )
            }
        };
        Ok(out)
    }

    /// The adjoint `T*(w) = Σ_j w_j A_j / √m`, kept lazy where possible.
    pub fn adjoint(&self, w: &DVector<f64>) -> Result<SensingGradient<'_>> {
        if w.len() != self.m() {
            return Err(Error::dims(format!("length {}", self.m()), format!("length {}", w.len())));
        }
        let s = self.scale();
        let shape = (self.n1, self.n2);
        Ok(match &self.payload {
            Payload::Dense(a) => {
                let mut g = DVector::zeros(a.nrows());
                g.gemv(s, a, w, 0.0);
                SensingGradient::Dense(DMatrix::from_vec(self.n1, self.n2, g.data.into()))
            }
            Payload::Single(a) => SensingGradient::Dense(DMatrix::from_vec(self.n1, self.n2, a.mul(s, w.as_slice()))),
            Payload::Indices(idx) => SensingGradient::Sparse {
                shape,
                entries: idx.iter().zip(w.iter()).map(|(&(i, k), &x)| (i, k, s * x)).collect(),
            },
            Payload::Vectors(a) => SensingGradient::Quadratic {
                vectors: a,
                weights: w * s,
            },
        })
    }
}

/// Draws an ensemble of the given law: Gaussian `A_j` entries, indices
/// uniform with replacement, or Gaussian phase-retrieval vectors.
///
/// Gaussian sensing entries are rounded to `f32` and the rounded values
/// define the operator exactly.
pub fn make_ensemble<R: Rng + ?Sized>(
    kind: EnsembleKind,
    n1: usize,
    n2: usize,
    m: usize,
    rng: &mut R,
) -> Result<MeasurementEnsemble> {
    if m == 0 {
        return Err(Error::param("m", "need at least one measurement"));
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::param("n", "dimensions must be positive"));
    }
    match kind {
        EnsembleKind::GaussianSensing => {
            let data: Vec<f32> = (0..n1 * n2 * m)
                .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
                .collect();
            Ok(MeasurementEnsemble {
                kind,
                n1,
                n2,
                payload: Payload::Single(SingleMatrix {
                    rows: n1 * n2,
                    cols: m,
                    data,
                }),
            })
        }
        EnsembleKind::Completion => {
            let idx = (0..m)
                .map(|_| (rng.random_range(0..n1), rng.random_range(0..n2)))
                .collect();
            MeasurementEnsemble::from_indices(n1, n2, idx)
        }
        EnsembleKind::PhaseRetrieval => {
            if n1 != n2 {
                return Err(Error::param("n", "phase retrieval needs a square shape"));
            }
            let data: Vec<f64> = (0..n1 * m).map(|_| rng.sample(StandardNormal)).collect();
            MeasurementEnsemble::from_vectors(DMatrix::from_vec(n1, m, data))
        }
    }
}

/// `T*(w)` in the cheapest form for each ensemble.
#[derive(Clone, Debug)]
pub enum SensingGradient<'a> {
    Dense(DMatrix<f64>),
    Sparse {
        shape: (usize, usize),
        entries: Vec<(usize, usize, f64)>,
    },
    Quadratic {
        vectors: &'a DMatrix<f64>,
        weights: DVector<f64>,
    },
}

impl MatrixAction for SensingGradient<'_> {
    fn shape(&self) -> (usize, usize) {
        match self {
            SensingGradient::Dense(g) => g.shape(),
            SensingGradient::Sparse { shape, .. } => *shape,
            SensingGradient::Quadratic { vectors, .. } => (vectors.nrows(), vectors.nrows()),
        }
    }

    fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            SensingGradient::Dense(g) => g * v,
            SensingGradient::Sparse { shape, entries } => {
                let mut out = DMatrix::zeros(shape.0, v.ncols());
                for &(i, k, w) in entries {
                    for c in 0..v.ncols() {
                        out[(i, c)] += w * v[(k, c)];
                    }
                }
                out
            }
            SensingGradient::Quadratic { vectors, weights } => {
                let mut b = vectors.tr_mul(v);
                for (mut row, w) in b.row_iter_mut().zip(weights.iter()) {
                    row *= *w;
                }
                *vectors * b
            }
        }
    }

    fn apply_transpose(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            SensingGradient::Dense(g) => g.tr_mul(u),
            SensingGradient::Sparse { shape, entries } => {
                let mut out = DMatrix::zeros(shape.1, u.ncols());
                for &(i, k, w) in entries {
                    for c in 0..u.ncols() {
                        out[(k, c)] += w * u[(i, c)];
                    }
                }
                out
            }
            // symmetric
            SensingGradient::Quadratic { .. } => self.apply(u),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SensingGradient::Dense(g) => g.clone(),
            SensingGradient::Sparse { shape, entries } => {
                let mut out = DMatrix::zeros(shape.0, shape.1);
                for &(i, k, w) in entries {
                    out[(i, k)] += w;
                }
                out
            }
            SensingGradient::Quadratic { vectors, weights } => {
                let mut scaled = (*vectors).clone();
                for (mut col, w) in scaled.column_iter_mut().zip(weights.iter()) {
                    col *= *w;
                }
                scaled * vectors.transpose()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    F1,
    F2 { theta: f64 },
    Empirical,
}

/// A loss together with its ground truth and, for the empirical kind, the
/// ensemble and cached observations `y = T(X)`.
#[derive(Clone, Debug)]
pub struct LossSpec {
    kind: LossKind,
    truth: GroundTruth,
    ensemble: Option<MeasurementEnsemble>,
    y: Option<DVector<f64>>,
}

impl LossSpec {
    pub fn new(kind: LossKind, truth: GroundTruth, ensemble: Option<MeasurementEnsemble>) -> Result<Self> {
        if let LossKind::F2 { theta } = kind {
            if !(theta > 0.0 && theta <= THETA_MAX) {
                return Err(Error::param(
                    "theta",
                    format!("must lie in (0, {THETA_MAX}], got {theta}"),
                ));
            }
        }
        let y = match (kind, &ensemble) {
            (LossKind::Empirical, None) => return Err(Error::MissingEnsemble),
            (LossKind::Empirical, Some(e)) => Some(e.apply(truth.point())?),
            _ => None,
        };
        Ok(Self {
            kind,
            truth,
            ensemble,
            y,
        })
    }

    pub fn f1(truth: GroundTruth) -> Self {
        Self::new(LossKind::F1, truth, None).expect("F1 has no parameters")
    }

    pub fn f2(truth: GroundTruth, theta: f64) -> Result<Self> {
        Self::new(LossKind::F2 { theta }, truth, None)
    }

    pub fn empirical(truth: GroundTruth, ensemble: MeasurementEnsemble) -> Result<Self> {
        Self::new(LossKind::Empirical, truth, Some(ensemble))
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn ensemble(&self) -> Option<&MeasurementEnsemble> {
        self.ensemble.as_ref()
    }

    fn sensing(&self) -> Result<(&MeasurementEnsemble, &DVector<f64>)> {
        match (&self.ensemble, &self.y) {
            (Some(e), Some(y)) => Ok((e, y)),
            _ => Err(Error::MissingEnsemble),
        }
    }

    /// Loss value from the factors; `F1`/`F2` use only `k × k` contractions.
    pub fn value(&self, z: &FactoredPoint) -> Result<f64> {
        let x = self.truth.point();
        if z.shape() != x.shape() {
            return Err(Error::dims(format!("{:?}", x.shape()), format!("{:?}", z.shape())));
        }
        Ok(match self.kind {
            LossKind::F1 => 0.5 * z.distance(x).powi(2),
            LossKind::F2 { theta } => {
                let gap = z.fro_norm() - self.truth.fro_norm();
                0.5 * theta * gap * gap + z.distance(x).powi(2)
            }
            LossKind::Empirical => {
                let (e, y) = self.sensing()?;
                0.5 * (e.apply(z)? - y).norm_squared()
            }
        })
    }

    /// Loss value of a dense matrix, used as an oracle.
    pub fn value_dense(&self, z: &DMatrix<f64>) -> Result<f64> {
        let x = self.truth.point().reconstruct();
        if z.shape() != x.shape() {
            return Err(Error::dims(format!("{:?}", x.shape()), format!("{:?}", z.shape())));
        }
        Ok(match self.kind {
            LossKind::F1 => 0.5 * (z - x).norm_squared(),
            LossKind::F2 { theta } => {
                let gap = z.norm() - x.norm();
                0.5 * theta * gap * gap + (z - x).norm_squared()
            }
            LossKind::Empirical => {
                let (e, y) = self.sensing()?;
                0.5 * (e.apply_dense(z)? - y).norm_squared()
            }
        })
    }

    /// Euclidean gradient at `Z`.
    pub fn gradient(&self, z: &FactoredPoint) -> Result<Gradient<'_>> {
        let x = self.truth.point();
        let shape = x.shape();
        if z.shape() != shape {
            return Err(Error::dims(format!("{shape:?}"), format!("{:?}", z.shape())));
        }
        Ok(match self.kind {
            LossKind::F1 => Gradient::LowRank(LowRankSum::new(shape).with(1.0, z).with(-1.0, x)),
            LossKind::F2 { theta } => {
                let h = z.fro_norm();
                if h == 0.0 {
                    return Err(Error::ZeroNorm("F2 involves ||Z||_F"));
                }
                let coeff = theta * (1.0 - self.truth.fro_norm() / h) + 2.0;
                Gradient::LowRank(LowRankSum::new(shape).with(coeff, z).with(-2.0, x))
            }
            LossKind::Empirical => {
                let (e, y) = self.sensing()?;
                Gradient::Sensing(e.adjoint(&(e.apply(z)? - y))?)
            }
        })
    }

    /// Value and gradient together; the sensing residual is computed once.
    pub fn evaluate(&self, z: &FactoredPoint) -> Result<(f64, Gradient<'_>)> {
        match self.kind {
            LossKind::Empirical => {
                let (e, y) = self.sensing()?;
                e.check(z.shape())?;
                let residual = e.apply(z)? - y;
                Ok((0.5 * residual.norm_squared(), Gradient::Sensing(e.adjoint(&residual)?)))
            }
            _ => Ok((self.value(z)?, self.gradient(z)?)),
        }
    }

    /// Dense Euclidean gradient of a dense matrix.
    pub fn gradient_dense(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.truth.point().reconstruct();
        if z.shape() != x.shape() {
            return Err(Error::dims(format!("{:?}", x.shape()), format!("{:?}", z.shape())));
        }
        Ok(match self.kind {
            LossKind::F1 => z - x,
            LossKind::F2 { theta } => {
                let h = z.norm();
                if h == 0.0 {
                    return Err(Error::ZeroNorm("F2 involves ||Z||_F"));
                }
                z * (theta * (1.0 - x.norm() / h) + 2.0) - x * 2.0
            }
            LossKind::Empirical => {
                let (e, y) = self.sensing()?;
                e.adjoint(&(e.apply_dense(z)? - y))?.to_dense()
            }
        })
    }
}

/// `f(Z)` for any loss kind.
pub fn loss_value(spec: &LossSpec, z: &FactoredPoint) -> Result<f64> {
    spec.value(z)
}

/// `∇f(Z)` for any loss kind.
pub fn euclid_grad<'a>(spec: &'a LossSpec, z: &FactoredPoint) -> Result<Gradient<'a>> {
    spec.gradient(z)
}

/// Euclidean gradient, either a short sum of factored terms or a sensing
/// adjoint.
#[derive(Clone, Debug)]
pub enum Gradient<'a> {
    LowRank(LowRankSum),
    Sensing(SensingGradient<'a>),
}

impl MatrixAction for Gradient<'_> {
    fn shape(&self) -> (usize, usize) {
        match self {
            Gradient::LowRank(g) => g.shape(),
            Gradient::Sensing(g) => g.shape(),
        }
    }

    fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Gradient::LowRank(g) => g.apply(v),
            Gradient::Sensing(g) => g.apply(v),
        }
    }

    fn apply_transpose(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Gradient::LowRank(g) => g.apply_transpose(u),
            Gradient::Sensing(g) => g.apply_transpose(u),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Gradient::LowRank(g) => g.to_dense(),
            Gradient::Sensing(g) => g.to_dense(),
        }
    }
}

/// Population phase-retrieval loss `θ/2 (||Z|| − ||X||)² + c ||Z − X||²`;
/// the real case has `θ = 1, c = 1`, the complex case `c = ½`.
pub fn population_pr_loss(z: &FactoredPoint, x: &FactoredPoint, theta: f64, c: f64) -> f64 {
    let gap = z.fro_norm() - x.fro_norm();
    0.5 * theta * gap * gap + c * z.distance(x).powi(2)
}

/// Smallest and largest `||T(Z') − T(Z)|| / (s ||Z' − Z||)` over the pairs,
/// where `s` is the ensemble's population scale.
pub fn estimate_isometry_constants(
    ensemble: &MeasurementEnsemble,
    pairs: &[(FactoredPoint, FactoredPoint)],
) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    let scale = ensemble.population_scale();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (a, b) in pairs {
        let dist = a.distance(b);
        if dist == 0.0 {
            return Err(Error::param("pairs", "pair of identical matrices"));
        }
        let ratio = (ensemble.apply(a)? - ensemble.apply(b)?).norm() / (scale * dist);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo, hi))
}
