//! Geometry of the fixed-rank matrix manifold `M_r`.
//!
//! Points are stored in factored form `Z = U S V^T` with orthonormal `U`
//! (`n1 × k`), `V` (`n2 × k`) and a square core `S`. The stored width `k` is
//! the rank of the point; a point whose rank fell below the optimizer's
//! target rank lives in the closure of `M_r`, where the tangent space is
//! replaced by the tangent cone.
//!
//! The retraction is the metric projection onto `M_r` (best rank-`r`
//! Frobenius approximation). For a tangent vector in structured form it only
//! needs the SVD of a `2r × 2r` matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, hstack, orthonormality_defect, thin_qr};

/// Tolerance on `||Q^T Q - I||_F` for factor matrices.
pub const ORTHO_TOL: f64 = 1e-10;

/// Singular values below `RANK_TOL_REL * sigma_1` count as zero.
pub const RANK_TOL_REL: f64 = 1e-12;

/// Complement blocks whose QR basis leaks more than this into the base
/// factors are routed through the joint re-orthonormalization path.
const LEAK_TOL: f64 = 1e-12;

/// Something that can act on thin matrices like an `n1 × n2` matrix `W`.
///
/// Tangent projection only needs `W V` and `W^T U`, so gradients of sensing
/// losses never have to be assembled densely.
pub trait MatrixAction {
    fn shape(&self) -> (usize, usize);

    /// `W · v` for an `n2 × k` block `v`.
    fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64>;

    /// `W^T · u` for an `n1 × k` block `u`.
    fn apply_transpose(&self, u: &DMatrix<f64>) -> DMatrix<f64>;

    fn to_dense(&self) -> DMatrix<f64>;
}

impl MatrixAction for DMatrix<f64> {
    fn shape(&self) -> (usize, usize) {
        DMatrix::shape(self)
    }

    fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        self * v
    }

    fn apply_transpose(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(u)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// A matrix of rank at most `k`, stored as `left · core · right^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactoredPoint {
    left: DMatrix<f64>,
    core: DMatrix<f64>,
    right: DMatrix<f64>,
}

impl FactoredPoint {
    /// Builds a point from factors, checking shapes and orthonormality.
    pub fn new(left: DMatrix<f64>, core: DMatrix<f64>, right: DMatrix<f64>) -> Result<Self> {
        let k = left.ncols();
        if core.shape() != (k, k) || right.ncols() != k {
            return Err(Error::dims(
                format!("core {k}×{k} and right factor with {k} columns"),
                format!(
                    "core {}×{}, right factor with {} columns",
                    core.nrows(),
                    core.ncols(),
                    right.ncols()
                ),
            ));
        }
        let defect = orthonormality_defect(&left).max(orthonormality_defect(&right));
        if defect > ORTHO_TOL {
            return Err(Error::NotOrthonormal {
                defect,
                tol: ORTHO_TOL,
            });
        }
        Ok(Self { left, core, right })
    }

    /// Builds `U diag(sigma) V^T`.
    pub fn from_singular(left: DMatrix<f64>, sigma: &[f64], right: DMatrix<f64>) -> Result<Self> {
        let core = DMatrix::from_diagonal(&DVector::from_column_slice(sigma));
        Self::new(left, core, right)
    }

    pub(crate) fn from_parts(left: DMatrix<f64>, core: DMatrix<f64>, right: DMatrix<f64>) -> Self {
        debug_assert_eq!(core.shape(), (left.ncols(), right.ncols()));
        Self { left, core, right }
    }

    /// The zero matrix, a rank-0 point.
    pub fn zero(n1: usize, n2: usize) -> Self {
        Self {
            left: DMatrix::zeros(n1, 0),
            core: DMatrix::zeros(0, 0),
            right: DMatrix::zeros(n2, 0),
        }
    }

    /// Best rank-`r` approximation of a dense matrix; singular values below
    /// the rank tolerance are dropped, so the result may have rank `< r`.
    pub fn from_dense(m: &DMatrix<f64>, r: usize) -> Self {
        let d = linalg::svd(m);
        truncate(d.u, d.s, d.v, r).0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.left.nrows(), self.right.nrows())
    }

    /// Stored rank `k`.
    pub fn rank(&self) -> usize {
        self.core.nrows()
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn core(&self) -> &DMatrix<f64> {
        &self.core
    }

    pub fn right(&self) -> &DMatrix<f64> {
        &self.right
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.left * &self.core * self.right.transpose()
    }

    /// Rotates the factors so that the core is diagonal, nonnegative and
    /// descending.
    pub fn normalize(&self) -> Self {
        let d = linalg::svd(&self.core);
        Self {
            left: &self.left * d.u,
            core: DMatrix::from_diagonal(&d.s),
            right: &self.right * d.v,
        }
    }

    /// Singular values of the represented matrix, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values(&self.core).iter().copied().collect()
    }

    pub fn fro_norm(&self) -> f64 {
        self.core.norm()
    }

    /// Frobenius inner product with another factored point, using only
    /// `k × k` contractions.
    pub fn inner(&self, other: &FactoredPoint) -> f64 {
        let g = self.left.tr_mul(&other.left);
        let h = other.right.tr_mul(&self.right);
        self.core.dot(&(g * &other.core * h))
    }

    /// `||self - other||_F` without forming dense matrices.
    pub fn distance(&self, other: &FactoredPoint) -> f64 {
        self.combination_norm(1.0, other, -1.0)
    }

    /// `||a·self + b·other||_F` via a joint QR of the stacked factors.
    pub fn combination_norm(&self, a: f64, other: &FactoredPoint, b: f64) -> f64 {
        if self.rank() + other.rank() == 0 {
            return 0.0;
        }
        let (_, ra) = thin_qr(&hstack(&[&self.left, &other.left]));
        let (_, rb) = thin_qr(&hstack(&[&self.right, &other.right]));
        let mid = block_diag(&[&(&self.core * a), &(&other.core * b)]);
        (ra * mid * rb.transpose()).norm()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            left: self.left.clone(),
            core: &self.core * c,
            right: self.right.clone(),
        }
    }

    /// Largest orthonormality defect of the two factors.
    pub fn orthonormality_defect(&self) -> f64 {
        orthonormality_defect(&self.left).max(orthonormality_defect(&self.right))
    }

    /// Re-orthonormalizes both factors by QR and re-diagonalizes the core.
    pub fn reorthonormalize(&self) -> Self {
        let (ql, rl) = thin_qr(&self.left);
        let (qr, rr) = thin_qr(&self.right);
        let core = rl * &self.core * rr.transpose();
        Self::from_parts(ql, core, qr).normalize()
    }

    fn check_valid(&self) -> Result<()> {
        let defect = self.orthonormality_defect();
        if defect > ORTHO_TOL {
            return Err(Error::NotOrthonormal {
                defect,
                tol: ORTHO_TOL,
            });
        }
        Ok(())
    }
}

impl MatrixAction for FactoredPoint {
    fn shape(&self) -> (usize, usize) {
        FactoredPoint::shape(self)
    }

    fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        &self.left * (&self.core * self.right.tr_mul(v))
    }

    fn apply_transpose(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.right * (self.core.tr_mul(&self.left.tr_mul(u)))
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.reconstruct()
    }
}

/// A linear combination `Σ c_i Z_i` of factored points, acting lazily.
#[derive(Clone, Debug)]
pub struct LowRankSum {
    shape: (usize, usize),
    terms: Vec<(f64, FactoredPoint)>,
}

impl LowRankSum {
    pub fn new(shape: (usize, usize)) -> Self {
        Self {
            shape,
            terms: Vec::new(),
        }
    }

    pub fn with(mut self, coeff: f64, point: &FactoredPoint) -> Self {
        debug_assert_eq!(point.shape(), self.shape);
        if coeff != 0.0 && point.rank() > 0 {
            self.terms.push((coeff, point.clone()));
        }
        self
    }
}

impl MatrixAction for LowRankSum {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.shape.0, v.ncols());
        for (c, p) in &self.terms {
            out += p.apply(v) * *c;
        }
        out
    }

    fn apply_transpose(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.shape.1, u.ncols());
        for (c, p) in &self.terms {
            out += p.apply_transpose(u) * *c;
        }
        out
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.shape.0, self.shape.1);
        for (c, p) in &self.terms {
            out += p.reconstruct() * *c;
        }
        out
    }
}

/// The ground truth `X = U D V^T` with `d_1 ≥ … ≥ d_r > 0`.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    factors: FactoredPoint,
    singular_values: Vec<f64>,
    spsd: bool,
}

impl GroundTruth {
    pub fn new(left: DMatrix<f64>, d: &[f64], right: DMatrix<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::param("d", "ground truth needs rank ≥ 1"));
        }
        if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::param("d", "singular values must be positive"));
        }
        if d.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::param("d", "singular values must be descending"));
        }
        let spsd = left == right;
        let factors = FactoredPoint::from_singular(left, d, right)?;
        Ok(Self {
            factors,
            singular_values: d.to_vec(),
            spsd,
        })
    }

    /// Symmetric positive semi-definite truth `U D U^T`.
    pub fn spsd(u: DMatrix<f64>, d: &[f64]) -> Result<Self> {
        Self::new(u.clone(), d, u)
    }

    pub fn point(&self) -> &FactoredPoint {
        &self.factors
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn is_spsd(&self) -> bool {
        self.spsd
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.factors.shape()
    }

    /// Smallest singular value `d_r`.
    pub fn d_min(&self) -> f64 {
        *self.singular_values.last().expect("rank ≥ 1")
    }

    pub fn fro_norm(&self) -> f64 {
        self.singular_values.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// True when all singular values are pairwise distinct.
    pub fn is_distinct(&self) -> bool {
        self.singular_values.windows(2).all(|w| w[0] - w[1] > 0.0)
    }
}

/// An element of `T_Z M_k` (plus an optional tangent-cone term) in
/// structured form.
#[derive(Clone, Debug)]
pub struct TangentVector<'a> {
    base: &'a FactoredPoint,
    core_part: DMatrix<f64>,
    left_complement: DMatrix<f64>,
    right_complement: DMatrix<f64>,
    cone_part: Option<FactoredPoint>,
    target_rank: usize,
    cone_short: bool,
}

impl<'a> TangentVector<'a> {
    pub fn base(&self) -> &'a FactoredPoint {
        self.base
    }

    pub fn core_part(&self) -> &DMatrix<f64> {
        &self.core_part
    }

    pub fn left_complement(&self) -> &DMatrix<f64> {
        &self.left_complement
    }

    pub fn right_complement(&self) -> &DMatrix<f64> {
        &self.right_complement
    }

    pub fn cone_part(&self) -> Option<&FactoredPoint> {
        self.cone_part.as_ref()
    }

    /// Rank of the manifold the retraction maps back to.
    pub fn target_rank(&self) -> usize {
        self.target_rank
    }

    /// Set when the cone residual had rank below `r - s`; the projection then
    /// carries the lower-rank residual.
    pub fn cone_rank_short(&self) -> bool {
        self.cone_short
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let u = self.base.left();
        let v = self.base.right();
        let mut out = u * &self.core_part * v.transpose()
            + &self.left_complement * v.transpose()
            + u * self.right_complement.transpose();
        if let Some(c) = &self.cone_part {
            out += c.reconstruct();
        }
        out
    }

    /// The four components are mutually orthogonal, so the norm splits.
    pub fn fro_norm(&self) -> f64 {
        let cone = self.cone_part.as_ref().map_or(0.0, |c| c.fro_norm().powi(2));
        (self.core_part.norm_squared()
            + self.left_complement.norm_squared()
            + self.right_complement.norm_squared()
            + cone)
            .sqrt()
    }

    pub fn scaled(&self, c: f64) -> TangentVector<'a> {
        TangentVector {
            base: self.base,
            core_part: &self.core_part * c,
            left_complement: &self.left_complement * c,
            right_complement: &self.right_complement * c,
            cone_part: self.cone_part.as_ref().map(|p| p.scaled(c)),
            target_rank: self.target_rank,
            cone_short: self.cone_short,
        }
    }
}

fn check_shape(z: &FactoredPoint, w: (usize, usize)) -> Result<()> {
    if z.shape() != w {
        return Err(Error::dims(
            format!("{}×{}", z.shape().0, z.shape().1),
            format!("{}×{}", w.0, w.1),
        ));
    }
    Ok(())
}

/// Projects `W` onto the tangent space at `Z`:
/// `P_U W + W P_V - P_U W P_V`.
pub fn tangent_project<'a, W>(z: &'a FactoredPoint, w: &W) -> Result<TangentVector<'a>>
where
    W: MatrixAction + ?Sized,
{
    check_shape(z, w.shape())?;
    z.check_valid()?;
    let u = z.left();
    let v = z.right();
    let wv = w.apply(v);
    let wtu = w.apply_transpose(u);
    let core_part = u.tr_mul(&wv);
    let left_complement = wv - u * &core_part;
    let right_complement = wtu - v * core_part.transpose();
    Ok(TangentVector {
        base: z,
        core_part,
        left_complement,
        right_complement,
        cone_part: None,
        target_rank: z.rank(),
        cone_short: false,
    })
}

/// Projection onto the tangent cone of the closure of `M_r` at a point of
/// rank `s < r`: the tangent-space projection onto `T_Z M_s` plus the best
/// rank-`(r - s)` approximation of the part of `W` in `U^⊥ ⊗ V^⊥`.
pub fn tangent_cone_project<'a>(
    z: &'a FactoredPoint,
    w: &DMatrix<f64>,
    r: usize,
) -> Result<TangentVector<'a>> {
    let s = z.rank();
    if s >= r {
        return Err(Error::RankNotDeficient { rank: s, target: r });
    }
    let mut xi = tangent_project(z, w)?;
    let u = z.left();
    let v = z.right();
    let mut residual = w - u * u.tr_mul(w);
    residual -= (&residual * v) * v.transpose();

    let d = linalg::svd(&residual);
    let tol = RANK_TOL_REL * w.norm();
    let keep = d.s.iter().take(r - s).take_while(|&&x| x > tol).count();
    xi.cone_short = keep < r - s;
    if xi.cone_short {
        log::debug!("tangent cone residual has rank {keep} < {}", r - s);
    }
    xi.cone_part = Some(FactoredPoint::from_parts(
        d.u.columns(0, keep).into_owned(),
        DMatrix::from_diagonal(&d.s.rows(0, keep).into_owned()),
        d.v.columns(0, keep).into_owned(),
    ));
    xi.target_rank = r;
    Ok(xi)
}

/// Result of a retraction.
#[derive(Clone, Debug)]
pub struct Retraction {
    pub point: FactoredPoint,
    /// Set when `Z + αξ` had fewer than `r` singular values above the rank
    /// tolerance; the point then lies in the closure of `M_r`.
    pub collapsed: bool,
}

/// Metric-projection retraction `R(Z + αξ)`: the best rank-`r` Frobenius
/// approximation, computed from a `2r × 2r` core.
pub fn retract(z: &FactoredPoint, xi: &TangentVector<'_>, alpha: f64) -> Result<Retraction> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", format!("step must be positive, got {alpha}")));
    }
    if !std::ptr::eq(z, xi.base) && z != xi.base {
        return Err(Error::param("xi", "tangent vector is not based at Z"));
    }
    let k = z.rank();
    let r = xi.target_rank;
    let u = z.left();
    let v = z.right();
    let shifted = z.core() + &xi.core_part * alpha;

    let no_cone = xi.cone_part.as_ref().is_none_or(|c| c.rank() == 0);
    let in_span = xi.left_complement.iter().all(|&x| x == 0.0)
        && xi.right_complement.iter().all(|&x| x == 0.0);

    let fast = if no_cone && in_span {
        // Z + αξ stays in span(U) ⊗ span(V); any QR here would leak rounding
        // noise into the normal space, which a saddle then amplifies
        let d = linalg::svd(&shifted);
        Some(truncate(u * d.u, d.s, v * d.v, r))
    } else if xi.cone_part.is_none() && k == r && k > 0 {
        let (q2, r2) = thin_qr(&xi.left_complement);
        let (q1, r1) = thin_qr(&xi.right_complement);
        let orthogonal = q2.ncols() == k
            && q1.ncols() == k
            && u.tr_mul(&q2).norm() <= LEAK_TOL
            && v.tr_mul(&q1).norm() <= LEAK_TOL;
        if orthogonal {
            let mut core2 = DMatrix::zeros(2 * k, 2 * k);
            core2.view_mut((0, 0), (k, k)).copy_from(&shifted);
            core2.view_mut((0, k), (k, k)).copy_from(&(r1.transpose() * alpha));
            core2.view_mut((k, 0), (k, k)).copy_from(&(r2 * alpha));
            let d = linalg::svd(&core2);
            let left = hstack(&[u, &q2]) * d.u;
            let right = hstack(&[v, &q1]) * d.v;
            Some(truncate(left, d.s, right, r))
        } else {
            None
        }
    } else {
        None
    };

    let (point, collapsed) = match fast {
        Some(res) => res,
        None => {
            // Z + αξ = [U, L, Uc] M [V, Rc, Vc]^T
            let eye = DMatrix::<f64>::identity(k, k) * alpha;
            let zero = DMatrix::<f64>::zeros(k, k);
            let mut left_blocks = vec![u.clone(), xi.left_complement.clone()];
            let mut right_blocks = vec![v.clone(), xi.right_complement.clone()];
            let mut mid = DMatrix::zeros(2 * k, 2 * k);
            mid.view_mut((0, 0), (k, k)).copy_from(&shifted);
            mid.view_mut((0, k), (k, k)).copy_from(&eye);
            mid.view_mut((k, 0), (k, k)).copy_from(&eye);
            mid.view_mut((k, k), (k, k)).copy_from(&zero);
            if let Some(c) = &xi.cone_part {
                left_blocks.push(c.left().clone());
                right_blocks.push(c.right().clone());
                mid = block_diag(&[&mid, &(c.core() * alpha)]);
            }
            let lrefs: Vec<&DMatrix<f64>> = left_blocks.iter().collect();
            let rrefs: Vec<&DMatrix<f64>> = right_blocks.iter().collect();
            truncate_product(&hstack(&lrefs), &mid, &hstack(&rrefs), r)
        }
    };

    let point = if point.orthonormality_defect() > ORTHO_TOL / 10.0 {
        point.reorthonormalize()
    } else {
        point
    };
    Ok(Retraction { point, collapsed })
}

/// Best rank-`r` approximation of `P M Q^T` for tall `P`, `Q`.
pub(crate) fn truncate_product(
    p: &DMatrix<f64>,
    mid: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: usize,
) -> (FactoredPoint, bool) {
    let (qa, ra) = thin_qr(p);
    let (qb, rb) = thin_qr(q);
    let small = ra * mid * rb.transpose();
    let d = linalg::svd(&small);
    truncate(qa * d.u, d.s, qb * d.v, r)
}

/// Keeps the leading `r` singular triplets above the rank tolerance.
fn truncate(
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
    r: usize,
) -> (FactoredPoint, bool) {
    let top = s.iter().copied().next().unwrap_or(0.0);
    let tol = RANK_TOL_REL * top;
    let keep = s
        .iter()
        .take(r)
        .take_while(|&&x| x > tol && x > 0.0)
        .count();
    let point = FactoredPoint::from_parts(
        u.columns(0, keep).into_owned(),
        DMatrix::from_diagonal(&s.rows(0, keep).into_owned()),
        v.columns(0, keep).into_owned(),
    );
    (point, keep < r)
}

/// One projected gradient step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub point: FactoredPoint,
    pub collapsed: bool,
    /// `||P_{T_Z}(∇f(Z))||_F` at the starting point.
    pub grad_norm: f64,
}

/// `Z⁺ = R(Z - α P_{T_Z}(∇f(Z)))`, switching to the tangent cone when `Z`
/// has rank below `rank`.
pub fn pgd_step<W>(z: &FactoredPoint, grad: &W, alpha: f64, rank: usize) -> Result<StepOutcome>
where
    W: MatrixAction + ?Sized,
{
    let xi = match z.rank().cmp(&rank) {
        std::cmp::Ordering::Equal => tangent_project(z, grad)?,
        std::cmp::Ordering::Less => tangent_cone_project(z, &grad.to_dense(), rank)?,
        std::cmp::Ordering::Greater => {
            return Err(Error::param(
                "rank",
                format!("point has rank {} above target {rank}", z.rank()),
            ))
        }
    };
    let grad_norm = xi.fro_norm();
    let descent = xi.scaled(-1.0);
    let Retraction { point, collapsed } = retract(z, &descent, alpha)?;
    Ok(StepOutcome {
        point,
        collapsed,
        grad_norm,
    })
}
