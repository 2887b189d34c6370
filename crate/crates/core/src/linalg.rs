//! Small dense helpers shared by the manifold kernels.

use nalgebra::{DMatrix, DVector};

/// Frobenius inner product `tr(A^T B)`.
pub fn fro_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// `||Q^T Q - I||_F` for a matrix with (nominally) orthonormal columns.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let k = q.ncols();
    if k == 0 {
        return 0.0;
    }
    (q.tr_mul(q) - DMatrix::<f64>::identity(k, k)).norm()
}

/// Thin QR factorization `A = Q R` with `Q` of size `n × min(n, p)`.
pub fn thin_qr(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, p) = a.shape();
    if p == 0 {
        return (DMatrix::zeros(n, 0), DMatrix::zeros(0, 0));
    }
    let qr = a.clone().qr();
    (qr.q(), qr.r())
}

/// Singular value decomposition with singular values in descending order.
/// Returns `(U, s, V)` with `A = U diag(s) V^T`.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> SortedSvd {
    let (n1, n2) = a.shape();
    let k = n1.min(n2);
    if k == 0 {
        return SortedSvd {
            u: DMatrix::zeros(n1, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(n2, 0),
        };
    }
    let nan = || SortedSvd {
        u: DMatrix::from_element(n1, k, f64::NAN),
        s: DVector::from_element(k, f64::NAN),
        v: DMatrix::from_element(n2, k, f64::NAN),
    };
    if !a.iter().all(|x| x.is_finite()) {
        // callers detect divergence from the non-finite result
        return nan();
    }
    // nalgebra's bidiagonal SVD loses accuracy on rank-deficient inputs
    let m = faer::Mat::<f64>::from_fn(n1, n2, |i, j| a[(i, j)]);
    let Ok(d) = m.thin_svd() else {
        return nan();
    };
    let s = d.S().column_vector();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    let (fu, fv) = (d.U(), d.V());
    SortedSvd {
        u: DMatrix::from_fn(n1, k, |i, j| fu[(i, order[j])]),
        s: DVector::from_fn(k, |j, _| s[order[j]]),
        v: DMatrix::from_fn(n2, k, |i, j| fv[(i, order[j])]),
    }
}

/// Singular values only, descending.
pub fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    svd(a).s
}

/// Horizontal concatenation of blocks with equal row count.
pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut offset = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, offset), (rows, b.ncols())).copy_from(*b);
        offset += b.ncols();
    }
    out
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), b.shape()).copy_from(*b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Population-style least squares fit `y ≈ a + b x`; returns `(a, b, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (intercept, slope, r2)
}

/// Median of a slice (average of the two central values for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] })
}

/// Empirical quantile with linear interpolation, `q ∈ [0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    Some(v[lo] * (1.0 - w) + v[hi] * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, -1.0, 3.0, 0.5]);
        let d = svd(&a);
        assert!(d.s[0] >= d.s[1]);
        let rec = &d.u * DMatrix::from_diagonal(&d.s) * d.v.transpose();
        assert!((rec - a).norm() < 1e-13);
    }

    #[test]
    fn qr_of_zero_block_stays_finite() {
        let a = DMatrix::<f64>::zeros(5, 2);
        let (q, r) = thin_qr(&a);
        assert!(q.iter().all(|x| x.is_finite()));
        assert!(r.norm() == 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 + 0.5 * v).collect();
        let (a, b, r2) = linear_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b - 0.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&v), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
    }
}
