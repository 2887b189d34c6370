//! Trajectory diagnostics: spurious critical points and their regions,
//! angle spectra, scalar observables, Łojasiewicz ratios and the
//! per-iteration statistics behind the gap and boundedness assumptions.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{tangent_project, FactoredPoint, GroundTruth, LowRankSum};

/// Mask `η ∈ {0,1}^r` written as a string of `0`/`1`.
pub fn mask_string(mask: &[bool]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_mask(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

/// `Σ_{i ∈ η} d_i u_i v_i^T`.
pub fn subset_truncation(x: &GroundTruth, mask: &[bool]) -> FactoredPoint {
    let keep: Vec<usize> = (0..x.rank()).filter(|&i| mask[i]).collect();
    let p = x.point();
    let pick = |m: &DMatrix<f64>| m.select_columns(keep.iter());
    let d: Vec<f64> = keep.iter().map(|&i| x.singular_values()[i]).collect();
    FactoredPoint::from_singular(pick(p.left()), &d, pick(p.right()))
        .expect("columns of orthonormal factors stay orthonormal")
}

#[derive(Clone, Debug)]
pub struct SpuriousMember {
    pub mask: Vec<bool>,
    pub point: FactoredPoint,
}

impl SpuriousMember {
    pub fn rank(&self) -> usize {
        self.point.rank()
    }
}

#[derive(Clone, Debug)]
pub struct SpuriousSet {
    pub members: Vec<SpuriousMember>,
    /// Groups of indices sharing a singular value; empty for distinct spectra.
    pub degenerate_groups: Vec<Vec<usize>>,
}

impl SpuriousSet {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_groups.is_empty()
    }
}

/// All proper subset truncations of `X`, ordered by mask value.
///
/// With repeated singular values the critical points form submanifolds;
/// the subset truncations are still returned and the tied groups reported.
pub fn enumerate_spurious(x: &GroundTruth) -> SpuriousSet {
    let r = x.rank();
    let d = x.singular_values();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i < r {
        let mut j = i + 1;
        while j < r && d[j] == d[i] {
            j += 1;
        }
        if j - i > 1 {
            groups.push((i..j).collect());
        }
        i = j;
    }
    if !groups.is_empty() {
        log::warn!("repeated singular values {groups:?}: spurious points are not isolated");
    }
    let members = (0u64..(1u64 << r) - 1)
        .map(|bits| {
            let mask: Vec<bool> = (0..r).map(|i| bits >> i & 1 == 1).collect();
            let point = subset_truncation(x, &mask);
            SpuriousMember { mask, point }
        })
        .collect();
    SpuriousSet {
        members,
        degenerate_groups: groups,
    }
}

/// `||P_{T_{Z*}}(Z* − X)||_F` at the member's own rank.
pub fn spurious_residual(member: &SpuriousMember, x: &GroundTruth) -> Result<f64> {
    let z = &member.point;
    let diff = LowRankSum::new(z.shape()).with(1.0, z).with(-1.0, x.point());
    Ok(tangent_project(z, &diff)?.fro_norm())
}

/// Closest proper subset truncation to `Z` in Frobenius norm.
///
/// `||Z − Σ_η d_i u_i v_i^T||² = ||Z||² − Σ_η (2 d_i c_i − d_i²)` with
/// `c_i = u_i^T Z v_i`, so the optimum keeps exactly the indices with
/// `c_i > d_i / 2`, flipping the cheapest one when that selects all.
pub fn nearest_spurious(z: &FactoredPoint, x: &GroundTruth) -> (Vec<bool>, f64) {
    let p = x.point();
    let c = p.left().tr_mul(z.left()) * z.core() * z.right().tr_mul(p.right());
    let d = x.singular_values();
    let gain: Vec<f64> = (0..d.len()).map(|i| 2.0 * d[i] * c[(i, i)] - d[i] * d[i]).collect();
    let mut mask: Vec<bool> = gain.iter().map(|&g| g > 0.0).collect();
    if mask.iter().all(|&b| b) {
        let drop = (0..d.len())
            .min_by(|&a, &b| gain[a].total_cmp(&gain[b]))
            .expect("rank ≥ 1");
        mask[drop] = false;
    }
    let dist = z.distance(&subset_truncation(x, &mask));
    (mask, dist)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StageLabel {
    NearGroundTruth,
    SpuriousBall(Vec<bool>),
    Bulk,
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageLabel::NearGroundTruth => f.write_str("near_ground_truth"),
            StageLabel::SpuriousBall(mask) => write!(f, "spurious_ball:{}", mask_string(mask)),
            StageLabel::Bulk => f.write_str("bulk"),
        }
    }
}

impl std::str::FromStr for StageLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near_ground_truth" => Ok(StageLabel::NearGroundTruth),
            "bulk" => Ok(StageLabel::Bulk),
            _ => s
                .strip_prefix("spurious_ball:")
                .and_then(parse_mask)
                .map(StageLabel::SpuriousBall)
                .ok_or_else(|| Error::Schema(format!("unknown stage label `{s}`"))),
        }
    }
}

/// Labels a point from its error, projected error and nearest mask.
pub fn classify(err: f64, proj_err: f64, nearest: &[bool], d_r: f64, delta: f64) -> StageLabel {
    if err <= d_r / 2.0 {
        StageLabel::NearGroundTruth
    } else if proj_err <= delta {
        StageLabel::SpuriousBall(nearest.to_vec())
    } else {
        StageLabel::Bulk
    }
}

fn check_delta(x: &GroundTruth, delta: f64) -> Result<()> {
    let half = x.d_min() / 2.0;
    if !(delta > 0.0 && delta < half) {
        return Err(Error::param(
            "delta",
            format!("must lie in (0, d_r/2) = (0, {half}), got {delta}"),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RegionTest {
    pub member: bool,
    pub nearest: Vec<bool>,
    pub distance: f64,
    /// `||P_{T_Z}(Z − X)||_F`.
    pub proj_err: f64,
    pub err: f64,
}

/// Membership in `{||P_{T_Z}(Z − X)|| ≤ δ} ∩ {||Z − X|| > d_r/2}`.
pub fn spurious_region_test(z: &FactoredPoint, x: &GroundTruth, delta: f64) -> Result<RegionTest> {
    check_delta(x, delta)?;
    let proj_err = projected_error(z, x)?;
    let err = z.distance(x.point());
    let (nearest, distance) = nearest_spurious(z, x);
    Ok(RegionTest {
        member: proj_err <= delta && err > x.d_min() / 2.0,
        nearest,
        distance,
        proj_err,
        err,
    })
}

/// `||P_{T_Z}(Z − X)||_F`.
pub fn projected_error(z: &FactoredPoint, x: &GroundTruth) -> Result<f64> {
    let diff = LowRankSum::new(z.shape()).with(1.0, z).with(-1.0, x.point());
    Ok(tangent_project(z, &diff)?.fro_norm())
}

/// Angle spectrum `r_1 ≥ … ≥ r_r`: eigenvalues of `R R^T` with
/// `R = U_z^T U_x`, padded with zeros when `Z` has rank below `r`.
pub fn angle_spectrum(z: &FactoredPoint, x: &GroundTruth) -> (Vec<f64>, DMatrix<f64>) {
    let zn = z.normalize();
    let r_mat = zn.left().tr_mul(x.point().left());
    (spectrum_of(&r_mat, x.rank()), r_mat)
}

/// Same as [`angle_spectrum`] with the right factors.
pub fn angle_spectrum_right(z: &FactoredPoint, x: &GroundTruth) -> (Vec<f64>, DMatrix<f64>) {
    let zn = z.normalize();
    let r_mat = zn.right().tr_mul(x.point().right());
    (spectrum_of(&r_mat, x.rank()), r_mat)
}

fn spectrum_of(r_mat: &DMatrix<f64>, r: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = linalg::singular_values(r_mat).iter().map(|s| s * s).collect();
    vals.resize(r, 0.0);
    vals
}

/// `h = ||Z||_F` and `ρ = ⟨X, Z⟩ / (||X|| ||Z||)`.
pub fn h_rho(z: &FactoredPoint, x: &GroundTruth) -> Result<(f64, f64)> {
    let h = z.fro_norm();
    if h == 0.0 {
        return Err(Error::ZeroNorm("ρ needs ||Z||_F > 0"));
    }
    Ok((h, z.inner(x.point()) / (h * x.fro_norm())))
}

/// `||P_{T_Z}(Z − X)|| / ||Z − X||`.
pub fn lojasiewicz_ratio(z: &FactoredPoint, x: &GroundTruth) -> Result<f64> {
    let err = z.distance(x.point());
    if err == 0.0 {
        return Err(Error::param("Z", "ratio undefined at Z = X"));
    }
    Ok(projected_error(z, x)? / err)
}

/// Lower bound `σ_r² / (σ_r² + ||X||²)` on the squared ratio.
pub fn lojasiewicz_lower_bound(z: &FactoredPoint, x: &GroundTruth) -> f64 {
    let s = z.singular_values();
    let sr = if s.len() < x.rank() { 0.0 } else { s[x.rank() - 1] };
    let xn2 = x.fro_norm().powi(2);
    sr * sr / (sr * sr + xn2)
}

/// Per-iteration assumption statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct RowStats {
    /// `min_{i≠j} |σ_i − σ_j| / σ_1`, undefined for rank 1.
    pub gap_stat: Option<f64>,
    /// Smallest `L` with `|R_ij| ≤ L min(|R_ii|, |R_jj|)`; `1` for rank 1.
    pub l_stat: f64,
    /// `max_i (R D R^T)_ii / σ_i`.
    pub cu_stat: f64,
}

/// Statistics from singular values and the matching rows of `R` (rows
/// follow `Z`'s columns, columns follow `X`'s).
pub fn row_stats(sigma: &[f64], r_mat: &DMatrix<f64>, d: &[f64]) -> RowStats {
    let k = sigma.len();
    let s1 = sigma.iter().copied().fold(0.0, f64::max);
    let gap_stat = (k >= 2).then(|| {
        let mut g = f64::INFINITY;
        for i in 0..k {
            for j in i + 1..k {
                g = g.min((sigma[i] - sigma[j]).abs());
            }
        }
        if s1 > 0.0 {
            g / s1
        } else {
            0.0
        }
    });
    let m = k.min(r_mat.ncols());
    let mut l_stat = if m <= 1 { 1.0 } else { 0.0f64 };
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let den = r_mat[(i, i)].abs().min(r_mat[(j, j)].abs());
                let num = r_mat[(i, j)].abs();
                let ratio = if num == 0.0 { 0.0 } else { num / den };
                l_stat = l_stat.max(ratio);
            }
        }
    }
    let mut cu_stat = 0.0f64;
    for i in 0..k {
        let rdr: f64 = (0..r_mat.ncols()).map(|j| r_mat[(i, j)].powi(2) * d[j]).sum();
        let v = if sigma[i] > 0.0 { rdr / sigma[i] } else if rdr > 0.0 { f64::INFINITY } else { 0.0 };
        cu_stat = cu_stat.max(v);
    }
    RowStats {
        gap_stat,
        l_stat,
        cu_stat,
    }
}

/// Keeps `Z`'s singular directions in a stable order across iterations by
/// greedy matching of absolute inner products with the previous step.
#[derive(Clone, Debug, Default)]
pub struct ColumnTracker {
    prev: Option<DMatrix<f64>>,
}

impl ColumnTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the column order of the normalized point `z`.
    pub fn pair(&mut self, z: &FactoredPoint) -> Vec<usize> {
        let u = z.left();
        let k = u.ncols();
        let order = match &self.prev {
            Some(prev) if prev.ncols() == k => {
                let overlap = prev.tr_mul(u).abs();
                let mut cells: Vec<(usize, usize)> =
                    (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
                cells.sort_by(|a, b| overlap[*b].total_cmp(&overlap[*a]));
                let mut order = vec![usize::MAX; k];
                let mut used = vec![false; k];
                for (i, j) in cells {
                    if order[i] == usize::MAX && !used[j] {
                        order[i] = j;
                        used[j] = true;
                    }
                }
                order
            }
            _ => (0..k).collect(),
        };
        self.prev = Some(u.select_columns(order.iter()));
        order
    }
}

/// Trajectory-wide extrema of the assumption statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub c_g_min: Option<f64>,
    pub l_max: f64,
    pub cu_max: f64,
    pub crossing_count: usize,
}

impl AssumptionReport {
    /// Set when singular values crossed or touched along the trajectory.
    pub fn flagged(&self) -> bool {
        self.crossing_count > 0 || self.c_g_min == Some(0.0)
    }
}

/// Extrema over rows given as `(paired σ, stats)`; crossings are sign
/// changes of `σ_i − σ_j` between consecutive rows.
pub fn assumption_constants<'a, I>(rows: I) -> AssumptionReport
where
    I: IntoIterator<Item = (&'a [f64], &'a RowStats)>,
{
    let mut c_g_min: Option<f64> = None;
    let mut l_max = 0.0f64;
    let mut cu_max = 0.0f64;
    let mut crossings = 0;
    let mut prev: Option<&[f64]> = None;
    for (sigma, stats) in rows {
        if let Some(g) = stats.gap_stat {
            c_g_min = Some(c_g_min.map_or(g, |c| c.min(g)));
        }
        l_max = l_max.max(stats.l_stat);
        cu_max = cu_max.max(stats.cu_stat);
        if let Some(p) = prev {
            if p.len() == sigma.len() {
                for i in 0..sigma.len() {
                    for j in i + 1..sigma.len() {
                        let before = p[i] - p[j];
                        let after = sigma[i] - sigma[j];
                        if before * after < 0.0 {
                            crossings += 1;
                        }
                    }
                }
            }
        }
        prev = Some(sigma);
    }
    if crossings > 0 {
        log::info!("{crossings} singular value crossings along the trajectory");
    }
    AssumptionReport {
        c_g_min,
        l_max,
        cu_max,
        crossing_count: crossings,
    }
}

/// Stage labels for a trajectory plus the time spent in each spurious ball.
#[derive(Clone, Debug, Default)]
pub struct StageSummary {
    pub labels: Vec<StageLabel>,
    /// Iterations spent per spurious ball, keyed by mask string.
    pub dwell: BTreeMap<String, usize>,
    pub total_dwell: usize,
    /// First iteration labelled near the ground truth.
    pub first_near: Option<usize>,
    /// `(iteration, label)` at every label change, starting with row 0.
    pub transitions: Vec<(usize, StageLabel)>,
}

impl fmt::Display for StageSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "spurious dwell total: {}", self.total_dwell)?;
        for (mask, n) in &self.dwell {
            writeln!(f, "  ball {mask}: {n}")?;
        }
        match self.first_near {
            Some(k) => writeln!(f, "entered B(X, d_r/2) at iteration {k}")?,
            None => writeln!(f, "never entered B(X, d_r/2)")?,
        }
        for (k, label) in &self.transitions {
            writeln!(f, "  {k}: {label}")?;
        }
        Ok(())
    }
}

/// One row's inputs to the stage labeller.
#[derive(Clone, Copy, Debug)]
pub struct StageInput<'a> {
    pub iter: usize,
    pub err: f64,
    pub proj_err: f64,
    pub nearest: &'a [bool],
}

/// Labels every row and accumulates dwell times; rows must be in iteration
/// order and a row's label covers the iterations up to the next row.
pub fn stage_classify<'a, I>(rows: I, x: &GroundTruth, delta: f64) -> Result<StageSummary>
where
    I: IntoIterator<Item = StageInput<'a>>,
{
    check_delta(x, delta)?;
    let d_r = x.d_min();
    let rows: Vec<StageInput<'a>> = rows.into_iter().collect();
    let mut out = StageSummary::default();
    for (idx, row) in rows.iter().enumerate() {
        let label = classify(row.err, row.proj_err, row.nearest, d_r, delta);
        let span = rows.get(idx + 1).map_or(1, |next| next.iter - row.iter);
        if let StageLabel::SpuriousBall(mask) = &label {
            *out.dwell.entry(mask_string(mask)).or_default() += span;
            out.total_dwell += span;
        }
        if label == StageLabel::NearGroundTruth && out.first_near.is_none() {
            out.first_near = Some(row.iter);
        }
        if out.labels.last() != Some(&label) {
            out.transitions.push((row.iter, label.clone()));
        }
        out.labels.push(label);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize, cols: &[usize]) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(n, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            u[(c, j)] = 1.0;
        }
        u
    }

    fn example_x() -> GroundTruth {
        GroundTruth::spsd(basis(3, &[0, 1]), &[1.0, 1.0]).unwrap()
    }

    fn example_z(k: i32) -> FactoredPoint {
        let u = basis(3, &[0, 2]);
        FactoredPoint::from_singular(u.clone(), &[1.0, 0.9f64.powi(k)], u).unwrap()
    }

    #[test]
    fn rank_one_has_only_zero() {
        let x = GroundTruth::spsd(basis(3, &[1]), &[2.0]).unwrap();
        let s = enumerate_spurious(&x);
        assert_eq!(s.members.len(), 1);
        assert_eq!(s.members[0].rank(), 0);
        assert_eq!(spurious_residual(&s.members[0], &x).unwrap(), 0.0);
    }

    #[test]
    fn rank_two_members() {
        let x = GroundTruth::spsd(basis(4, &[0, 1]), &[2.0, 1.0]).unwrap();
        let s = enumerate_spurious(&x);
        assert_eq!(s.members.len(), 3);
        assert!(!s.is_degenerate());
        let dense: Vec<DMatrix<f64>> = s.members.iter().map(|m| m.point.reconstruct()).collect();
        let d = |v: &[f64]| {
            let mut m = DMatrix::zeros(4, 4);
            m.set_partial_diagonal(v.iter().copied());
            m
        };
        assert_eq!(dense[0], d(&[0.0]));
        assert_eq!(dense[1], d(&[2.0]));
        assert_eq!(dense[2], d(&[0.0, 1.0]));
    }

    #[test]
    fn repeated_values_are_flagged() {
        let s = enumerate_spurious(&example_x());
        assert_eq!(s.degenerate_groups, vec![vec![0, 1]]);
    }

    #[test]
    fn example_region_membership() {
        let x = example_x();
        let delta = 0.2;
        let early = spurious_region_test(&example_z(5), &x, delta).unwrap();
        assert!(!early.member);
        let late = spurious_region_test(&example_z(30), &x, delta).unwrap();
        assert!(late.member);
        assert_eq!(late.nearest, vec![true, false]);
        assert!((late.proj_err - 0.9f64.powi(30)).abs() < 1e-14);
    }

    #[test]
    fn near_truth_is_not_a_member() {
        let x = GroundTruth::spsd(basis(3, &[0, 1]), &[1.0, 0.5]).unwrap();
        let z = FactoredPoint::from_singular(basis(3, &[0, 1]), &[1.0, 0.45], basis(3, &[0, 1])).unwrap();
        assert!(!spurious_region_test(&z, &x, 0.1).unwrap().member);
        assert!(spurious_region_test(&z, &x, 0.3).is_err());
    }

    #[test]
    fn angle_spectrum_examples() {
        let x = GroundTruth::spsd(basis(2, &[0]), &[1.0]).unwrap();
        let phi = std::f64::consts::FRAC_PI_3;
        let v = DMatrix::from_column_slice(2, 1, &[phi.cos(), phi.sin()]);
        let z = FactoredPoint::from_singular(v.clone(), &[1.0], v).unwrap();
        let (vals, _) = angle_spectrum(&z, &x);
        assert!((vals[0] - 0.25).abs() < 1e-15);

        let x3 = GroundTruth::spsd(basis(4, &[0, 1]), &[2.0, 1.0]).unwrap();
        let same = FactoredPoint::from_singular(basis(4, &[1, 0]), &[1.0, 1.0], basis(4, &[1, 0])).unwrap();
        let (vals, _) = angle_spectrum(&same, &x3);
        assert!(vals.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let perp = FactoredPoint::from_singular(basis(4, &[2, 3]), &[1.0, 1.0], basis(4, &[2, 3])).unwrap();
        assert_eq!(angle_spectrum(&perp, &x3).0, vec![0.0, 0.0]);
    }

    #[test]
    fn h_rho_examples() {
        let x = GroundTruth::spsd(basis(3, &[0]), &[1.0]).unwrap();
        assert_eq!(h_rho(x.point(), &x).unwrap(), (1.0, 1.0));
        let (h, rho) = h_rho(&x.point().scaled(0.5), &x).unwrap();
        assert_eq!((h, rho), (0.5, 1.0));
        let perp = FactoredPoint::from_singular(basis(3, &[2]), &[1.0], basis(3, &[2])).unwrap();
        assert_eq!(h_rho(&perp, &x).unwrap().1, 0.0);
        assert!(h_rho(&FactoredPoint::zero(3, 3), &x).is_err());
    }

    #[test]
    fn lojasiewicz_on_example() {
        let x = example_x();
        for k in [1, 5, 20] {
            let q = 0.9f64.powi(k);
            let ratio = lojasiewicz_ratio(&example_z(k), &x).unwrap();
            assert!((ratio - q / (1.0 + q * q).sqrt()).abs() < 1e-14);
        }
        assert!(lojasiewicz_ratio(x.point(), &x).is_err());
    }

    #[test]
    fn rank_one_stats() {
        let r = DMatrix::from_element(1, 1, 0.3);
        let s = row_stats(&[2.0], &r, &[1.0]);
        assert_eq!(s.gap_stat, None);
        assert_eq!(s.l_stat, 1.0);
        assert!((s.cu_stat - 0.09 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn forced_crossing_is_counted() {
        let r = DMatrix::identity(2, 2);
        let sig = [vec![1.0, 0.5], vec![0.8, 0.7], vec![0.6, 0.9]];
        let stats: Vec<RowStats> = sig.iter().map(|s| row_stats(s, &r, &[1.0, 1.0])).collect();
        let report = assumption_constants(sig.iter().map(|s| s.as_slice()).zip(stats.iter()));
        assert_eq!(report.crossing_count, 1);
        assert!(report.flagged());
    }

    #[test]
    fn tracker_follows_columns() {
        let mut t = ColumnTracker::new();
        let a = FactoredPoint::from_singular(basis(3, &[0, 1]), &[2.0, 1.0], basis(3, &[0, 1])).unwrap();
        assert_eq!(t.pair(&a), vec![0, 1]);
        // singular values swapped: the normalized factors swap columns
        let b = FactoredPoint::from_singular(basis(3, &[1, 0]), &[2.0, 1.0], basis(3, &[1, 0])).unwrap();
        assert_eq!(t.pair(&b), vec![1, 0]);
    }

    #[test]
    fn stage_labels_for_example() {
        let x = example_x();
        let zs: Vec<FactoredPoint> = (0..60).map(example_z).collect();
        let tests: Vec<RegionTest> = zs
            .iter()
            .map(|z| spurious_region_test(z, &x, 0.1).unwrap())
            .collect();
        let summary = stage_classify(
            tests.iter().enumerate().map(|(k, t)| StageInput {
                iter: k,
                err: t.err,
                proj_err: t.proj_err,
                nearest: &t.nearest,
            }),
            &x,
            0.1,
        )
        .unwrap();
        assert_eq!(summary.labels.last(), Some(&StageLabel::SpuriousBall(vec![true, false])));
        assert!(summary.first_near.is_none());
        let entry = summary.transitions.last().unwrap().0;
        assert!(0.9f64.powi(entry as i32) <= 0.1);
        assert!(0.9f64.powi(entry as i32 - 1) > 0.1);
    }

    #[test]
    fn stage_label_round_trip() {
        for l in [
            StageLabel::Bulk,
            StageLabel::NearGroundTruth,
            StageLabel::SpuriousBall(vec![true, false, true]),
        ] {
            assert_eq!(l.to_string().parse::<StageLabel>().unwrap(), l);
        }
        assert!("nope".parse::<StageLabel>().is_err());
    }
}
