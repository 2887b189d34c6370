//! The projected gradient descent loop and its trajectory record.

use crate::diagnostics::{
    self, angle_spectrum, classify, nearest_spurious, row_stats, AssumptionReport, ColumnTracker,
    StageInput, StageLabel, StageSummary,
};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::manifold::{retract, tangent_cone_project, tangent_project, FactoredPoint, LowRankSum, MatrixAction};

/// When to stop iterating.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// `||Z − X|| ≤ ε ||X||`.
    RelativeError(f64),
    /// `||P_{T_Z} ∇f(Z)|| ≤ τ`.
    GradNorm(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgdConfig {
    pub alpha: f64,
    pub max_iter: usize,
    pub stop: StopRule,
    /// Record every `record_every`-th iterate (the last one is always kept).
    pub record_every: usize,
    /// Radius of the spurious balls for stage labels; `d_r / 4` when unset.
    pub delta: Option<f64>,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            max_iter: 5000,
            stop: StopRule::RelativeError(1e-6),
            record_every: 1,
            delta: None,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        let tol = match self.stop {
            StopRule::RelativeError(t) | StopRule::GradNorm(t) => t,
        };
        if !(tol >= 0.0) {
            return Err(Error::param("tol", format!("must be nonnegative, got {tol}")));
        }
        Ok(())
    }
}

/// Diagnostics for one iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub iter: usize,
    pub err_fro: f64,
    pub grad_norm: f64,
    pub loss: f64,
    /// `NaN` at `Z = 0`.
    pub h: f64,
    pub rho: f64,
    /// Descending singular values, zero-padded to rank `r`.
    pub sigma: Vec<f64>,
    pub r_spectrum: Vec<f64>,
    pub stage: StageLabel,
    pub gap_stat: Option<f64>,
    pub l_stat: f64,
    pub cu_stat: f64,
    /// `||P_{T_Z}(Z − X)||`.
    pub proj_err: f64,
    pub nearest: Vec<bool>,
    /// Singular values in the tracked column order.
    pub sigma_paired: Vec<f64>,
    /// `||Z_{k+1} − Z_k||`, unset on the final row.
    pub step_len: Option<f64>,
    /// The step into this iterate lost rank.
    pub collapsed: bool,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub rank: usize,
    pub delta: f64,
    pub rows: Vec<TrajectoryRow>,
    pub converged: bool,
    /// Iteration at which the loop stopped.
    pub final_iter: usize,
    pub collapse_events: usize,
}

impl TrajectoryRecord {
    /// First recorded iteration with relative error at most `eps`.
    pub fn iterations_to(&self, eps: f64, x_norm: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.err_fro <= eps * x_norm).map(|r| r.iter)
    }

    pub fn stage_summary(&self, x: &crate::manifold::GroundTruth) -> Result<StageSummary> {
        diagnostics::stage_classify(
            self.rows.iter().map(|r| StageInput {
                iter: r.iter,
                err: r.err_fro,
                proj_err: r.proj_err,
                nearest: &r.nearest,
            }),
            x,
            self.delta,
        )
    }

    pub fn assumption_report(&self) -> AssumptionReport {
        let stats: Vec<diagnostics::RowStats> = self
            .rows
            .iter()
            .map(|r| diagnostics::RowStats {
                gap_stat: r.gap_stat,
                l_stat: r.l_stat,
                cu_stat: r.cu_stat,
            })
            .collect();
        diagnostics::assumption_constants(
            self.rows.iter().map(|r| r.sigma_paired.as_slice()).zip(stats.iter()),
        )
    }
}

#[derive(Clone, Debug)]
pub struct PgdOutcome {
    pub record: TrajectoryRecord,
    pub point: FactoredPoint,
}

struct Recorder<'a> {
    loss: &'a LossSpec,
    tracker: ColumnTracker,
    delta: f64,
}

impl Recorder<'_> {
    fn row(&mut self, iter: usize, z: &FactoredPoint, loss: f64, grad_norm: f64, collapsed: bool) -> Result<TrajectoryRow> {
        let x = self.loss.truth();
        let r = x.rank();
        let zn = z.normalize();
        let err_fro = zn.distance(x.point());
        let (h, rho) = diagnostics::h_rho(&zn, x).unwrap_or((0.0, f64::NAN));
        let (r_spectrum, r_full) = angle_spectrum(&zn, x);
        let order = self.tracker.pair(&zn);
        let sv: Vec<f64> = zn.core().diagonal().iter().copied().collect();
        let sigma_paired: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
        // positional pairing: a tracked column that crossed ends up aligned
        // with a different column of X, which would send R(i,i) to zero
        let stats = row_stats(&sv, &r_full, x.singular_values());
        let diff = LowRankSum::new(zn.shape()).with(1.0, &zn).with(-1.0, x.point());
        let proj_err = tangent_project(&zn, &diff)?.fro_norm();
        let (nearest, _) = nearest_spurious(&zn, x);
        let stage = classify(err_fro, proj_err, &nearest, x.d_min(), self.delta);
        let mut sigma = sv;
        sigma.resize(r, 0.0);
        Ok(TrajectoryRow {
            iter,
            err_fro,
            grad_norm,
            loss,
            h,
            rho,
            sigma,
            r_spectrum,
            stage,
            gap_stat: stats.gap_stat,
            l_stat: stats.l_stat,
            cu_stat: stats.cu_stat,
            proj_err,
            nearest,
            sigma_paired,
            step_len: None,
            collapsed,
        })
    }
}

/// Runs `Z_{k+1} = R(Z_k − α P_{T_{Z_k}} ∇f(Z_k))` from `z0`.
///
/// The target rank is the rank of the ground truth. Iterates that lost rank
/// continue on the tangent cone.
pub fn run_pgd(loss: &LossSpec, z0: &FactoredPoint, cfg: &PgdConfig) -> Result<PgdOutcome> {
    cfg.validate()?;
    let x = loss.truth();
    let r = x.rank();
    if z0.shape() != x.shape() {
        return Err(Error::dims(format!("{:?}", x.shape()), format!("{:?}", z0.shape())));
    }
    if z0.rank() > r {
        return Err(Error::param("z0", format!("rank {} exceeds target rank {r}", z0.rank())));
    }
    let delta = cfg.delta.unwrap_or(x.d_min() / 4.0);
    if !(delta > 0.0 && delta < x.d_min() / 2.0) {
        return Err(Error::param("delta", format!("must lie in (0, d_r/2), got {delta}")));
    }
    let x_norm = x.fro_norm();
    let mut rec = Recorder {
        loss,
        tracker: ColumnTracker::new(),
        delta,
    };
    let mut rows: Vec<TrajectoryRow> = Vec::new();
    let mut z = z0.clone();
    let mut collapsed = false;
    let mut collapse_events = 0;
    let mut k = 0;
    let converged = loop {
        let (value, grad) = loss.evaluate(&z)?;
        let xi = if z.rank() == r {
            tangent_project(&z, &grad)?
        } else {
            tangent_cone_project(&z, &grad.to_dense(), r)?
        };
        let grad_norm = xi.fro_norm();
        let err = z.distance(x.point());
        let done = match cfg.stop {
            StopRule::RelativeError(eps) => err <= eps * x_norm,
            StopRule::GradNorm(tau) => grad_norm <= tau,
        };
        let last = done || k == cfg.max_iter;
        if k % cfg.record_every == 0 || last {
            rows.push(rec.row(k, &z, value, grad_norm, collapsed)?);
        }
        if last {
            break done;
        }
        let step = retract(&z, &xi.scaled(-1.0), cfg.alpha)?;
        if step.collapsed {
            collapse_events += 1;
            log::debug!("rank collapse at iteration {}", k + 1);
        }
        if let Some(row) = rows.last_mut().filter(|row| row.iter == k) {
            row.step_len = Some(step.point.distance(&z));
        }
        if !step.point.core().iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { iter: k + 1 });
        }
        z = step.point;
        collapsed = step.collapsed;
        k += 1;
    };
    Ok(PgdOutcome {
        record: TrajectoryRecord {
            rank: r,
            delta,
            rows,
            converged,
            final_iter: k,
            collapse_events,
        },
        point: z,
    })
}

/// Per-step constants of the descent inequality
/// `f_k − f_{k+1} ≥ C_d ||P_T ∇f(Z_k)|| ||Z_{k+1} − Z_k||`.
#[derive(Clone, Debug)]
pub struct DescentReport {
    /// `(iteration, C_d)` for consecutive recorded steps with nonzero motion.
    pub c_d: Vec<(usize, f64)>,
    pub c_d_min: f64,
    /// Iterations where the loss increased.
    pub violations: Vec<usize>,
    /// `(iteration, f_{k+1} / f_k)`.
    pub contraction: Vec<(usize, f64)>,
}

impl DescentReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates the descent inequality on consecutive rows of a record.
pub fn monotonicity_check(record: &TrajectoryRecord) -> Result<DescentReport> {
    if record.rows.len() < 2 {
        return Err(Error::param("record", "need at least two rows"));
    }
    let mut c_d = Vec::new();
    let mut violations = Vec::new();
    let mut contraction = Vec::new();
    for w in record.rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.iter != a.iter + 1 {
            continue;
        }
        let drop = a.loss - b.loss;
        // losses that agree to rounding are not counted as increases
        if drop < -1e-13 * a.loss.max(f64::MIN_POSITIVE) {
            violations.push(a.iter);
        }
        if a.loss > 0.0 {
            contraction.push((a.iter, b.loss / a.loss));
        }
        let motion = a.grad_norm * a.step_len.unwrap_or(0.0);
        if motion > 0.0 {
            c_d.push((a.iter, drop / motion));
        }
    }
    if !violations.is_empty() {
        log::warn!("descent inequality violated at {} steps", violations.len());
    }
    let c_d_min = c_d.iter().map(|&(_, c)| c).fold(f64::INFINITY, f64::min);
    Ok(DescentReport {
        c_d,
        c_d_min,
        violations,
        contraction,
    })
}
