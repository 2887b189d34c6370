//! Seeded batch execution over a worker pool.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cli::config::{ExperimentConfig, InitKind, Problem};
use crate::error::{Error, Result};
use crate::init::{sample_grd, sample_ground_truth, sample_rank1_gaussian, stream_rng, RandomSpec};
use crate::linalg::median;
use crate::losses::{make_ensemble, LossSpec};
use crate::manifold::{FactoredPoint, GroundTruth};
use crate::optimizer::{run_pgd, PgdConfig, StopRule, TrajectoryRecord};

/// Level of `ρ` used for the escape-time statistic.
pub const RHO_LEVEL: f64 = 0.99;

/// Pool sized by `LMR_THREADS`, or by the machine when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("LMR_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::Config(format!("LMR_THREADS: expected a positive integer, got `{v}`")))?,
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Draws the truth, the ensemble and the start of run `index`, in that order,
/// from the run's own stream.
pub fn build_problem(cfg: &ExperimentConfig, index: usize) -> Result<(LossSpec, FactoredPoint)> {
    let mut rng = stream_rng(cfg.seed, index as u64);
    let (n1, n2) = (cfg.n, cfg.n2());
    let truth = sample_ground_truth(n1, n2, &cfg.spectrum(), cfg.truth.spsd, &mut rng)?;
    let ensemble = match cfg.problem.ensemble() {
        Some(kind) => Some(make_ensemble(kind, n1, n2, cfg.m.unwrap_or(0), &mut rng)?),
        None => None,
    };
    let z0 = match cfg.init.kind {
        InitKind::Grd => {
            let spec = RandomSpec {
                n: n1,
                n2: cfg.n2,
                r: cfg.r,
                sigma_low: cfg.init.sigma_low,
                sigma_high: cfg.init.sigma_high,
                seed: cfg.seed,
                spsd: cfg.truth.spsd,
            };
            sample_grd(&spec, &mut rng)?
        }
        InitKind::Rank1Gaussian => sample_rank1_gaussian(n1, cfg.init.scale, &mut rng)?,
    };
    let loss = match (cfg.problem, ensemble) {
        (Problem::F1, _) => LossSpec::f1(truth),
        (Problem::F2, _) => LossSpec::f2(truth, cfg.theta)?,
        (_, Some(ens)) => LossSpec::empirical(truth, ens)?,
        (_, None) => return Err(Error::MissingEnsemble),
    };
    Ok((loss, z0))
}

pub fn pgd_config(cfg: &ExperimentConfig) -> PgdConfig {
    PgdConfig {
        alpha: cfg.alpha,
        max_iter: cfg.max_iter,
        stop: StopRule::RelativeError(cfg.tol_rel),
        record_every: cfg.record_every,
        delta: cfg.delta,
    }
}

/// Per-run statistics reported in summaries and sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub index: usize,
    pub converged: bool,
    pub final_iter: usize,
    pub iters_to_tol: Option<usize>,
    /// Fractional iteration at which `ρ` first reaches [`RHO_LEVEL`].
    pub iters_to_rho: Option<f64>,
    pub dwell: usize,
    pub first_near: Option<usize>,
    pub collapses: usize,
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub truth: GroundTruth,
    pub record: TrajectoryRecord,
}

/// First crossing of `ρ ≥ level`, interpolated in `log ρ` between the
/// recorded rows around it.
pub fn rho_crossing(record: &TrajectoryRecord, level: f64) -> Option<f64> {
    let rows = &record.rows;
    let k = rows.iter().position(|r| r.rho >= level)?;
    if k == 0 {
        return Some(rows[0].iter as f64);
    }
    let (prev, next) = (&rows[k - 1], &rows[k]);
    let (a, b) = (prev.rho.ln(), next.rho.ln());
    let frac = if a.is_finite() && b > a { ((level.ln() - a) / (b - a)).clamp(0.0, 1.0) } else { 1.0 };
    Some(prev.iter as f64 + frac * (next.iter - prev.iter) as f64)
}

pub fn run_one(cfg: &ExperimentConfig, index: usize) -> Result<RunResult> {
    let (loss, z0) = build_problem(cfg, index)?;
    let outcome = run_pgd(&loss, &z0, &pgd_config(cfg))?;
    let record = outcome.record;
    let truth = loss.truth().clone();
    let stages = record.stage_summary(&truth)?;
    let summary = RunSummary {
        index,
        converged: record.converged,
        final_iter: record.final_iter,
        iters_to_tol: record.iterations_to(cfg.tol_rel, truth.fro_norm()),
        iters_to_rho: rho_crossing(&record, RHO_LEVEL),
        dwell: stages.total_dwell,
        first_near: stages.first_near,
        collapses: record.collapse_events,
        flagged: record.assumption_report().flagged(),
    };
    Ok(RunResult {
        summary,
        truth,
        record,
    })
}

/// Runs every repeat; results come back in index order whatever the schedule.
pub fn run_batch(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    pool.install(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|i| run_one(cfg, i))
            .collect::<Result<Vec<_>>>()
    })
}

/// Same as [`run_batch`] but keeps only the summaries.
pub fn run_batch_summaries(cfg: &ExperimentConfig, pool: &rayon::ThreadPool) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    pool.install(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|i| run_one(cfg, i).map(|r| r.summary))
            .collect::<Result<Vec<_>>>()
    })
}

/// Aggregates over one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub runs: usize,
    pub successes: usize,
    /// Over converged runs.
    pub median_iters: Option<f64>,
    pub median_iters_rho: Option<f64>,
    pub median_dwell: f64,
}

impl BatchStats {
    pub fn of(runs: &[RunSummary]) -> Self {
        let iters: Vec<f64> = runs.iter().filter_map(|r| r.iters_to_tol).map(|k| k as f64).collect();
        let rho: Vec<f64> = runs.iter().filter_map(|r| r.iters_to_rho).collect();
        let dwell: Vec<f64> = runs.iter().map(|r| r.dwell as f64).collect();
        Self {
            runs: runs.len(),
            successes: runs.iter().filter(|r| r.converged).count(),
            median_iters: median(&iters),
            median_iters_rho: median(&rho),
            median_dwell: median(&dwell).unwrap_or(0.0),
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.runs == 0 {
            0.0
        } else {
            self.successes as f64 / self.runs as f64
        }
    }
}

fn opt_usize(v: Option<usize>) -> String {
    v.map_or_else(|| "-".into(), |k| k.to_string())
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |k| k.to_string())
}

/// Plain-text batch report.
pub fn summary_text(provenance: &str, cfg: &ExperimentConfig, runs: &[RunSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{provenance}");
    let _ = writeln!(
        s,
        "problem={:?} n={} n2={} r={} alpha={} tol_rel={} repeats={}",
        cfg.problem,
        cfg.n,
        cfg.n2(),
        cfg.r,
        cfg.alpha,
        cfg.tol_rel,
        cfg.repeats
    );
    let _ = writeln!(s, "run converged final_iter iters_to_tol iters_to_rho dwell first_near collapses flagged");
    for r in runs {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            r.index,
            r.converged,
            r.final_iter,
            opt_usize(r.iters_to_tol),
            r.iters_to_rho.map_or_else(|| "-".into(), |t| format!("{t:.3}")),
            r.dwell,
            opt_usize(r.first_near),
            r.collapses,
            r.flagged
        );
    }
    let stats = BatchStats::of(runs);
    let _ = writeln!(
        s,
        "success {}/{} ({:.3})",
        stats.successes,
        stats.runs,
        stats.success_rate()
    );
    let _ = writeln!(s, "median iters_to_tol {}", opt_f64(stats.median_iters));
    let _ = writeln!(s, "median iters_to_rho {}", opt_f64(stats.median_iters_rho));
    let _ = writeln!(s, "median dwell {}", stats.median_dwell);
    s
}
