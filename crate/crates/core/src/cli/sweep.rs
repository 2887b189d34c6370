//! One batch per value of a swept parameter.

use std::io::Write;

use crate::cli::batch::{run_batch_summaries, BatchStats};
use crate::cli::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::linalg::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    N,
    Alpha,
    M,
    Theta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::Alpha => "alpha",
            SweepParam::M => "m",
            SweepParam::Theta => "theta",
        }
    }

    /// `base` with the parameter set to `value`.
    pub fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("`{}`: expected a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepParam::N => {
                let n = count()?;
                if cfg.n2.is_some() {
                    cfg.n2 = Some(n);
                }
                cfg.n = n;
            }
            SweepParam::Alpha => cfg.alpha = value,
            SweepParam::M => cfg.m = Some(count()?),
            SweepParam::Theta => cfg.theta = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub stats: BatchStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// `(a, b, R²)` of median iterations-to-tolerance against `ln n`.
    pub log_fit: Option<(f64, f64, f64)>,
    /// Same fit for the iterations until `ρ` first reaches its level.
    pub log_fit_rho: Option<(f64, f64, f64)>,
}

fn fit_log(rows: &[SweepRow], pick: impl Fn(&BatchStats) -> Option<f64>) -> Option<(f64, f64, f64)> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| pick(&r.stats).map(|k| (r.value.ln(), k)))
        .unzip();
    (x.len() >= 2).then(|| linear_fit(&x, &y))
}

pub fn sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    pool: &rayon::ThreadPool,
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("`values`: need at least one sweep value".into()));
    }
    let configs = values
        .iter()
        .map(|&v| param.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (cfg, &value) in configs.iter().zip(values) {
        log::info!("sweep {} = {value}", param.name());
        let runs = run_batch_summaries(cfg, pool)?;
        rows.push(SweepRow {
            value,
            stats: BatchStats::of(&runs),
        });
    }
    let (log_fit, log_fit_rho) = if param == SweepParam::N {
        (
            fit_log(&rows, |s| s.median_iters),
            fit_log(&rows, |s| s.median_iters_rho),
        )
    } else {
        (None, None)
    };
    Ok(SweepReport {
        param,
        rows,
        log_fit,
        log_fit_rho,
    })
}

fn field(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_sweep<W: Write>(out: &mut W, provenance: &str, report: &SweepReport) -> Result<()> {
    writeln!(out, "{provenance}")?;
    if let Some((a, b, r2)) = report.log_fit {
        writeln!(out, "# log_fit iters_to_tol = {a} + {b} ln(n), r2 = {r2}")?;
    }
    if let Some((a, b, r2)) = report.log_fit_rho {
        writeln!(out, "# log_fit iters_to_rho = {a} + {b} ln(n), r2 = {r2}")?;
    }
    writeln!(
        out,
        "{},runs,success_rate,median_iters,median_iters_rho,median_dwell",
        report.param.name()
    )?;
    for row in &report.rows {
        let s = &row.stats;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.value,
            s.runs,
            s.success_rate(),
            field(s.median_iters),
            field(s.median_iters_rho),
            s.median_dwell
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::batch::BatchStats;

    #[test]
    fn single_value_matches_batch() {
        let base = ExperimentConfig {
            n: 10,
            r: 1,
            repeats: 4,
            max_iter: 300,
            ..ExperimentConfig::default()
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let report = sweep(&base, SweepParam::N, &[10.0], &pool).unwrap();
        let direct = BatchStats::of(&run_batch_summaries(&base, &pool).unwrap());
        assert_eq!(report.rows[0].stats, direct);
        assert!(report.log_fit.is_none());
    }

    #[test]
    fn rejects_fractional_counts() {
        let base = ExperimentConfig::default();
        assert!(SweepParam::N.apply(&base, 10.5).is_err());
        assert!(SweepParam::Alpha.apply(&base, -1.0).is_err());
        assert_eq!(SweepParam::Alpha.apply(&base, 0.1).unwrap().alpha, 0.1);
    }
}
