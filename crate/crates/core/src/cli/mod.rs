//! Experiment harness: configuration, seeded batches, sweeps, CSV output,
//! SVG figures and the invariant suite, plus the command-line front end.

pub mod batch;
pub mod check;
pub mod config;
pub mod plot;
pub mod sweep;
pub mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::diagnostics::{enumerate_spurious, mask_string, spurious_residual};
use crate::error::{Error, Result};
use crate::init::{sample_ground_truth, stream_rng};
use crate::ode::{integrate, OdeSystem, ScalarState};
use batch::{run_batch, summary_text, worker_pool, RunSummary};
use config::{hash_text, ExperimentConfig, InitKind, Problem};
use plot::PlotKind;
use sweep::SweepParam;
use table::{provenance_line, write_ode, write_trajectories};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lmr", version, about = "Riemannian gradient descent for low-rank matrix recovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Seeded PGD runs; writes the trajectory CSV and a summary.
    Run(ConfigArgs),
    /// One batch per value of a parameter; writes an aggregate CSV.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Integrates a scalar `(h, ρ)` system.
    Ode(OdeArgs),
    /// Renders a CSV written by this tool as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "logerr")]
        kind: PlotKind,
        #[arg(long)]
        output: PathBuf,
    },
    /// Lists the spurious critical points of the run-0 ground truth.
    Spurious(ConfigArgs),
    /// Runs the invariant suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Every config key as a flag; flags override the file.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub problem: Option<Problem>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol_rel: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub record_every: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub init_kind: Option<InitKind>,
    #[arg(long)]
    pub sigma_low: Option<f64>,
    #[arg(long)]
    pub sigma_high: Option<f64>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// Ground-truth singular values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<f64>>,
    #[arg(long)]
    pub spectrum_low: Option<f64>,
    #[arg(long)]
    pub spsd: Option<bool>,
}

impl ConfigArgs {
    /// File values (or defaults) with the flags applied, validated.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($field).+ = v.clone(); })*
            };
        }
        set!(
            problem => problem, n => n, r => r, theta => theta, alpha => alpha,
            max_iter => max_iter, tol_rel => tol_rel, seed => seed, repeats => repeats,
            record_every => record_every, init_kind => init.kind, sigma_low => init.sigma_low,
            sigma_high => init.sigma_high, init_scale => init.scale,
            spectrum_low => truth.spectrum_low, spsd => truth.spsd,
        );
        if self.n2.is_some() {
            cfg.n2 = self.n2;
        }
        if self.m.is_some() {
            cfg.m = self.m;
        }
        if self.delta.is_some() {
            cfg.delta = self.delta;
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if self.d.is_some() {
            cfg.truth.d = self.d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum OdeKind {
    Rank1,
    PhaseRetrieval,
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[arg(long, value_enum, default_value = "rank1")]
    pub system: OdeKind,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub h0: f64,
    #[arg(long, default_value_t = 1.0 / 1024.0)]
    pub rho0: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 20.0)]
    pub t_max: f64,
    /// Write every `every`-th step.
    #[arg(long, default_value_t = 10)]
    pub every: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

impl OdeArgs {
    pub fn system(&self) -> OdeSystem {
        match self.system {
            OdeKind::Rank1 => OdeSystem::Rank1,
            OdeKind::PhaseRetrieval => OdeSystem::PhaseRetrieval { theta: self.theta },
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn summary_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".summary.txt");
    PathBuf::from(s)
}

/// Runs the batch; the CSV goes to `output` (stdout when unset) and the
/// summary to stdout (stderr when the CSV is on stdout) and `<output>.summary.txt`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    let pool = worker_pool()?;
    let runs = run_batch(cfg, &pool)?;
    let provenance = provenance_line(&cfg.hash(), cfg.seed);
    let records: Vec<_> = runs.iter().map(|r| (r.summary.index, &r.record)).collect();
    let mut out = open_output(cfg.output.as_deref())?;
    write_trajectories(&mut out, &provenance, cfg.r, &records)?;
    out.flush()?;
    let summaries: Vec<RunSummary> = runs.into_iter().map(|r| r.summary).collect();
    let text = summary_text(&provenance, cfg, &summaries);
    match &cfg.output {
        Some(path) => {
            std::fs::write(summary_path(path), &text)?;
            print!("{text}");
        }
        None => eprint!("{text}"),
    }
    Ok(summaries)
}

pub fn cmd_sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<sweep::SweepReport> {
    let pool = worker_pool()?;
    let report = sweep::sweep(cfg, param, values, &pool)?;
    let joined: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    let hash = hash_text(&format!("{}\nsweep {} = {}", cfg.hash(), param.name(), joined.join(",")));
    let mut out = open_output(cfg.output.as_deref())?;
    sweep::write_sweep(&mut out, &provenance_line(&hash, cfg.seed), &report)?;
    out.flush()?;
    Ok(report)
}

pub fn cmd_ode(args: &OdeArgs) -> Result<()> {
    let system = args.system();
    let traj = integrate(system, ScalarState::new(args.h0, args.rho0), args.dt, args.t_max)?;
    if traj.clip_events > 0 {
        log::warn!("rho clipped to [0, 1] {} times", traj.clip_events);
    }
    let key = format!(
        "{system:?} h0={} rho0={} dt={} t_max={} every={}",
        args.h0, args.rho0, args.dt, args.t_max, args.every
    );
    let mut out = open_output(args.output.as_deref())?;
    write_ode(&mut out, &provenance_line(&hash_text(&key), 0), &traj.states, args.every)?;
    out.flush()?;
    Ok(())
}

/// Table of the spurious set of the ground truth drawn for run 0.
pub fn spurious_report(cfg: &ExperimentConfig) -> Result<String> {
    let mut rng = stream_rng(cfg.seed, 0);
    let x = sample_ground_truth(cfg.n, cfg.n2(), &cfg.spectrum(), cfg.truth.spsd, &mut rng)?;
    let set = enumerate_spurious(&x);
    let mut s = provenance_line(&cfg.hash(), cfg.seed);
    s.push('\n');
    s.push_str("mask,rank,dist_to_x,residual\n");
    for m in &set.members {
        s.push_str(&format!(
            "{},{},{},{}\n",
            mask_string(&m.mask),
            m.rank(),
            m.point.distance(x.point()),
            spurious_residual(m, &x)?
        ));
    }
    for g in &set.degenerate_groups {
        s.push_str(&format!("# degenerate singular values at indices {g:?}\n"));
    }
    Ok(s)
}

fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Run(args) => {
            cmd_run(&args.resolve()?)?;
        }
        Command::Sweep { config, param, values } => {
            cmd_sweep(&config.resolve()?, param, &values)?;
        }
        Command::Ode(args) => cmd_ode(&args)?,
        Command::Plot { input, kind, output } => plot::cmd_plot(&input, kind, &output)?,
        Command::Spurious(args) => {
            let cfg = args.resolve()?;
            let text = spurious_report(&cfg)?;
            let mut out = open_output(cfg.output.as_deref())?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        Command::Check { seed } => {
            let outcomes = check::run_checks(seed);
            for c in &outcomes {
                println!("{c}");
            }
            if outcomes.iter().any(|c| !c.passed) {
                return Ok(EXIT_CHECK);
            }
        }
    }
    Ok(0)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run_cli(cli: Cli) -> i32 {
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "n = 30\nr = 2\nalpha = 0.2\n[init]\nsigma_low = 0.1\n").unwrap();
        let args = ConfigArgs {
            config: Some(path),
            alpha: Some(0.05),
            sigma_high: Some(0.9),
            ..ConfigArgs::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.n, cfg.r, cfg.alpha), (30, 2, 0.05));
        assert_eq!((cfg.init.sigma_low, cfg.init.sigma_high), (0.1, 0.9));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Diverged { iter: 3 }), EXIT_NUMERICAL);
        let bad = Cli::parse_from(["lmr", "run", "--r", "0"]);
        assert_eq!(run_cli(bad), EXIT_CONFIG);
    }

    #[test]
    fn spurious_table_lists_every_mask() {
        let cfg = ExperimentConfig {
            n: 8,
            r: 3,
            ..ExperimentConfig::default()
        };
        let text = spurious_report(&cfg).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 7);
    }

    #[test]
    fn summary_path_appends_suffix() {
        assert_eq!(summary_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.summary.txt"));
    }
}
