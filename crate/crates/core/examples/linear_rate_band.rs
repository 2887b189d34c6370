//! A batch of seeded F1 runs from random starts, written as a trajectory CSV
//! and drawn as a min/median/max band of the log error.
//!
//! `cargo run --release --example linear_rate_band -- [n] [r] [repeats] [out_dir]`

use std::path::PathBuf;

use lmr::cli::batch::{run_batch, summary_text, worker_pool};
use lmr::cli::config::ExperimentConfig;
use lmr::cli::plot::{plot_table, PlotKind};
use lmr::cli::table::{provenance_line, write_trajectories, Table};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: usize| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let dir = args.get(3).map_or_else(std::env::temp_dir, PathBuf::from);
    let cfg = ExperimentConfig {
        n: arg(0, 200),
        r: arg(1, 10),
        repeats: arg(2, 20),
        alpha: 0.3,
        ..ExperimentConfig::default()
    };

    let runs = run_batch(&cfg, &worker_pool()?)?;
    let provenance = provenance_line(&cfg.hash(), cfg.seed);
    let csv = dir.join("linear_rate.csv");
    let mut file = std::fs::File::create(&csv)?;
    let records: Vec<_> = runs.iter().map(|r| (r.summary.index, &r.record)).collect();
    write_trajectories(&mut file, &provenance, cfg.r, &records)?;

    let svg = dir.join("linear_rate_band.svg");
    plot_table(&Table::read(&csv)?, PlotKind::Band, &svg)?;

    let summaries: Vec<_> = runs.into_iter().map(|r| r.summary).collect();
    let text = summary_text(&provenance, &cfg, &summaries);
    for line in text.lines().rev().take(4).collect::<Vec<_>>().into_iter().rev() {
        println!("{line}");
    }
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}
