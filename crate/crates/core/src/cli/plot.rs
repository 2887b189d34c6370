//! SVG figures from the CSV files this tool writes.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;

use crate::cli::table::Table;
use crate::error::{Error, Result};
use crate::linalg::median;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// `log10 ||Z − X||` per run.
    Logerr,
    H,
    Rho,
    /// Min/max envelope and median of the log error across runs.
    Band,
}

type Series = Vec<(f64, f64)>;

/// Extracts one `(x, y)` series per run.
fn series(table: &Table, kind: PlotKind) -> Result<(Vec<Series>, &'static str, &'static str)> {
    let (x_name, x_label) = if table.has("iter") {
        ("iter", "iteration")
    } else if table.has("t") {
        ("t", "t")
    } else {
        return Err(Error::Schema("expected an `iter` or `t` column".into()));
    };
    let (y_name, y_label, log) = match kind {
        PlotKind::Logerr | PlotKind::Band => ("err_fro", "log10 ||Z - X||_F", true),
        PlotKind::H => ("h", "h", false),
        PlotKind::Rho => ("rho", "rho", false),
    };
    let xs = table.column(x_name)?;
    let ys = table.column(y_name)?;
    let runs = table.runs(x_name)?;
    let out = runs
        .into_iter()
        .map(|range| {
            range
                .filter_map(|i| {
                    let x = xs[i]?;
                    let y = ys[i]?;
                    let y = if log { y.log10() } else { y };
                    (x.is_finite() && y.is_finite()).then_some((x, y))
                })
                .collect::<Series>()
        })
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>();
    if out.is_empty() {
        return Err(Error::Schema(format!("column `{y_name}` has no finite values")));
    }
    Ok((out, x_label, y_label))
}

/// Per-x minimum, median and maximum over the runs that reach that x.
pub fn envelope(runs: &[Series]) -> Vec<(f64, f64, f64, f64)> {
    let mut by_x: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for run in runs {
        for &(x, y) in run {
            // total order on the nonnegative abscissae
            by_x.entry(x.to_bits()).or_insert_with(|| (x, Vec::new())).1.push(y);
        }
    }
    let mut out: Vec<(f64, f64, f64, f64)> = by_x
        .into_values()
        .map(|(x, ys)| {
            let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (x, lo, median(&ys).unwrap_or(lo), hi)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn bounds(runs: &[Series]) -> ((f64, f64), (f64, f64)) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for &(a, b) in runs.iter().flatten() {
        x = (x.0.min(a), x.1.max(a));
        y = (y.0.min(b), y.1.max(b));
    }
    let pad = |(lo, hi): (f64, f64)| {
        if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let m = 0.03 * (hi - lo);
            (lo - m, hi + m)
        }
    };
    (pad(x), pad(y))
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

pub fn plot_table(table: &Table, kind: PlotKind, output: &Path) -> Result<()> {
    let (runs, x_label, y_label) = series(table, kind)?;
    let ((x0, x1), (y0, y1)) = bounds(&runs);
    let root = SVGBackend::new(output, (900, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let title = match kind {
        PlotKind::Logerr => format!("log error, {} runs", runs.len()),
        PlotKind::Band => format!("log error band, {} runs", runs.len()),
        PlotKind::H => "h".to_string(),
        PlotKind::Rho => "rho".to_string(),
    };
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    if kind == PlotKind::Band {
        let env = envelope(&runs);
        let mut outline: Vec<(f64, f64)> = env.iter().map(|e| (e.0, e.3)).collect();
        outline.extend(env.iter().rev().map(|e| (e.0, e.1)));
        chart
            .draw_series(std::iter::once(Polygon::new(outline, BLUE.mix(0.25).filled())))
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(env.iter().map(|e| (e.0, e.2)), BLUE.stroke_width(2)))
            .map_err(plot_err)?;
    } else {
        let alpha = if runs.len() > 1 { 0.35 } else { 1.0 };
        for run in &runs {
            chart
                .draw_series(LineSeries::new(run.iter().copied(), BLUE.mix(alpha)))
                .map_err(plot_err)?;
        }
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Reads `input` and writes the figure to `output`.
pub fn cmd_plot(input: &Path, kind: PlotKind, output: &Path) -> Result<()> {
    let table = Table::read(input)?;
    plot_table(&table, kind, output)
}
