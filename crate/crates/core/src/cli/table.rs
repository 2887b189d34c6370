//! CSV output: trajectory files, sweep aggregates and ODE series.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ode::ScalarState;
use crate::optimizer::TrajectoryRecord;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// First line of every file this tool writes.
pub fn provenance_line(config_hash: &str, seed: u64) -> String {
    format!("# lmr {TOOL_VERSION} config_hash={config_hash} seed={seed}")
}

pub fn trajectory_header(r: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["iter", "err_fro", "grad_norm", "loss", "h", "rho"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((1..=r).map(|j| format!("sigma_{j}")));
    cols.extend((1..=r).map(|j| format!("r_{j}")));
    cols.extend(["stage", "gap_stat", "L_stat", "Cu_stat"].iter().map(|s| s.to_string()));
    cols
}

/// Empty field for undefined values.
fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

/// Writes concatenated trajectories, each block headed by `# run=<i>`.
pub fn write_trajectories<W: Write>(
    out: &mut W,
    provenance: &str,
    r: usize,
    runs: &[(usize, &TrajectoryRecord)],
) -> Result<()> {
    writeln!(out, "{provenance}")?;
    writeln!(out, "{}", trajectory_header(r).join(","))?;
    for (index, record) in runs {
        writeln!(out, "# run={index}")?;
        for row in &record.rows {
            let mut fields = vec![
                row.iter.to_string(),
                num(row.err_fro),
                num(row.grad_norm),
                num(row.loss),
                num(row.h),
                num(row.rho),
            ];
            fields.extend(row.sigma.iter().map(|&v| num(v)));
            fields.extend(row.r_spectrum.iter().map(|&v| num(v)));
            fields.push(row.stage.to_string());
            fields.push(opt(row.gap_stat));
            fields.push(num(row.l_stat));
            fields.push(num(row.cu_stat));
            writeln!(out, "{}", fields.join(","))?;
        }
    }
    Ok(())
}

/// `t,h,rho` series.
pub fn write_ode<W: Write>(out: &mut W, provenance: &str, states: &[ScalarState], every: usize) -> Result<()> {
    writeln!(out, "{provenance}")?;
    writeln!(out, "t,h,rho")?;
    let every = every.max(1);
    let last = states.len().saturating_sub(1);
    for (i, s) in states.iter().enumerate() {
        if i % every == 0 || i == last {
            writeln!(out, "{},{},{}", num(s.t), num(s.h), num(s.rho))?;
        }
    }
    Ok(())
}

/// A CSV file written by this tool, with its leading comment lines.
#[derive(Clone, Debug)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let comments: Vec<String> = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.to_string())
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(false)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(Error::Schema("file has no header".into()));
        }
        let rows = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(Error::Schema("file has no data rows".into()));
        }
        Ok(Self {
            comments,
            header,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    /// Numeric column; empty fields become `None`.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let field = rec.get(idx).unwrap_or("");
                if field.is_empty() {
                    Ok(None)
                } else {
                    field.parse::<f64>().map(Some).map_err(|_| {
                        Error::Schema(format!("row {}: `{name}` = `{field}` is not a number", i + 1))
                    })
                }
            })
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<String>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r.get(idx).unwrap_or("").to_string()).collect())
    }

    /// Row ranges of consecutive runs, split where `key` stops increasing.
    pub fn runs(&self, key: &str) -> Result<Vec<Range<usize>>> {
        let col = self.column(key)?;
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..col.len() {
            if let (Some(a), Some(b)) = (col[i - 1], col[i]) {
                if b <= a {
                    out.push(start..i);
                    start = i;
                }
            }
        }
        out.push(start..col.len());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = trajectory_header(2);
        assert_eq!(
            h.join(","),
            "iter,err_fro,grad_norm,loss,h,rho,sigma_1,sigma_2,r_1,r_2,stage,gap_stat,L_stat,Cu_stat"
        );
    }

    #[test]
    fn table_splits_runs() {
        let text = "# lmr\nt,h,rho\n# run=0\n0,1,0.5\n1,1,0.6\n# run=1\n0,2,\n";
        let t = Table::parse(text).unwrap();
        assert_eq!(t.comments, vec!["# lmr".to_string()]);
        assert_eq!(t.runs("t").unwrap(), vec![0..2, 2..3]);
        assert_eq!(t.column("rho").unwrap()[2], None);
        assert!(t.column("nope").is_err());
    }

    #[test]
    fn empty_file_is_a_schema_error() {
        assert!(matches!(Table::parse(""), Err(Error::Schema(_))));
        assert!(matches!(Table::parse("# lmr\nt,h,rho\n"), Err(Error::Schema(_))));
    }

    #[test]
    fn ode_series_keeps_last_state() {
        let states: Vec<ScalarState> = (0..5)
            .map(|i| ScalarState {
                t: i as f64,
                h: 1.0,
                rho: 0.5,
            })
            .collect();
        let mut buf = Vec::new();
        write_ode(&mut buf, "# x", &states, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# x\nt,h,rho\n0,1,0.5\n3,1,0.5\n4,1,0.5\n");
    }
}
