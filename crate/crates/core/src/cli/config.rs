//! Experiment configuration: a TOML file whose keys can all be overridden
//! from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::init::linear_spectrum;
use crate::losses::{EnsembleKind, THETA_MAX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Problem {
    F1,
    F2,
    GaussianSensing,
    Completion,
    PhaseRetrieval,
}

impl Problem {
    pub fn ensemble(self) -> Option<EnsembleKind> {
        match self {
            Problem::F1 | Problem::F2 => None,
            Problem::GaussianSensing => Some(EnsembleKind::GaussianSensing),
            Problem::Completion => Some(EnsembleKind::Completion),
            Problem::PhaseRetrieval => Some(EnsembleKind::PhaseRetrieval),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum InitKind {
    /// Uniform Stiefel factors with uniform singular values.
    Grd,
    /// `c u0 u0^T` with Gaussian `u0`.
    Rank1Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub kind: InitKind,
    pub sigma_low: f64,
    pub sigma_high: f64,
    /// Scale `c` of the rank-one Gaussian start.
    pub scale: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            kind: InitKind::Grd,
            sigma_low: 0.5,
            sigma_high: 1.5,
            scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthConfig {
    /// Explicit singular values; overrides `spectrum_low`.
    pub d: Option<Vec<f64>>,
    /// Smallest value of the default linear spectrum `1 … low`.
    pub spectrum_low: f64,
    pub spsd: bool,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            d: None,
            spectrum_low: 0.5,
            spsd: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub n: usize,
    /// Column dimension for rectangular problems.
    pub n2: Option<usize>,
    pub r: usize,
    /// Number of measurements for the sensing problems.
    pub m: Option<usize>,
    pub theta: f64,
    pub alpha: f64,
    pub max_iter: usize,
    pub tol_rel: f64,
    pub delta: Option<f64>,
    pub seed: u64,
    pub repeats: usize,
    pub record_every: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub init: InitConfig,
    pub truth: TruthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::F1,
            n: 64,
            n2: None,
            r: 1,
            m: None,
            theta: 1.0,
            alpha: 0.3,
            max_iter: 5000,
            tol_rel: 1e-6,
            delta: None,
            seed: 0,
            repeats: 1,
            record_every: 1,
            output: None,
            init: InitConfig::default(),
            truth: TruthConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn n2(&self) -> usize {
        self.n2.unwrap_or(self.n)
    }

    pub fn spectrum(&self) -> Vec<f64> {
        self.truth
            .d
            .clone()
            .unwrap_or_else(|| linear_spectrum(self.r, self.truth.spectrum_low))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(Error::Config(format!("`{key}`: {why}")));
        if self.r == 0 || self.r > self.n.min(self.n2()) {
            return bad("r", format!("need 1 ≤ r ≤ min(n, n2), got r = {}", self.r));
        }
        if self.repeats == 0 {
            return bad("repeats", "must be at least 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every", "must be at least 1".into());
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad("alpha", format!("must be positive, got {}", self.alpha));
        }
        if !(self.tol_rel >= 0.0) {
            return bad("tol_rel", format!("must be nonnegative, got {}", self.tol_rel));
        }
        if self.problem == Problem::F2 && !(self.theta > 0.0 && self.theta <= THETA_MAX) {
            return bad("theta", format!("must lie in (0, {THETA_MAX}], got {}", self.theta));
        }
        let d = self.spectrum();
        if d.len() != self.r {
            return bad("truth.d", format!("has {} values but r = {}", d.len(), self.r));
        }
        if d.iter().any(|&x| !(x > 0.0)) || d.windows(2).any(|w| w[0] < w[1]) {
            return bad("truth.d", "must be positive and descending".into());
        }
        if !(self.truth.spectrum_low > 0.0 && self.truth.spectrum_low <= 1.0) {
            return bad("truth.spectrum_low", "must lie in (0, 1]".into());
        }
        if let Some(delta) = self.delta {
            let half = d[self.r - 1] / 2.0;
            if !(delta > 0.0 && delta < half) {
                return bad("delta", format!("must lie in (0, d_r/2) = (0, {half})"));
            }
        }
        let square = self.n2() == self.n;
        if self.truth.spsd && !square {
            return bad("truth.spsd", "symmetric truth needs n2 = n".into());
        }
        match self.problem.ensemble() {
            Some(kind) => {
                if self.m.is_none_or(|m| m == 0) {
                    return bad("m", format!("{kind} needs m ≥ 1"));
                }
                if kind == EnsembleKind::PhaseRetrieval && !(square && self.truth.spsd) {
                    return bad("truth.spsd", "phase retrieval needs a square SPSD truth".into());
                }
            }
            None => {}
        }
        let init = &self.init;
        match init.kind {
            InitKind::Grd => {
                if !(init.sigma_low >= 0.0 && init.sigma_high >= init.sigma_low) {
                    return bad("init.sigma_low", "need 0 ≤ sigma_low ≤ sigma_high".into());
                }
            }
            InitKind::Rank1Gaussian => {
                if !square {
                    return bad("init.kind", "rank1_gaussian needs a square shape".into());
                }
                if !(init.scale > 0.0) {
                    return bad("init.scale", "must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, without the output path.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        hash_text(&toml::to_string(&canonical).expect("config serializes"))
    }
}

/// Hex SHA-256.
pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_sections() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            problem = "gaussian_sensing"
            n = 20
            r = 2
            m = 400
            [init]
            sigma_low = 0.2
            [truth]
            d = [2.0, 1.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.problem, Problem::GaussianSensing);
        assert_eq!(cfg.init.sigma_low, 0.2);
        assert_eq!(cfg.init.sigma_high, 1.5);
        assert_eq!(cfg.spectrum(), vec![2.0, 1.0]);
        cfg.validate().unwrap();
    }

    #[test]
    fn errors_point_at_the_line() {
        let err = ExperimentConfig::from_toml("n = 10\nalpha = \"fast\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        let err = ExperimentConfig::from_toml("n = 10\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn validation_names_the_key() {
        let cfg = ExperimentConfig {
            problem: Problem::Completion,
            ..ExperimentConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("`m`"), "{msg}");
        let cfg = ExperimentConfig {
            r: 3,
            truth: TruthConfig {
                d: Some(vec![1.0, 2.0, 0.5]),
                ..TruthConfig::default()
            },
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_path() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output: Some("x.csv".into()),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }
}
