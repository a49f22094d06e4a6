use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analyst::{BitAnalyst, ProductBernoulli, Strategy};
use crate::error::{Error, Result};
use crate::mechanism::{params_from_main_theorem, theorem_tau, CalibrationParams, MechanismKind};

/// How answers are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismConfig {
    /// Calibrated noise with `t` and `T` derived from `n` and `k`.
    Theorem,
    /// Calibrated noise with explicit `t` and `T`.
    Calibrated {
        t: f64,
        #[serde(rename = "T")]
        big_t: f64,
    },
    Empirical,
    FixedGaussian {
        sd: f64,
    },
    Split,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthConfig {
    /// Every coordinate a fair coin.
    #[default]
    Uniform,
    /// Every coordinate Bernoulli(`p`).
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub mechanism: MechanismConfig,
    pub analyst: Strategy,
    #[serde(default)]
    pub truth: TruthConfig,
    pub trials: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Mechanism and error scale fixed for every trial of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub kind: MechanismKind,
    pub params: Option<CalibrationParams>,
    pub tau: f64,
    /// Proven total ALKL for `k` answers; `None` when unbounded.
    pub epsilon_theoretical: Option<f64>,
    /// Whether explicit calibration parameters sit in the stability regime.
    pub regime: Option<bool>,
    pub truth: ProductBernoulli,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks the configuration and derives everything trials share.
    pub fn setup(&self) -> Result<Setup> {
        let (n, k) = (self.n, self.k);
        if n < 2 {
            return Err(Error::TooFewRecords { n, min: 2 });
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        // Validates the strategy against k.
        BitAnalyst::new(self.analyst.clone(), k, 0)?;

        let (kind, params, tau, epsilon_theoretical, regime) = match self.mechanism {
            MechanismConfig::Theorem => {
                let (p, tau) = params_from_main_theorem(n, k)?;
                (MechanismKind::Calibrated(p), Some(p), tau, Some(p.theorem_budget()), None)
            }
            MechanismConfig::Calibrated { t, big_t } => {
                let p = CalibrationParams::new(n, k, t, big_t)?;
                let eps = k as f64 * p.per_answer_cap();
                (
                    MechanismKind::Calibrated(p),
                    Some(p),
                    eps.sqrt(),
                    Some(eps),
                    Some(p.in_stability_regime()),
                )
            }
            MechanismConfig::Empirical => (MechanismKind::Empirical, None, theorem_tau(n, k), None, None),
            MechanismConfig::FixedGaussian { sd } => {
                let eps = if sd > 0.0 {
                    let m1 = (n - 1) as f64;
                    Some(k as f64 / (8.0 * sd * sd * m1 * m1))
                } else {
                    None
                };
                (MechanismKind::FixedGaussian { sd }, None, theorem_tau(n, k), eps, None)
            }
            MechanismConfig::Split => {
                if n < k {
                    return Err(Error::Config(format!(
                        "split needs n >= k, got n = {n}, k = {k}"
                    )));
                }
                (MechanismKind::Split, None, theorem_tau(n, k), None, None)
            }
        };

        let width = self.analyst.width();
        let truth = match self.truth {
            TruthConfig::Uniform => ProductBernoulli::uniform(width),
            TruthConfig::Bernoulli { p } => ProductBernoulli::constant(width, p)?,
        };
        Ok(Setup {
            kind,
            params,
            tau,
            epsilon_theoretical,
            regime,
            truth,
        })
    }
}
