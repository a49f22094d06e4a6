use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::mechanism::CalibrationParams;
use crate::stability::BoundReport;

/// Error of one answer against the truth model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryError {
    pub j: usize,
    pub raw_error: f64,
    pub true_sd: f64,
    pub scaled_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    /// `None` when no query was answered.
    pub max_scaled_error: Option<f64>,
    pub final_scaled_error: Option<f64>,
    /// Exact ALKL total of the trial; `None` when infinite.
    pub epsilon: Option<f64>,
    /// Sum of per-answer caps over the answers actually given; `None` when
    /// infinite.
    pub epsilon_cap: Option<f64>,
    pub queries: Vec<QueryError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

/// Nearest-rank quantiles of the scaled error of query `j` across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryQuantiles {
    pub j: usize,
    pub count: usize,
    pub mean: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Standard error of the mean; zero with a single sample.
    pub std_error: f64,
    pub samples: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let std_error = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            std_error,
            samples: xs.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub params: Option<CalibrationParams>,
    pub tau: f64,
    pub regime: Option<bool>,
    pub epsilon_theoretical: Option<f64>,
    /// Largest exact ALKL total over trials; `None` when any is infinite.
    pub epsilon_exact_max: Option<f64>,
    pub bounds: Option<BoundReport>,
    pub max_scaled_error: Option<MeanEstimate>,
    pub final_scaled_error: Option<MeanEstimate>,
    pub per_query: Vec<QueryQuantiles>,
    pub trials: Vec<TrialResult>,
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub(crate) fn per_query_quantiles(trials: &[TrialResult], k: usize) -> Vec<QueryQuantiles> {
    (0..k)
        .filter_map(|j| {
            let mut xs: Vec<f64> = trials
                .iter()
                .filter_map(|t| t.queries.get(j).map(|q| q.scaled_error))
                .collect();
            if xs.is_empty() {
                return None;
            }
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.sort_by(f64::total_cmp);
            Some(QueryQuantiles {
                j,
                count: xs.len(),
                mean,
                q50: nearest_rank(&xs, 0.5),
                q90: nearest_rank(&xs, 0.9),
                q99: nearest_rank(&xs, 0.99),
                max: xs[xs.len() - 1],
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `trials.csv` and `queries.csv`.
    Csv,
    /// `report.json`.
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn ser_err(e: impl std::fmt::Display) -> Error {
    Error::Serialization(e.to_string())
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(ser_err)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(ser_err)
    }

    fn header(&self) -> Result<String> {
        Ok(format!(
            "# config: {}\n",
            serde_json::to_string(&self.config).map_err(ser_err)?
        ))
    }

    /// One row per trial, preceded by the config line.
    pub fn trials_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trial", "seed", "max_scaled_error", "epsilon"])
            .map_err(ser_err)?;
        for t in &self.trials {
            w.write_record([
                t.trial.to_string(),
                t.seed.to_string(),
                opt(t.max_scaled_error),
                opt(t.epsilon),
            ])
            .map_err(ser_err)?;
        }
        self.finish_csv(w)
    }

    /// One row per answered query, preceded by the config line.
    pub fn queries_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["trial", "j", "raw_error", "true_sd", "scaled_error"])
            .map_err(ser_err)?;
        for t in &self.trials {
            for q in &t.queries {
                w.write_record([
                    t.trial.to_string(),
                    q.j.to_string(),
                    q.raw_error.to_string(),
                    q.true_sd.to_string(),
                    q.scaled_error.to_string(),
                ])
                .map_err(ser_err)?;
            }
        }
        self.finish_csv(w)
    }

    fn finish_csv(&self, w: csv::Writer<Vec<u8>>) -> Result<String> {
        let body = String::from_utf8(w.into_inner().map_err(ser_err)?).map_err(ser_err)?;
        let mut out = self.header()?;
        let _ = write!(out, "{body}");
        Ok(out)
    }
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes the report into `dir`, returning the paths written.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    match format {
        ReportFormat::Csv => Ok(vec![
            write_file(dir.join("trials.csv"), &report.trials_csv()?)?,
            write_file(dir.join("queries.csv"), &report.queries_csv()?)?,
        ]),
        ReportFormat::Json => Ok(vec![write_file(dir.join("report.json"), &report.to_json()?)?]),
    }
}
