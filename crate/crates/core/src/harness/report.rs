use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, HarnessError, SeedOutcome};
use crate::env::{Difficulty, Split};

pub const AGGREGATION_NOTE: &str =
    "mean and sample SD over seeds of per-seed means over test games; training curve columns average the first and last 20 training episodes";

/// Training episodes averaged at each end of the learning curve.
const CURVE_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format `{s}` (csv or json)")),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub difficulty: Difficulty,
    pub split: Split,
    pub variant: super::Variant,
    pub seeds: usize,
    pub episodes: usize,
    pub max_steps: usize,
    pub test_games: usize,
    pub steps_mean: f64,
    pub steps_sd: f64,
    pub score_mean: f64,
    pub score_sd: f64,
    pub symbolic_fraction: f64,
    pub train_score_first: f64,
    pub train_score_last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub aggregation: String,
    pub rows: Vec<MetricsRow>,
}

impl Default for MetricsReport {
    fn default() -> Self {
        MetricsReport { aggregation: AGGREGATION_NOTE.to_string(), rows: Vec::new() }
    }
}

/// Mean and sample standard deviation; the SD of fewer than two values is 0.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn mean(values: &[f64]) -> f64 {
    mean_sd(values).0
}

impl MetricsReport {
    pub fn from_outcomes(cfg: &ExperimentConfig, outcomes: &[SeedOutcome]) -> Self {
        let window = CURVE_WINDOW.min(cfg.episodes);
        let first: Vec<f64> = outcomes.iter().map(|o| mean(&o.train_scores[..window])).collect();
        let last: Vec<f64> = outcomes.iter().map(|o| mean(&o.train_scores[o.train_scores.len() - window..])).collect();
        let mut report = MetricsReport::default();
        for &split in &cfg.splits {
            let evals: Vec<_> = outcomes.iter().filter_map(|o| o.evals.iter().find(|e| e.split == split)).collect();
            let steps: Vec<f64> = evals.iter().map(|e| e.steps).collect();
            let scores: Vec<f64> = evals.iter().map(|e| e.score).collect();
            let (steps_mean, steps_sd) = mean_sd(&steps);
            let (score_mean, score_sd) = mean_sd(&scores);
            let total: usize = evals.iter().map(|e| e.total_steps).sum();
            let symbolic: usize = evals.iter().map(|e| e.symbolic_steps).sum();
            report.rows.push(MetricsRow {
                difficulty: cfg.difficulty,
                split,
                variant: cfg.variant,
                seeds: outcomes.len(),
                episodes: cfg.episodes,
                max_steps: cfg.max_steps,
                test_games: cfg.test_games,
                steps_mean,
                steps_sd,
                score_mean,
                score_sd,
                symbolic_fraction: if total == 0 { 0.0 } else { symbolic as f64 / total as f64 },
                train_score_first: mean(&first),
                train_score_last: mean(&last),
            });
        }
        report
    }

    /// Difficulty, then split, then variant.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by_key(|r| (r.difficulty, r.split, r.variant));
    }

    pub fn row(&self, difficulty: Difficulty, split: Split, variant: super::Variant) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.difficulty == difficulty && r.split == split && r.variant == variant)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, HarnessError> {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Config(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in &self.rows {
                    w.serialize(r).map_err(|e| HarnessError::Config(e.to_string()))?;
                }
                let body = String::from_utf8(w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?)
                    .expect("csv output is utf-8");
                Ok(format!("# {}\n{body}", self.aggregation))
            }
        }
    }

    pub fn parse(text: &str, format: ReportFormat) -> Result<Self, HarnessError> {
        match format {
            ReportFormat::Json => serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string())),
            ReportFormat::Csv => {
                let aggregation = text
                    .lines()
                    .next()
                    .and_then(|l| l.strip_prefix("# "))
                    .unwrap_or(AGGREGATION_NOTE)
                    .to_string();
                let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
                let rows = r
                    .deserialize()
                    .collect::<Result<Vec<MetricsRow>, _>>()
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
                Ok(MetricsReport { aggregation, rows })
            }
        }
    }
}
