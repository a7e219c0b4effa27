//! Precision/recall evaluation against a truth file, threshold sweeps, and
//! the serializable report every experiment emits.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linkage::{MatchDecision, TruthPair};
use crate::posterior::Probability;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("truth file does not cover update id {0}")]
    TruthMissing(u32),
    #[error("threshold sweep needs a grid of at least 2, got {0}")]
    InvalidGrid(usize),
}

/// Precision/recall with raw counts. Precision is undefined (`None`) when
/// nothing was emitted; recall of zero true matches counts as complete.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrResult {
    pub precision: Option<f64>,
    pub recall: f64,
    pub emitted: usize,
    pub correct: usize,
    pub true_matches: usize,
}

impl PrResult {
    pub fn f1(&self) -> Option<f64> {
        let p = self.precision?;
        let r = self.recall;
        if p + r == 0.0 {
            return None;
        }
        Some(2.0 * p * r / (p + r))
    }
}

/// Compare emitted decisions against the truth. A decision for an update the
/// truth marks unmatchable can only hurt precision; abstaining on it is
/// correct and counts nowhere.
pub fn compute_pr(decisions: &[MatchDecision], truth: &[TruthPair]) -> Result<PrResult, EvalError> {
    let truth_map: HashMap<u32, Option<u32>> =
        truth.iter().map(|t| (t.update_id, t.master_id)).collect();
    let mut emitted = 0usize;
    let mut correct = 0usize;
    for decision in decisions {
        let expected = truth_map
            .get(&decision.update_id)
            .ok_or(EvalError::TruthMissing(decision.update_id))?;
        if let Some(master_id) = decision.master_id {
            emitted += 1;
            correct += usize::from(*expected == Some(master_id));
        }
    }
    let true_matches = truth.iter().filter(|t| t.master_id.is_some()).count();
    let precision = (emitted > 0).then(|| correct as f64 / emitted as f64);
    let recall = if true_matches == 0 {
        1.0
    } else {
        correct as f64 / true_matches as f64
    };
    Ok(PrResult {
        precision,
        recall,
        emitted,
        correct,
        true_matches,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub precision: Option<f64>,
    pub recall: f64,
}

/// Precision/recall over a scored, labeled sample at `grid` evenly spaced
/// thresholds spanning [0, 1]; an item is predicted positive when its score
/// is `>=` the threshold. Recall is non-increasing in the threshold.
pub fn threshold_sweep(
    scored: &[(Probability, bool)],
    grid: usize,
) -> Result<Vec<SweepPoint>, EvalError> {
    if grid < 2 {
        return Err(EvalError::InvalidGrid(grid));
    }
    let n_pos = scored.iter().filter(|(_, label)| *label).count();
    let mut points = Vec::with_capacity(grid);
    for i in 0..grid {
        let threshold = i as f64 / (grid - 1) as f64;
        let mut predicted = 0usize;
        let mut tp = 0usize;
        for (score, label) in scored {
            if score.get() >= threshold {
                predicted += 1;
                tp += usize::from(*label);
            }
        }
        let precision = (predicted > 0).then(|| tp as f64 / predicted as f64);
        let recall = if n_pos == 0 {
            1.0
        } else {
            tp as f64 / n_pos as f64
        };
        points.push(SweepPoint {
            threshold,
            precision,
            recall,
        });
    }
    Ok(points)
}

/// The machine-readable outcome of one experiment run. `metrics` carries the
/// experiment-specific numbers; the headline precision/recall fields are set
/// by the linkage experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: String,
    pub seed: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub threshold: Option<f64>,
    pub sweep: Vec<SweepPoint>,
    pub metrics: BTreeMap<String, f64>,
    pub config_echo: serde_json::Value,
}

impl EvalReport {
    pub fn new(experiment: &str, seed: u64, config_echo: serde_json::Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            precision: None,
            recall: None,
            f1: None,
            threshold: None,
            sweep: Vec::new(),
            metrics: BTreeMap::new(),
            config_echo,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    /// Plain-text rendering: one metric per line plus the sweep table.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(v) => format!("{v:.6}"),
            None => "n/a".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!("experiment: {}\n", self.experiment));
        out.push_str(&format!("seed: {}\n", self.seed));
        out.push_str(&format!("precision: {}\n", fmt(self.precision)));
        out.push_str(&format!("recall: {}\n", fmt(self.recall)));
        out.push_str(&format!("f1: {}\n", fmt(self.f1)));
        out.push_str(&format!("threshold: {}\n", fmt(self.threshold)));
        for (name, value) in &self.metrics {
            out.push_str(&format!("{name}: {value:.6}\n"));
        }
        if !self.sweep.is_empty() {
            out.push_str("\nthreshold  precision  recall\n");
            for point in &self.sweep {
                out.push_str(&format!(
                    "{:>9.4}  {:>9}  {:>6.4}\n",
                    point.threshold,
                    fmt(point.precision),
                    point.recall
                ));
            }
        }
        out
    }
}
