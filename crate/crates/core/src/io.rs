//! File formats: CSV for samples, corpora and decisions; JSON for models and
//! reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::ExampleSample;
use crate::eval::EvalReport;
use crate::linkage::{LinkageCorpus, LinkageRecord, MatchDecision, TruthPair};
use crate::posterior::Probability;
use crate::predictor::{HistogramModel, LogisticModel};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid file content: {0}")]
    Invalid(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    x1: u8,
    x2: f64,
    y: u8,
}

pub fn write_samples_csv(path: &Path, samples: &[ExampleSample]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path)?;
    for s in samples {
        writer.serialize(SampleRow {
            x1: s.x1.into(),
            x2: s.x2,
            y: s.y.into(),
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<ExampleSample>, IoError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut samples = Vec::new();
    for row in reader.deserialize() {
        let row: SampleRow = row?;
        samples.push(ExampleSample {
            x1: row.x1 != 0,
            x2: row.x2,
            y: row.y != 0,
        });
    }
    Ok(samples)
}

/// Paths of the three corpus files inside a directory.
pub fn corpus_paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join("master.csv"),
        dir.join("update.csv"),
        dir.join("truth.csv"),
    )
}

pub fn write_corpus_csv(dir: &Path, corpus: &LinkageCorpus) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    let (master, update, truth) = corpus_paths(dir);
    write_records_csv(&master, &corpus.master)?;
    write_records_csv(&update, &corpus.update)?;
    let mut writer = csv::Writer::from_path(truth)?;
    for pair in &corpus.truth {
        writer.serialize(pair)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_records_csv(path: &Path, records: &[LinkageRecord]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path)?;
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

fn read_records_csv(path: &Path) -> Result<Vec<LinkageRecord>, IoError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut records = Vec::new();
    for row in reader.deserialize() {
        let record: LinkageRecord = row?;
        if record.last.is_empty() {
            return Err(IoError::Invalid(format!(
                "record {} has an empty last name",
                record.id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_corpus_csv(
    master_path: &Path,
    update_path: &Path,
    truth_path: &Path,
) -> Result<LinkageCorpus, IoError> {
    let master = read_records_csv(master_path)?;
    let update = read_records_csv(update_path)?;
    let mut reader = csv::Reader::from_path(truth_path)?;
    let mut truth = Vec::new();
    for row in reader.deserialize() {
        let pair: TruthPair = row?;
        truth.push(pair);
    }
    Ok(LinkageCorpus {
        master,
        update,
        truth,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct DecisionRow {
    update_id: u32,
    master_id: Option<u32>,
    score: f64,
}

pub fn write_decisions_csv(path: &Path, decisions: &[MatchDecision]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path)?;
    for d in decisions {
        writer.serialize(DecisionRow {
            update_id: d.update_id,
            master_id: d.master_id,
            score: d.score.get(),
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_decisions_csv(path: &Path) -> Result<Vec<MatchDecision>, IoError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut decisions = Vec::new();
    for row in reader.deserialize() {
        let row: DecisionRow = row?;
        decisions.push(MatchDecision {
            update_id: row.update_id,
            master_id: row.master_id,
            score: Probability::new(row.score)
                .map_err(|e| IoError::Invalid(format!("score for {}: {e}", row.update_id)))?,
        });
    }
    Ok(decisions)
}

/// A persisted base predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelFile {
    Logistic(LogisticModel),
    Histogram(HistogramModel),
}

pub fn write_model_json(path: &Path, model: &ModelFile) -> Result<(), IoError> {
    let json = serde_json::to_string_pretty(model)? + "\n";
    fs::write(path, json)?;
    Ok(())
}

pub fn read_model_json(path: &Path) -> Result<ModelFile, IoError> {
    let content = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&content)?)
}

/// Write `<experiment>_report.json` and `<experiment>_report.txt` into `dir`;
/// returns the JSON path.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<PathBuf, IoError> {
    fs::create_dir_all(dir)?;
    let json_path = dir.join(format!("{}_report.json", report.experiment));
    let text_path = dir.join(format!("{}_report.txt", report.experiment));
    fs::write(&json_path, report.to_json())?;
    fs::write(text_path, report.to_text())?;
    Ok(json_path)
}
