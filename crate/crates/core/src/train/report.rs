use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EpochLog;
use crate::error::{Error, Result};

/// One row of a predictions file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub true_label: usize,
    pub predicted_label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub top1_accuracy: f64,
    pub per_class_correct: Vec<usize>,
    pub per_class_total: Vec<usize>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    /// Builds the report from `(sample_id, true, predicted)` triples.
    pub fn from_predictions(classes: usize, rows: Vec<(String, usize, usize)>) -> Result<EvalReport> {
        if rows.is_empty() {
            return Err(Error::contract("no predictions to report"));
        }
        let mut confusion = vec![vec![0; classes]; classes];
        let mut predictions = Vec::with_capacity(rows.len());
        for (sample_id, t, p) in rows {
            if t >= classes || p >= classes {
                return Err(Error::contract(format!(
                    "sample `{}`: label {} / prediction {} outside {} classes",
                    sample_id, t, p, classes
                )));
            }
            confusion[t][p] += 1;
            predictions.push(Prediction {
                sample_id,
                true_label: t,
                predicted_label: p,
            });
        }
        let per_class_correct: Vec<usize> = (0..classes).map(|k| confusion[k][k]).collect();
        let per_class_total: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
        let correct: usize = per_class_correct.iter().sum();
        Ok(EvalReport {
            top1_accuracy: correct as f64 / predictions.len() as f64,
            per_class_correct,
            per_class_total,
            confusion,
            predictions,
        })
    }

    pub fn total(&self) -> usize {
        self.predictions.len()
    }
}

/// Writes `sample_id,true_label,predicted_label`.
pub fn write_predictions_csv(path: impl AsRef<Path>, predictions: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if predictions.is_empty() {
        w.write_record(["sample_id", "true_label", "predicted_label"])?;
    }
    for p in predictions {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions_csv(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct EpochRow {
    epoch: usize,
    lr: f64,
    train_loss: f64,
    test_top1: f64,
}

/// Writes `epoch,lr,train_loss,test_top1`.
pub fn write_epoch_log_csv(path: impl AsRef<Path>, log: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if log.is_empty() {
        w.write_record(["epoch", "lr", "train_loss", "test_top1"])?;
    }
    for e in log {
        w.serialize(EpochRow {
            epoch: e.epoch,
            lr: e.lr,
            train_loss: e.train_loss,
            test_top1: e.test_top1,
        })?;
    }
    w.flush()?;
    Ok(())
}
