//! Confusion-matrix metrics and brand-recognition bookkeeping.

use serde::{Deserialize, Serialize};

use crate::checker::CheckOutcome;
use crate::model::{Brand, BrandVerdict, Classification, ConfusionCounts, GroundTruth, Label};
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrandOutcome {
    Correct,
    Wrong,
    Unknown,
}

/// Compares a verdict with the accepted brand spellings. Returns `None`
/// when the sample carries no true brand to compare against.
pub fn brand_outcome(verdict: &BrandVerdict, truth: Option<&GroundTruth>) -> Option<BrandOutcome> {
    let accepted = &truth?.true_brand;
    if accepted.is_empty() {
        return None;
    }
    Some(match &verdict.brand {
        Brand::NoBrand => BrandOutcome::Unknown,
        Brand::Named(name) => {
            let name = name.trim();
            if accepted.iter().any(|b| b.trim().eq_ignore_ascii_case(name)) {
                BrandOutcome::Correct
            } else {
                BrandOutcome::Wrong
            }
        }
    })
}

/// Result of the pipeline for one sample that ran to completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<GroundTruth>,
    pub verdict: BrandVerdict,
    pub classification: Classification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brand_outcome: Option<BrandOutcome>,
    pub check: CheckOutcome,
    /// Seconds spent on this sample. Kept out of `report.json` so that
    /// reports are reproducible; see `timings.json`.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            accuracy: ratio(c.tp + c.tn, c.total()),
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrandCounts {
    pub correct: u64,
    pub wrong: u64,
    pub unknown: u64,
}

impl BrandCounts {
    pub fn total(&self) -> u64 {
        self.correct + self.wrong + self.unknown
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub brand_counts: BrandCounts,
    /// Samples that failed and were left out of every count.
    pub errored: usize,
    /// Completed samples without a phish/benign label.
    pub unlabeled: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PipelineConfig>,
}

impl EvalReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let m = Metrics::from_counts(&counts);
        Self {
            counts,
            precision: m.precision,
            recall: m.recall,
            accuracy: m.accuracy,
            f1: m.f1,
            brand_counts: BrandCounts::default(),
            errored: 0,
            unlabeled: 0,
            config: None,
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            precision: self.precision,
            recall: self.recall,
            accuracy: self.accuracy,
            f1: self.f1,
        }
    }
}

/// Aggregates completed records; phishing is the positive class.
pub fn compute_metrics(records: &[EvalRecord]) -> EvalReport {
    let mut counts = ConfusionCounts::default();
    let mut brands = BrandCounts::default();
    let mut unlabeled = 0;
    for r in records {
        match &r.label {
            Some(truth) => counts.record(truth.label, r.classification.value()),
            None => unlabeled += 1,
        }
        match r.brand_outcome {
            Some(BrandOutcome::Correct) => brands.correct += 1,
            Some(BrandOutcome::Wrong) => brands.wrong += 1,
            Some(BrandOutcome::Unknown) => brands.unknown += 1,
            None => {}
        }
    }
    let mut report = EvalReport::from_counts(counts);
    report.brand_counts = brands;
    report.unlabeled = unlabeled;
    report
}

/// Number of phish-labeled records, the denominator of the TP column.
pub fn phish_total(records: &[EvalRecord]) -> usize {
    records
        .iter()
        .filter(|r| r.label.as_ref().is_some_and(|l| l.label == Label::Phish))
        .count()
}
