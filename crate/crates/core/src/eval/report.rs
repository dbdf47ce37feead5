//! Human-readable report tables.

use std::fmt::Write;

use super::metrics::{EvalRecord, EvalReport};
use super::metrics::phish_total;
use crate::pipeline::BrandMode;

/// Published rows printed under each table for comparison.
struct Reference {
    detector: &'static str,
    correct: Option<(u64, u64, u64, u64)>,
    tp: Option<(u64, u64)>,
    metrics: Option<[f64; 4]>,
}

const REFERENCES: &[Reference] = &[
    Reference {
        detector: "agent-gpt-3.5-turbo",
        correct: Some((182, 5, 13, 200)),
        tp: Some((187, 200)),
        metrics: Some([0.9397, 0.935, 0.9375, 0.9373]),
    },
    Reference {
        detector: "agent-gpt-4-turbo",
        correct: Some((190, 4, 6, 200)),
        tp: Some((194, 200)),
        metrics: Some([0.9238, 0.97, 0.945, 0.9463]),
    },
    Reference {
        detector: "one-shot-gpt-3.5-turbo",
        correct: Some((160, 13, 27, 200)),
        tp: None,
        metrics: None,
    },
    Reference {
        detector: "dynaphish",
        correct: None,
        tp: Some((1808, 5000)),
        metrics: Some([0.8832, 0.3616, 0.4999, 0.5131]),
    },
];

/// False positives over 200 benign pages by checker configuration.
const FP_REFERENCES: &[(&str, [u64; 5])] = &[
    ("agent-gpt-3.5-turbo", [34, 20, 13, 14, 12]),
    ("agent-gpt-4-turbo", [31, 30, 18, 19, 16]),
];
const FP_COLUMNS: [&str; 5] = [
    "single domain",
    "single domain + redirect",
    "list(5) + redirect",
    "list(5)",
    "list(10)",
];

fn frac(n: u64, d: u64) -> String {
    format!("{n}/{d}")
}

fn checker_label(list_size: usize, redirect: bool) -> String {
    let base = if list_size == 1 {
        "single domain".to_string()
    } else {
        format!("list({list_size})")
    };
    if redirect {
        format!("{base} + redirect")
    } else {
        base
    }
}

pub fn render_markdown(report: &EvalReport, records: &[EvalRecord]) -> String {
    let mut md = String::new();
    let (detector, checker) = match &report.config {
        Some(c) => (
            match c.brand_mode {
                BrandMode::Agent => format!("this run (agent, budget {})", c.agent_budget),
                BrandMode::OneShot => "this run (one-shot)".to_string(),
            },
            checker_label(c.checker.list_size(), c.checker.redirection_check),
        ),
        None => ("this run".to_string(), "unknown".to_string()),
    };
    let b = &report.brand_counts;
    let bt = b.total();
    let c = &report.counts;

    let _ = writeln!(md, "# Evaluation report\n");
    let _ = writeln!(
        md,
        "{} samples classified, {} errored, {} unlabeled. Checker: {checker}.\n",
        records.len(),
        report.errored,
        report.unlabeled
    );

    let _ = writeln!(md, "## Brand recognition\n");
    let _ = writeln!(md, "| Detector | Correct | Wrong | Unknown |");
    let _ = writeln!(md, "|---|---|---|---|");
    let _ = writeln!(md, "| {detector} | {} | {} | {} |", frac(b.correct, bt), frac(b.wrong, bt), frac(b.unknown, bt));
    for r in REFERENCES {
        if let Some((ok, wrong, unk, n)) = r.correct {
            let _ = writeln!(md, "| {} (reference) | {} | {} | {} |", r.detector, frac(ok, n), frac(wrong, n), frac(unk, n));
        }
    }

    let _ = writeln!(md, "\n## Phishing detection\n");
    let _ = writeln!(md, "| Detector | TP |");
    let _ = writeln!(md, "|---|---|");
    let _ = writeln!(md, "| {detector} | {} |", frac(c.tp, phish_total(records) as u64));
    for r in REFERENCES {
        if let Some((tp, n)) = r.tp {
            let _ = writeln!(md, "| {} (reference) | {} |", r.detector, frac(tp, n));
        }
    }

    let _ = writeln!(md, "\n## False positives by checker configuration\n");
    let _ = writeln!(md, "| Detector | {} |", FP_COLUMNS.join(" | "));
    let _ = writeln!(md, "|---|{}", "---|".repeat(FP_COLUMNS.len()));
    let benign = c.fp + c.tn;
    let cells: Vec<String> = FP_COLUMNS
        .iter()
        .map(|col| if *col == checker { frac(c.fp, benign) } else { "-".into() })
        .collect();
    let _ = writeln!(md, "| {detector} | {} |", cells.join(" | "));
    for (name, fps) in FP_REFERENCES {
        let cells: Vec<String> = fps.iter().map(|fp| frac(*fp, 200)).collect();
        let _ = writeln!(md, "| {name} (reference) | {} |", cells.join(" | "));
    }

    let _ = writeln!(md, "\n## Confusion matrix\n");
    let _ = writeln!(md, "| TP | TN | FP | FN |");
    let _ = writeln!(md, "|---|---|---|---|");
    let _ = writeln!(md, "| {} | {} | {} | {} |", c.tp, c.tn, c.fp, c.fn_);

    let _ = writeln!(md, "\n## Metrics\n");
    let _ = writeln!(md, "| Detector | Precision | Recall | Accuracy | F1 |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    let _ = writeln!(md, "{}", summary_row(&detector, report));
    for r in REFERENCES {
        if let Some([p, rc, a, f]) = r.metrics {
            let _ = writeln!(md, "| {} (reference) | {p:.4} | {rc:.4} | {a:.4} | {f:.4} |", r.detector);
        }
    }

    let _ = writeln!(md, "\n## Samples\n");
    let _ = writeln!(md, "| Id | Label | Brand | Rounds | Classification | Basis |");
    let _ = writeln!(md, "|---|---|---|---|---|---|");
    for r in records {
        let label = r.label.as_ref().map(|l| format!("{:?}", l.label)).unwrap_or_else(|| "-".into());
        let brand = r.verdict.brand.name().unwrap_or("(no brand)").replace('|', "\\|");
        let _ = writeln!(
            md,
            "| {} | {label} | {brand} | {} | {:?} | {:?} |",
            r.id,
            r.verdict.rounds_used,
            r.classification.value(),
            r.classification.basis()
        );
    }
    md
}

/// One markdown table row with the four headline metrics.
pub fn summary_row(detector: &str, report: &EvalReport) -> String {
    format!(
        "| {detector} | {:.4} | {:.4} | {:.4} | {:.4} |",
        report.precision, report.recall, report.accuracy, report.f1
    )
}
