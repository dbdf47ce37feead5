//! Batch evaluation: load a corpus, run the pipeline over it with bounded
//! parallelism and write `report.json`, `report.md` and `timings.json`.

pub mod corpus;
pub mod metrics;
pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::ToolClients;
use crate::model::WebSample;
use crate::pipeline::{analyze, BrandMode, GatewayProvider, PipelineConfig, PipelineOutput, ScenarioSource};

pub use corpus::{load_corpus, load_sample_dir, parse_labels, CorpusError, LoadedCorpus, SampleDirError, LABELS_FILE};
pub use metrics::{brand_outcome, compute_metrics, BrandCounts, BrandOutcome, EvalRecord, EvalReport, Metrics};
pub use report::{render_markdown, summary_row};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErroredSample {
    pub id: String,
    pub error: String,
    /// A remote tool or the model was unreachable.
    pub outage: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub concurrency: usize,
    /// Where to write report artifacts; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Write each agent run as a scenario file here (record mode).
    pub record_scenarios: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("no samples to evaluate")]
    NoSamples,
    #[error("concurrency must be at least 1")]
    InvalidConcurrency,
    #[error("building worker pool: {0}")]
    Pool(String),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub report: EvalReport,
    pub records: Vec<EvalRecord>,
    pub errored: Vec<ErroredSample>,
}

impl SuiteResult {
    /// The exact bytes written to `report.json`.
    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite result serializes");
        s.push('\n');
        s
    }
}

pub fn record_for(sample: &WebSample, out: &PipelineOutput, wall_time: f64) -> EvalRecord {
    EvalRecord {
        id: sample.id.clone(),
        url: sample.url.to_string(),
        label: sample.label.clone(),
        verdict: out.verdict.clone(),
        classification: out.check.classification,
        brand_outcome: brand_outcome(&out.verdict, sample.label.as_ref()),
        check: out.check.clone(),
        wall_time,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), SuiteError> {
    fs::write(path, contents).map_err(|source| SuiteError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn mkdir(path: &Path) -> Result<(), SuiteError> {
    fs::create_dir_all(path).map_err(|source| SuiteError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs every sample; per-sample failures land in `errored` and never abort
/// the suite. Output order is by sample id regardless of scheduling.
pub fn run_suite(
    samples: &[WebSample],
    cfg: &PipelineConfig,
    clients: &dyn ToolClients,
    gateways: &dyn GatewayProvider,
    opts: &SuiteOptions,
) -> Result<SuiteResult, SuiteError> {
    if samples.is_empty() {
        return Err(SuiteError::NoSamples);
    }
    if opts.concurrency == 0 {
        return Err(SuiteError::InvalidConcurrency);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.concurrency)
        .build()
        .map_err(|e| SuiteError::Pool(e.to_string()))?;

    let mut outcomes: Vec<(&WebSample, f64, Result<PipelineOutput, String>, bool)> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| {
                let start = Instant::now();
                let res = analyze(s, cfg, clients, gateways);
                let secs = start.elapsed().as_secs_f64();
                match res {
                    Ok(out) => (s, secs, Ok(out), false),
                    Err(e) => {
                        warn!("sample {} errored: {e}", s.id);
                        let outage = e.is_outage();
                        (s, secs, Err(e.to_string()), outage)
                    }
                }
            })
            .collect()
    });
    outcomes.sort_by(|a, b| a.0.id.cmp(&b.0.id));

    let mut records = Vec::new();
    let mut errored = Vec::new();
    let mut transcripts = BTreeMap::new();
    for (sample, secs, res, outage) in outcomes {
        match res {
            Ok(out) => {
                records.push(record_for(sample, &out, secs));
                transcripts.insert(sample.id.clone(), out.transcript);
            }
            Err(error) => errored.push(ErroredSample {
                id: sample.id.clone(),
                error,
                outage,
            }),
        }
    }
    let mut report = compute_metrics(&records);
    report.errored = errored.len();
    report.config = Some(*cfg);
    info!(
        "suite finished: {} classified, {} errored, accuracy {:.4}",
        records.len(),
        errored.len(),
        report.accuracy
    );
    let result = SuiteResult { report, records, errored };

    if let Some(dir) = &opts.out_dir {
        mkdir(dir)?;
        write(&dir.join("report.json"), &result.report_json())?;
        write(&dir.join("report.md"), &render_markdown(&result.report, &result.records))?;
        let timings: BTreeMap<&str, f64> = result.records.iter().map(|r| (r.id.as_str(), r.wall_time)).collect();
        write(
            &dir.join("timings.json"),
            &serde_json::to_string_pretty(&timings).expect("timings serialize"),
        )?;
        let tdir = dir.join("transcripts");
        mkdir(&tdir)?;
        for (id, t) in &transcripts {
            if let Ok(path) = ScenarioSource::scenario_path(&tdir, id, BrandMode::Agent) {
                write(&path, &serde_json::to_string_pretty(t).expect("transcript serializes"))?;
            }
        }
    }
    if let Some(dir) = &opts.record_scenarios {
        mkdir(dir)?;
        for (id, t) in &transcripts {
            let path = ScenarioSource::scenario_path(dir, id, cfg.brand_mode).map_err(|e| SuiteError::Io {
                path: dir.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
            write(&path, &serde_json::to_string_pretty(&t.to_scenario()).expect("scenario serializes"))?;
        }
    }
    Ok(result)
}
