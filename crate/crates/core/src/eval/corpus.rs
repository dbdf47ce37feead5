//! On-disk corpus: one directory per sample plus a `labels.jsonl` sidecar.
//!
//! ```text
//! corpus/
//!   labels.jsonl          {"id": "...", "label": "phish", "true_brand": "PayPal"}
//!   <id>/info.txt         the URL, first non-empty line
//!   <id>/html.txt         raw markup
//!   <id>/shot.png         optional screenshot
//!   <id>/logo.png         optional logo crop
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::Deserialize;
use thiserror::Error;

use crate::model::{validate_sample, Label, RawSample, WebSample};

pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),
    #[error("labels file {path}, line {line}: {reason}")]
    UnparseableLabels { path: PathBuf, line: usize, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
enum BrandField {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
struct LabelLine {
    id: String,
    label: Label,
    #[serde(default)]
    true_brand: Option<BrandField>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEntry {
    pub label: Label,
    pub true_brand: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    /// Sorted by id.
    pub samples: Vec<WebSample>,
    /// Problems that did not stop loading.
    pub warnings: Vec<String>,
}

pub fn parse_labels(path: &Path) -> Result<BTreeMap<String, LabelEntry>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| CorpusError::UnparseableLabels {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let parsed: LabelLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let true_brand = match parsed.true_brand {
            None => vec![],
            Some(BrandField::One(b)) => vec![b],
            Some(BrandField::Many(v)) => v,
        };
        let true_brand = true_brand
            .into_iter()
            .map(|b| b.trim().to_string())
            .filter(|b| !b.is_empty())
            .collect();
        if out
            .insert(parsed.id.clone(), LabelEntry { label: parsed.label, true_brand })
            .is_some()
        {
            return Err(bad(format!("duplicate id {:?}", parsed.id)));
        }
    }
    Ok(out)
}

fn read_optional(path: &Path, warnings: &mut Vec<String>) -> Option<Vec<u8>> {
    match fs::read(path) {
        Ok(b) if !b.is_empty() => Some(b),
        Ok(_) => {
            warnings.push(format!("{} is empty; ignored", path.display()));
            None
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => {
            warnings.push(format!("{}: {e}; ignored", path.display()));
            None
        }
    }
}

fn load_sample(dir: &Path, id: &str, labels: &BTreeMap<String, LabelEntry>, warnings: &mut Vec<String>) -> Option<WebSample> {
    let info = dir.join("info.txt");
    let url = match fs::read_to_string(&info) {
        Ok(t) => t.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or_default().to_string(),
        Err(e) => {
            warnings.push(format!("sample {id}: cannot read info.txt ({e}); skipped"));
            return None;
        }
    };
    let html = match fs::read(dir.join("html.txt")) {
        Ok(bytes) => match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => {
                warnings.push(format!("sample {id}: html.txt is not valid UTF-8; decoded lossily"));
                String::from_utf8_lossy(e.as_bytes()).into_owned()
            }
        },
        Err(_) => {
            warnings.push(format!("sample {id}: html.txt missing; using empty html"));
            String::new()
        }
    };
    let label = labels.get(id);
    let raw = RawSample {
        id: id.to_string(),
        url,
        html,
        screenshot: read_optional(&dir.join("shot.png"), warnings),
        logo_crop: read_optional(&dir.join("logo.png"), warnings),
        label: label.map(|l| l.label),
        true_brand: label.map(|l| l.true_brand.clone()).unwrap_or_default(),
    };
    match validate_sample(raw) {
        Ok(s) => Some(s),
        Err(e) => {
            warnings.push(format!("sample {id}: {e}; skipped"));
            None
        }
    }
}

#[derive(Debug, Error)]
#[error("sample directory {dir}: {reason}")]
pub struct SampleDirError {
    pub dir: PathBuf,
    pub reason: String,
}

/// Loads one sample directory; the id is the directory name. Unlike
/// [`load_corpus`], an unreadable `info.txt` or bad URL is an error.
pub fn load_sample_dir(dir: &Path) -> Result<WebSample, SampleDirError> {
    let fail = |reason: String| SampleDirError {
        dir: dir.to_path_buf(),
        reason,
    };
    if !dir.is_dir() {
        return Err(fail("not a directory".into()));
    }
    let id = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_string))
        .ok_or_else(|| fail("directory name is not valid UTF-8".into()))?;
    let mut warnings = Vec::new();
    let sample = load_sample(dir, &id, &BTreeMap::new(), &mut warnings);
    for w in &warnings {
        warn!("{w}");
    }
    sample.ok_or_else(|| fail(warnings.last().cloned().unwrap_or_default()))
}

/// Loads every sample directory under `root`. `labels` defaults to
/// `root/labels.jsonl`; a missing default file leaves all samples unlabeled.
pub fn load_corpus(root: &Path, labels: Option<&Path>) -> Result<LoadedCorpus, CorpusError> {
    if !root.is_dir() {
        return Err(CorpusError::MissingRoot(root.to_path_buf()));
    }
    let mut warnings = Vec::new();
    let label_map = match labels {
        Some(p) => parse_labels(p)?,
        None => {
            let p = root.join(LABELS_FILE);
            if p.exists() {
                parse_labels(&p)?
            } else {
                warnings.push(format!("no {LABELS_FILE} in {}; samples are unlabeled", root.display()));
                BTreeMap::new()
            }
        }
    };
    let entries = fs::read_dir(root).map_err(|source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<(String, PathBuf)> = entries
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_ok_and(|t| t.is_dir()))
        .filter_map(|e| Some((e.file_name().into_string().ok()?, e.path())))
        .filter(|(name, _)| !name.starts_with('.'))
        .collect();
    dirs.sort();

    let mut samples = Vec::with_capacity(dirs.len());
    for (id, dir) in &dirs {
        if let Some(s) = load_sample(dir, id, &label_map, &mut warnings) {
            samples.push(s);
        }
    }
    for id in label_map.keys() {
        if !dirs.iter().any(|(d, _)| d == id) {
            warnings.push(format!("label for {id} has no sample directory"));
        }
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(LoadedCorpus { samples, warnings })
}
