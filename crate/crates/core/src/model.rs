//! Shared domain records: samples, verdicts, classifications and counts.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

/// Upper bound on tool calls the agent may issue for one sample.
pub const TOOL_BUDGET: u32 = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("sample id is empty")]
    EmptyId,
    #[error("invalid url {url:?}: {reason}")]
    InvalidUrl { url: String, reason: String },
    #[error("true_brand given without a phish/benign label")]
    BrandWithoutLabel,
}

/// Ground-truth class of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(alias = "phish", alias = "PHISH", alias = "phishing", alias = "Phishing")]
    Phish,
    #[serde(alias = "benign", alias = "BENIGN")]
    Benign,
}

/// Ground-truth label plus the accepted spellings of the true brand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub label: Label,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub true_brand: Vec<String>,
}

impl GroundTruth {
    pub fn new(label: Label) -> Self {
        Self {
            label,
            true_brand: Vec::new(),
        }
    }

    pub fn with_brand(mut self, brand: impl Into<String>) -> Self {
        self.true_brand.push(brand.into());
        self
    }
}

/// A sample as it arrives from disk or the wire, before validation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RawSample {
    pub id: String,
    pub url: String,
    #[serde(default)]
    pub html: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logo_crop: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub true_brand: Vec<String>,
}

/// One unit of work: a captured webpage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebSample {
    pub id: String,
    pub url: Url,
    pub html: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logo_crop: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<GroundTruth>,
}

impl WebSample {
    pub fn host(&self) -> &str {
        self.url.host_str().unwrap_or_default()
    }
}

/// Parse an absolute URL that carries a host.
pub fn parse_absolute_url(raw: &str) -> Result<Url, SampleError> {
    let invalid = |reason: String| SampleError::InvalidUrl {
        url: raw.to_string(),
        reason,
    };
    let url = Url::parse(raw.trim()).map_err(|e| invalid(e.to_string()))?;
    match url.host_str() {
        Some(h) if !h.is_empty() => Ok(url),
        _ => Err(invalid("url has no host".into())),
    }
}

pub fn validate_sample(raw: RawSample) -> Result<WebSample, SampleError> {
    if raw.id.trim().is_empty() {
        return Err(SampleError::EmptyId);
    }
    let url = parse_absolute_url(&raw.url)?;
    let label = match (raw.label, raw.true_brand.is_empty()) {
        (Some(label), _) => Some(GroundTruth {
            label,
            true_brand: raw.true_brand,
        }),
        (None, true) => None,
        (None, false) => return Err(SampleError::BrandWithoutLabel),
    };
    Ok(WebSample {
        id: raw.id,
        url,
        html: raw.html,
        screenshot: raw.screenshot,
        logo_crop: raw.logo_crop,
        label,
    })
}

/// The agent's conclusion about which brand a page represents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Brand {
    Named(String),
    NoBrand,
}

impl Brand {
    /// Trims the name; blank names collapse to `NoBrand`.
    pub fn named(name: &str) -> Self {
        let name = name.trim();
        if name.is_empty() {
            Brand::NoBrand
        } else {
            Brand::Named(name.to_string())
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Brand::Named(n) => Some(n),
            Brand::NoBrand => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrandVerdict {
    pub brand: Brand,
    pub reason: String,
    pub rounds_used: u32,
}

impl BrandVerdict {
    pub fn new(brand: Brand, reason: impl Into<String>, rounds_used: u32) -> Self {
        let reason = reason.into();
        let reason = if reason.trim().is_empty() {
            "no reason given".to_string()
        } else {
            reason
        };
        Self {
            brand,
            reason,
            rounds_used: rounds_used.min(TOOL_BUDGET),
        }
    }

    pub fn no_brand(reason: impl Into<String>, rounds_used: u32) -> Self {
        Self::new(Brand::NoBrand, reason, rounds_used)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Phishing,
    Benign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    DomainMatch,
    NoBrandDefault,
    DomainMismatch,
}

/// Final phishing/benign decision. The value is derived from the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "ClassificationRepr", into = "ClassificationRepr")]
pub struct Classification {
    basis: Basis,
}

impl Classification {
    pub fn from_basis(basis: Basis) -> Self {
        Self { basis }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn value(&self) -> Verdict {
        match self.basis {
            Basis::DomainMatch | Basis::NoBrandDefault => Verdict::Benign,
            Basis::DomainMismatch => Verdict::Phishing,
        }
    }

    pub fn is_phishing(&self) -> bool {
        self.value() == Verdict::Phishing
    }
}

#[derive(Serialize, Deserialize)]
struct ClassificationRepr {
    value: Verdict,
    basis: Basis,
}

impl From<ClassificationRepr> for Classification {
    fn from(r: ClassificationRepr) -> Self {
        Classification::from_basis(r.basis)
    }
}

impl From<Classification> for ClassificationRepr {
    fn from(c: Classification) -> Self {
        ClassificationRepr {
            value: c.value(),
            basis: c.basis,
        }
    }
}

/// Confusion matrix with phishing as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, truth: Label, predicted: Verdict) {
        match (truth, predicted) {
            (Label::Phish, Verdict::Phishing) => self.tp += 1,
            (Label::Phish, Verdict::Benign) => self.fn_ += 1,
            (Label::Benign, Verdict::Phishing) => self.fp += 1,
            (Label::Benign, Verdict::Benign) => self.tn += 1,
        }
    }
}
