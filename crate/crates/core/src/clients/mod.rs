//! Remote tools: web search, image search, logo detection, screenshot
//! description, thumbnail download and redirect resolution.
//!
//! Every tool has a live HTTP implementation ([`LiveClient`]), a cassette
//! replay implementation ([`ReplayClient`]) and a recording wrapper
//! ([`Recorder`]) that forwards to a live client and appends each exchange to
//! a cassette.

mod cassette;
mod live;
mod record;
mod replay;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use url::Url;

pub use cassette::{blob_dir_for, Cassette, CassetteEntry, CassetteWriter};
pub use live::{Credentials, Endpoints, LiveClient, MissingCredential, RetryPolicy};
pub use record::Recorder;
pub use replay::ReplayClient;

pub const MAX_RESULTS: usize = 10;

/// Names under which tool exchanges are keyed in cassettes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    WebSearch,
    ImageSearch,
    DetectLogo,
    Describe,
    FetchThumbnail,
    ResolveRedirect,
    FetchPage,
}

impl ToolName {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::WebSearch => "web_search",
            ToolName::ImageSearch => "image_search",
            ToolName::DetectLogo => "detect_logo",
            ToolName::Describe => "describe",
            ToolName::FetchThumbnail => "fetch_thumbnail",
            ToolName::ResolveRedirect => "resolve_redirect",
            ToolName::FetchPage => "fetch_page",
        }
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("invalid request to {tool}: {reason}")]
    InvalidRequest { tool: ToolName, reason: String },
    #[error("{tool} unavailable: {reason}")]
    ToolUnavailable { tool: ToolName, reason: String },
    #[error("cassette has no entry for {tool} key {key:?}")]
    CassetteMiss { tool: ToolName, key: String },
    #[error("{tool} returned http status {status}")]
    HttpStatus { tool: ToolName, status: u16 },
    #[error("cassette error: {0}")]
    Cassette(String),
}

impl ClientError {
    pub fn is_cassette_miss(&self) -> bool {
        matches!(self, ClientError::CassetteMiss { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub snippet: String,
    pub link: String,
    pub display_link: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageResult {
    pub thumbnail_link: String,
    pub source_link: String,
    pub title: String,
    pub snippet: String,
    pub context_link: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogoDetection {
    pub brand_guess: Option<String>,
    pub confidence: f64,
}

impl LogoDetection {
    pub fn none() -> Self {
        Self {
            brand_guess: None,
            confidence: 0.0,
        }
    }

    /// Clamps confidence into [0, 1] and zeroes it when no brand is given.
    pub fn new(brand_guess: Option<String>, confidence: f64) -> Self {
        let brand_guess = brand_guess
            .map(|b| b.trim().to_string())
            .filter(|b| !b.is_empty());
        let confidence = if brand_guess.is_none() || !confidence.is_finite() {
            0.0
        } else {
            confidence.clamp(0.0, 1.0)
        };
        Self {
            brand_guess,
            confidence,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisionDescription {
    pub text: String,
}

pub trait SearchClient: Send + Sync {
    fn web_search(&self, query: &str, count: usize) -> Result<Vec<SearchResult>, ClientError>;
    fn image_search(&self, query: &str, count: usize) -> Result<Vec<ImageResult>, ClientError>;
}

pub trait VisionClient: Send + Sync {
    fn detect_logo(&self, image: &[u8]) -> Result<LogoDetection, ClientError>;
    fn describe_screenshot(
        &self,
        screenshot: &[u8],
        logo: Option<&[u8]>,
    ) -> Result<VisionDescription, ClientError>;
}

pub trait ThumbnailFetcher: Send + Sync {
    fn fetch_thumbnail(&self, url: &str) -> Result<Vec<u8>, ClientError>;
}

pub trait RedirectResolver: Send + Sync {
    /// Follows HTTP redirects from `url` and returns the final location.
    fn resolve_redirect(&self, url: &Url) -> Result<Url, ClientError>;
}

/// Everything the pipeline needs from the outside world.
pub trait ToolClients: SearchClient + VisionClient + ThumbnailFetcher + RedirectResolver {}

impl<T> ToolClients for T where T: SearchClient + VisionClient + ThumbnailFetcher + RedirectResolver {}

/// Trim and collapse internal whitespace runs.
pub fn normalize_query(query: &str) -> String {
    query.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn describe_key(screenshot: &[u8], logo: Option<&[u8]>) -> String {
    format!(
        "{}+{}",
        content_hash(screenshot),
        logo.map(content_hash).unwrap_or_else(|| "none".into())
    )
}

pub(crate) fn check_query(tool: ToolName, query: &str, count: usize) -> Result<String, ClientError> {
    let q = normalize_query(query);
    if q.is_empty() {
        return Err(ClientError::InvalidRequest {
            tool,
            reason: "empty query".into(),
        });
    }
    if !(1..=MAX_RESULTS).contains(&count) {
        return Err(ClientError::InvalidRequest {
            tool,
            reason: format!("count {count} outside 1..={MAX_RESULTS}"),
        });
    }
    Ok(q)
}

pub(crate) fn check_image(tool: ToolName, image: &[u8]) -> Result<(), ClientError> {
    if image.is_empty() {
        Err(ClientError::InvalidRequest {
            tool,
            reason: "empty image".into(),
        })
    } else {
        Ok(())
    }
}
