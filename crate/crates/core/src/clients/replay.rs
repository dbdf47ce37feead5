use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use url::Url;

use super::{
    check_image, check_query, content_hash, describe_key, Cassette, ClientError, ImageResult,
    LogoDetection, RedirectResolver, SearchClient, SearchResult, ThumbnailFetcher, ToolName,
    VisionClient, VisionDescription,
};

/// Serves every tool call from a loaded cassette. Unknown keys are
/// [`ClientError::CassetteMiss`]; nothing ever reaches the network.
#[derive(Debug, Clone)]
pub struct ReplayClient {
    cassette: Arc<Cassette>,
}

/// Recorded thumbnail download.
#[derive(Debug, Deserialize)]
struct FetchRecord {
    status: u16,
    #[serde(default)]
    blob: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RedirectRecord {
    final_url: String,
}

impl ReplayClient {
    pub fn new(cassette: Arc<Cassette>) -> Self {
        Self { cassette }
    }

    pub fn cassette(&self) -> &Cassette {
        &self.cassette
    }

    fn decode<T: DeserializeOwned>(&self, tool: ToolName, key: &str) -> Result<T, ClientError> {
        let value: &Value = self.cassette.get(tool, key)?;
        serde_json::from_value(value.clone())
            .map_err(|e| ClientError::Cassette(format!("{tool} entry {key:?}: {e}")))
    }
}

impl SearchClient for ReplayClient {
    fn web_search(&self, query: &str, count: usize) -> Result<Vec<SearchResult>, ClientError> {
        let key = check_query(ToolName::WebSearch, query, count)?;
        let mut results: Vec<SearchResult> = self.decode(ToolName::WebSearch, &key)?;
        results.truncate(count);
        Ok(results)
    }

    fn image_search(&self, query: &str, count: usize) -> Result<Vec<ImageResult>, ClientError> {
        let key = check_query(ToolName::ImageSearch, query, count)?;
        let mut results: Vec<ImageResult> = self.decode(ToolName::ImageSearch, &key)?;
        results.truncate(count);
        Ok(results)
    }
}

impl VisionClient for ReplayClient {
    fn detect_logo(&self, image: &[u8]) -> Result<LogoDetection, ClientError> {
        check_image(ToolName::DetectLogo, image)?;
        let d: LogoDetection = self.decode(ToolName::DetectLogo, &content_hash(image))?;
        Ok(LogoDetection::new(d.brand_guess, d.confidence))
    }

    fn describe_screenshot(
        &self,
        screenshot: &[u8],
        logo: Option<&[u8]>,
    ) -> Result<VisionDescription, ClientError> {
        check_image(ToolName::Describe, screenshot)?;
        self.decode(ToolName::Describe, &describe_key(screenshot, logo))
    }
}

impl ThumbnailFetcher for ReplayClient {
    fn fetch_thumbnail(&self, url: &str) -> Result<Vec<u8>, ClientError> {
        let rec: FetchRecord = self.decode(ToolName::FetchThumbnail, url.trim())?;
        match (rec.status, rec.blob) {
            (200..=299, Some(hash)) => self.cassette.blob(&hash),
            (status, _) => Err(ClientError::HttpStatus {
                tool: ToolName::FetchThumbnail,
                status,
            }),
        }
    }
}

impl RedirectResolver for ReplayClient {
    fn resolve_redirect(&self, url: &Url) -> Result<Url, ClientError> {
        let rec: RedirectRecord = self.decode(ToolName::ResolveRedirect, url.as_str())?;
        Url::parse(&rec.final_url)
            .map_err(|e| ClientError::Cassette(format!("bad recorded redirect target: {e}")))
    }
}
