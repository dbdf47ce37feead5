use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use log::{debug, warn};
use reqwest::blocking::{Client, Response};
use reqwest::redirect::Policy;
use serde_json::{json, Value};
use thiserror::Error;
use url::Url;

use super::{
    check_image, check_query, ClientError, ImageResult, LogoDetection, RedirectResolver,
    SearchClient, SearchResult, ThumbnailFetcher, ToolName, VisionClient, VisionDescription,
};

const DESCRIBE_PROMPT: &str = "Describe the brand shown in this webpage screenshot (and cropped logo, if \
given). Transcribe any visible brand names, product names or organisation names, then state which \
brand the page represents. If no brand can be identified, reply with 'no identifiable brand'.";

/// Retries apply to transport failures, HTTP 429 and 5xx responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 2,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(15),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("missing credentials: {}", .0.join(", "))]
pub struct MissingCredential(pub Vec<&'static str>);

#[derive(Debug, Clone, Default)]
pub struct Credentials {
    pub search_api_key: String,
    pub search_engine_id: String,
    pub vision_api_key: String,
    pub logo_api_key: String,
}

impl Credentials {
    pub const ENV_VARS: [&'static str; 4] =
        ["SEARCH_API_KEY", "SEARCH_ENGINE_ID", "VISION_API_KEY", "LOGO_API_KEY"];

    pub fn from_env() -> Result<Self, MissingCredential> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, MissingCredential> {
        let mut missing = Vec::new();
        let mut take = |k: &'static str| match get(k).filter(|v| !v.trim().is_empty()) {
            Some(v) => v,
            None => {
                missing.push(k);
                String::new()
            }
        };
        let creds = Credentials {
            search_api_key: take("SEARCH_API_KEY"),
            search_engine_id: take("SEARCH_ENGINE_ID"),
            vision_api_key: take("VISION_API_KEY"),
            logo_api_key: take("LOGO_API_KEY"),
        };
        if missing.is_empty() {
            Ok(creds)
        } else {
            Err(MissingCredential(missing))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Endpoints {
    pub search: String,
    pub logo: String,
    pub vision: String,
    pub vision_model: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Self {
            search: "https://www.googleapis.com/customsearch/v1".into(),
            logo: "https://vision.googleapis.com/v1/images:annotate".into(),
            vision: "https://api.openai.com/v1/chat/completions".into(),
            vision_model: "gpt-4-turbo".into(),
        }
    }
}

enum Failure {
    Retryable(String),
    Fatal(ClientError),
}

/// HTTP-backed implementation of every tool.
#[derive(Debug, Clone)]
pub struct LiveClient {
    http: Client,
    redirects: Client,
    creds: Credentials,
    endpoints: Endpoints,
    retry: RetryPolicy,
}

impl LiveClient {
    pub fn new(creds: Credentials, endpoints: Endpoints, retry: RetryPolicy) -> Result<Self, ClientError> {
        let build = |policy: Policy| {
            Client::builder()
                .timeout(retry.timeout)
                .redirect(policy)
                .user_agent(concat!("brandcheck/", env!("CARGO_PKG_VERSION")))
                .build()
                .map_err(|e| ClientError::Cassette(format!("http client setup: {e}")))
        };
        Ok(Self {
            http: build(Policy::limited(5))?,
            redirects: build(Policy::limited(10))?,
            creds,
            endpoints,
            retry,
        })
    }

    fn with_retry<T>(
        &self,
        tool: ToolName,
        mut attempt: impl FnMut() -> Result<T, Failure>,
    ) -> Result<T, ClientError> {
        let mut backoff = self.retry.initial_backoff;
        let mut last = String::new();
        for n in 0..=self.retry.retries {
            if n > 0 {
                debug!("{tool}: retry {n} after {backoff:?}");
                thread::sleep(backoff);
                backoff *= 2;
            }
            match attempt() {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(reason)) => {
                    warn!("{tool}: attempt {} failed: {reason}", n + 1);
                    last = reason;
                }
            }
        }
        Err(ClientError::ToolUnavailable { tool, reason: last })
    }

    fn json_response(tool: ToolName, resp: reqwest::Result<Response>) -> Result<Value, Failure> {
        let resp = resp.map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retryable(format!("http {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(ClientError::ToolUnavailable {
                tool,
                reason: format!("http {status}"),
            }));
        }
        resp.json::<Value>()
            .map_err(|e| Failure::Retryable(format!("bad response body: {e}")))
    }

    fn search_url(&self, query: &str, count: usize, image: bool) -> Result<Url, ClientError> {
        let mut url = Url::parse(&self.endpoints.search).map_err(|e| ClientError::ToolUnavailable {
            tool: ToolName::WebSearch,
            reason: format!("bad search endpoint: {e}"),
        })?;
        {
            let mut q = url.query_pairs_mut();
            q.append_pair("key", &self.creds.search_api_key)
                .append_pair("cx", &self.creds.search_engine_id)
                .append_pair("q", query)
                .append_pair("num", &count.to_string());
            if image {
                q.append_pair("searchType", "image");
            }
        }
        Ok(url)
    }

    fn items(body: &Value) -> impl Iterator<Item = &Value> {
        body.get("items")
            .and_then(Value::as_array)
            .map(|a| a.iter())
            .into_iter()
            .flatten()
    }
}

fn str_field<'a>(v: &'a Value, path: &[&str]) -> &'a str {
    let mut cur = v;
    for p in path {
        match cur.get(p) {
            Some(next) => cur = next,
            None => return "",
        }
    }
    cur.as_str().unwrap_or("")
}

fn data_url(image: &[u8]) -> String {
    let mime = match image::guess_format(image) {
        Ok(image::ImageFormat::Jpeg) => "image/jpeg",
        _ => "image/png",
    };
    format!("data:{mime};base64,{}", BASE64.encode(image))
}

pub(crate) fn parse_web_results(body: &Value, count: usize) -> Vec<SearchResult> {
    LiveClient::items(body)
        .take(count)
        .enumerate()
        .map(|(i, item)| SearchResult {
            title: str_field(item, &["title"]).to_string(),
            snippet: str_field(item, &["snippet"]).to_string(),
            link: str_field(item, &["link"]).to_string(),
            display_link: str_field(item, &["displayLink"]).to_string(),
            rank: i as u32 + 1,
        })
        .collect()
}

pub(crate) fn parse_image_results(body: &Value, count: usize) -> Vec<ImageResult> {
    LiveClient::items(body)
        .filter(|item| Url::parse(str_field(item, &["image", "thumbnailLink"])).is_ok())
        .take(count)
        .enumerate()
        .map(|(i, item)| ImageResult {
            thumbnail_link: str_field(item, &["image", "thumbnailLink"]).to_string(),
            source_link: str_field(item, &["link"]).to_string(),
            title: str_field(item, &["title"]).to_string(),
            snippet: str_field(item, &["snippet"]).to_string(),
            context_link: str_field(item, &["image", "contextLink"]).to_string(),
            rank: i as u32 + 1,
        })
        .collect()
}

pub(crate) fn parse_logo_response(body: &Value) -> LogoDetection {
    let best = body
        .pointer("/responses/0/logoAnnotations/0")
        .cloned()
        .unwrap_or(Value::Null);
    let brand = best.get("description").and_then(Value::as_str).map(str::to_string);
    let score = best.get("score").and_then(Value::as_f64).unwrap_or(0.0);
    LogoDetection::new(brand, score)
}

impl SearchClient for LiveClient {
    fn web_search(&self, query: &str, count: usize) -> Result<Vec<SearchResult>, ClientError> {
        let q = check_query(ToolName::WebSearch, query, count)?;
        let url = self.search_url(&q, count, false)?;
        let body = self.with_retry(ToolName::WebSearch, || {
            Self::json_response(ToolName::WebSearch, self.http.get(url.clone()).send())
        })?;
        Ok(parse_web_results(&body, count))
    }

    fn image_search(&self, query: &str, count: usize) -> Result<Vec<ImageResult>, ClientError> {
        let q = check_query(ToolName::ImageSearch, query, count)?;
        let url = self.search_url(&q, count, true)?;
        let body = self.with_retry(ToolName::ImageSearch, || {
            Self::json_response(ToolName::ImageSearch, self.http.get(url.clone()).send())
        })?;
        Ok(parse_image_results(&body, count))
    }
}

impl VisionClient for LiveClient {
    fn detect_logo(&self, image: &[u8]) -> Result<LogoDetection, ClientError> {
        check_image(ToolName::DetectLogo, image)?;
        let body = json!({
            "requests": [{
                "image": {"content": BASE64.encode(image)},
                "features": [{"type": "LOGO_DETECTION", "maxResults": 1}],
            }]
        });
        let mut url = Url::parse(&self.endpoints.logo).map_err(|e| ClientError::ToolUnavailable {
            tool: ToolName::DetectLogo,
            reason: format!("bad logo endpoint: {e}"),
        })?;
        url.query_pairs_mut().append_pair("key", &self.creds.logo_api_key);
        let resp = self.with_retry(ToolName::DetectLogo, || {
            Self::json_response(
                ToolName::DetectLogo,
                self.http.post(url.clone()).json(&body).send(),
            )
        })?;
        Ok(parse_logo_response(&resp))
    }

    fn describe_screenshot(
        &self,
        screenshot: &[u8],
        logo: Option<&[u8]>,
    ) -> Result<VisionDescription, ClientError> {
        check_image(ToolName::Describe, screenshot)?;
        let mut content = vec![
            json!({"type": "text", "text": DESCRIBE_PROMPT}),
            json!({"type": "image_url", "image_url": {"url": data_url(screenshot)}}),
        ];
        if let Some(logo) = logo.filter(|l| !l.is_empty()) {
            content.push(json!({"type": "image_url", "image_url": {"url": data_url(logo)}}));
        }
        let body = json!({
            "model": self.endpoints.vision_model,
            "temperature": 0,
            "messages": [{"role": "user", "content": content}],
        });
        let resp = self.with_retry(ToolName::Describe, || {
            Self::json_response(
                ToolName::Describe,
                self.http
                    .post(&self.endpoints.vision)
                    .bearer_auth(&self.creds.vision_api_key)
                    .json(&body)
                    .send(),
            )
        })?;
        let text = resp
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .unwrap_or("")
            .trim()
            .to_string();
        Ok(VisionDescription { text })
    }
}

impl LiveClient {
    /// Downloads a page's markup, following redirects. Used when a bare URL
    /// is analyzed in live mode.
    pub fn fetch_html(&self, url: &Url) -> Result<String, ClientError> {
        let tool = ToolName::FetchPage;
        self.with_retry(tool, || {
            let resp = self
                .http
                .get(url.clone())
                .send()
                .map_err(|e| Failure::Retryable(e.to_string()))?;
            let status = resp.status();
            if status.is_server_error() || status.as_u16() == 429 {
                return Err(Failure::Retryable(format!("http {status}")));
            }
            if !status.is_success() {
                return Err(Failure::Fatal(ClientError::HttpStatus {
                    tool,
                    status: status.as_u16(),
                }));
            }
            resp.text().map_err(|e| Failure::Retryable(e.to_string()))
        })
    }
}

impl ThumbnailFetcher for LiveClient {
    fn fetch_thumbnail(&self, url: &str) -> Result<Vec<u8>, ClientError> {
        let tool = ToolName::FetchThumbnail;
        self.with_retry(tool, || {
            let resp = self
                .http
                .get(url.trim())
                .send()
                .map_err(|e| Failure::Retryable(e.to_string()))?;
            let status = resp.status();
            if status.is_server_error() || status.as_u16() == 429 {
                return Err(Failure::Retryable(format!("http {status}")));
            }
            if !status.is_success() {
                return Err(Failure::Fatal(ClientError::HttpStatus {
                    tool,
                    status: status.as_u16(),
                }));
            }
            resp.bytes()
                .map(|b| b.to_vec())
                .map_err(|e| Failure::Retryable(e.to_string()))
        })
    }
}

impl RedirectResolver for LiveClient {
    fn resolve_redirect(&self, url: &Url) -> Result<Url, ClientError> {
        self.with_retry(ToolName::ResolveRedirect, || {
            let resp = self
                .redirects
                .get(url.clone())
                .send()
                .map_err(|e| Failure::Retryable(e.to_string()))?;
            Ok(resp.url().clone())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Answers every request with `status` and `body`, counting hits.
    fn serve(status: u16, body: &'static str) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { break };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                while reader.read_line(&mut line).is_ok_and(|n| n > 2) {
                    line.clear();
                }
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        (format!("http://{addr}"), hits)
    }

    fn client(base: &str) -> LiveClient {
        let endpoints = Endpoints {
            search: format!("{base}/search"),
            logo: format!("{base}/logo"),
            vision: format!("{base}/vision"),
            vision_model: "test".into(),
        };
        let retry = RetryPolicy {
            retries: 2,
            initial_backoff: Duration::from_millis(5),
            timeout: Duration::from_secs(2),
        };
        LiveClient::new(Credentials::default(), endpoints, retry).unwrap()
    }

    #[test]
    fn exhausts_retries_then_unavailable() {
        let (base, hits) = serve(503, "{}");
        let err = client(&base).web_search("nike", 5).unwrap_err();
        assert!(matches!(err, ClientError::ToolUnavailable { tool: ToolName::WebSearch, .. }));
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (base, hits) = serve(403, "{}");
        assert!(client(&base).web_search("nike", 5).is_err());
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn parses_search_items() {
        let (base, _) = serve(
            200,
            r#"{"items":[{"title":"Nike. Just Do It","link":"https://www.nike.com/","displayLink":"www.nike.com","snippet":"Inspiring"},{"title":"Nike - Wikipedia","link":"https://en.wikipedia.org/wiki/Nike,_Inc.","displayLink":"en.wikipedia.org","snippet":"x"}]}"#,
        );
        let got = client(&base).web_search("\"Nike\"", 10).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].display_link, "www.nike.com");
        assert_eq!(got[1].rank, 2);
    }

    #[test]
    fn missing_items_is_empty() {
        let (base, _) = serve(200, r#"{"kind":"customsearch#search"}"#);
        assert!(client(&base).image_search("zxqv", 10).unwrap().is_empty());
    }

    #[test]
    fn thumbnail_404_is_http_status() {
        let (base, hits) = serve(404, "");
        let err = client(&base).fetch_thumbnail(&format!("{base}/t.png")).unwrap_err();
        assert_eq!(err, ClientError::HttpStatus { tool: ToolName::FetchThumbnail, status: 404 });
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn logo_response_parsing() {
        let body = json!({"responses": [{"logoAnnotations": [{"description": "AT&T", "score": 0.91}]}]});
        let d = parse_logo_response(&body);
        assert_eq!(d.brand_guess.as_deref(), Some("AT&T"));
        assert!((d.confidence - 0.91).abs() < 1e-12);
        assert_eq!(parse_logo_response(&json!({"responses": [{}]})), LogoDetection::none());
    }

    #[test]
    fn image_items_need_absolute_thumbnail() {
        let body = json!({"items": [
            {"title": "a", "link": "https://x/a.png", "image": {"thumbnailLink": "not a url", "contextLink": "https://x"}},
            {"title": "b", "link": "https://x/b.png", "image": {"thumbnailLink": "https://t/b", "contextLink": "https://x"}},
        ]});
        let got = parse_image_results(&body, 5);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].rank, 1);
        assert_eq!(got[0].title, "b");
    }

    #[test]
    fn credentials_report_every_missing_var() {
        let err = Credentials::from_lookup(|k| (k == "SEARCH_API_KEY").then(|| "k".to_string())).unwrap_err();
        assert_eq!(err.0, vec!["SEARCH_ENGINE_ID", "VISION_API_KEY", "LOGO_API_KEY"]);
    }
}
