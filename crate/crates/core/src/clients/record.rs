use std::sync::Arc;

use serde::Serialize;
use serde_json::json;
use url::Url;

use super::{
    check_query, content_hash, describe_key, CassetteWriter, ClientError, ImageResult,
    LogoDetection, RedirectResolver, SearchClient, SearchResult, ThumbnailFetcher, ToolName,
    VisionClient, VisionDescription,
};

/// Forwards to `inner` and appends every successful exchange (plus thumbnail
/// HTTP errors) to a cassette, in the format [`super::ReplayClient`] reads.
pub struct Recorder<C> {
    inner: C,
    writer: Arc<CassetteWriter>,
}

impl<C> Recorder<C> {
    pub fn new(inner: C, writer: Arc<CassetteWriter>) -> Self {
        Self { inner, writer }
    }

    fn store<T: Serialize>(&self, tool: ToolName, key: &str, value: &T) -> Result<(), ClientError> {
        let v = serde_json::to_value(value).map_err(|e| ClientError::Cassette(e.to_string()))?;
        self.writer.append(tool, key, v)
    }
}

impl<C: SearchClient> SearchClient for Recorder<C> {
    fn web_search(&self, query: &str, count: usize) -> Result<Vec<SearchResult>, ClientError> {
        let key = check_query(ToolName::WebSearch, query, count)?;
        let results = self.inner.web_search(&key, count)?;
        self.store(ToolName::WebSearch, &key, &results)?;
        Ok(results)
    }

    fn image_search(&self, query: &str, count: usize) -> Result<Vec<ImageResult>, ClientError> {
        let key = check_query(ToolName::ImageSearch, query, count)?;
        let results = self.inner.image_search(&key, count)?;
        self.store(ToolName::ImageSearch, &key, &results)?;
        Ok(results)
    }
}

impl<C: VisionClient> VisionClient for Recorder<C> {
    fn detect_logo(&self, image: &[u8]) -> Result<LogoDetection, ClientError> {
        let d = self.inner.detect_logo(image)?;
        self.store(ToolName::DetectLogo, &content_hash(image), &d)?;
        Ok(d)
    }

    fn describe_screenshot(
        &self,
        screenshot: &[u8],
        logo: Option<&[u8]>,
    ) -> Result<VisionDescription, ClientError> {
        let d = self.inner.describe_screenshot(screenshot, logo)?;
        self.store(ToolName::Describe, &describe_key(screenshot, logo), &d)?;
        Ok(d)
    }
}

impl<C: ThumbnailFetcher> ThumbnailFetcher for Recorder<C> {
    fn fetch_thumbnail(&self, url: &str) -> Result<Vec<u8>, ClientError> {
        let key = url.trim();
        match self.inner.fetch_thumbnail(key) {
            Ok(bytes) => {
                let hash = self.writer.put_blob(&bytes)?;
                self.writer
                    .append(ToolName::FetchThumbnail, key, json!({"status": 200, "blob": hash}))?;
                Ok(bytes)
            }
            Err(e @ ClientError::HttpStatus { status, .. }) => {
                self.writer
                    .append(ToolName::FetchThumbnail, key, json!({"status": status}))?;
                Err(e)
            }
            Err(e) => Err(e),
        }
    }
}

impl<C: RedirectResolver> RedirectResolver for Recorder<C> {
    fn resolve_redirect(&self, url: &Url) -> Result<Url, ClientError> {
        let target = self.inner.resolve_redirect(url)?;
        self.writer.append(
            ToolName::ResolveRedirect,
            url.as_str(),
            json!({"final_url": target.as_str()}),
        )?;
        Ok(target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::{Cassette, ReplayClient};

    struct Canned;

    impl SearchClient for Canned {
        fn web_search(&self, query: &str, count: usize) -> Result<Vec<SearchResult>, ClientError> {
            Ok((1..=count as u32)
                .map(|rank| SearchResult {
                    title: query.into(),
                    snippet: String::new(),
                    link: format!("https://example.com/{rank}"),
                    display_link: "example.com".into(),
                    rank,
                })
                .collect())
        }
        fn image_search(&self, _: &str, _: usize) -> Result<Vec<ImageResult>, ClientError> {
            Ok(vec![])
        }
    }

    impl VisionClient for Canned {
        fn detect_logo(&self, _: &[u8]) -> Result<LogoDetection, ClientError> {
            Ok(LogoDetection::new(Some("Example".into()), 0.5))
        }
        fn describe_screenshot(&self, _: &[u8], _: Option<&[u8]>) -> Result<VisionDescription, ClientError> {
            Ok(VisionDescription { text: "Example login".into() })
        }
    }

    impl ThumbnailFetcher for Canned {
        fn fetch_thumbnail(&self, url: &str) -> Result<Vec<u8>, ClientError> {
            if url.ends_with("missing") {
                Err(ClientError::HttpStatus { tool: ToolName::FetchThumbnail, status: 404 })
            } else {
                Ok(url.as_bytes().to_vec())
            }
        }
    }

    impl RedirectResolver for Canned {
        fn resolve_redirect(&self, _: &Url) -> Result<Url, ClientError> {
            Ok(Url::parse("https://example.com/home").unwrap())
        }
    }

    #[test]
    fn recorded_session_replays_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.jsonl");
        let rec = Recorder::new(Canned, Arc::new(CassetteWriter::open(&path).unwrap()));
        let live_search = rec.web_search("  example   brand ", 3).unwrap();
        let live_logo = rec.detect_logo(b"logo").unwrap();
        let live_desc = rec.describe_screenshot(b"shot", Some(b"logo")).unwrap();
        let live_thumb = rec.fetch_thumbnail("https://t/1").unwrap();
        assert!(rec.fetch_thumbnail("https://t/missing").is_err());
        let u = Url::parse("http://example.com/").unwrap();
        let live_redirect = rec.resolve_redirect(&u).unwrap();
        drop(rec);

        let replay = ReplayClient::new(Arc::new(Cassette::load(&path).unwrap()));
        assert_eq!(replay.web_search("example brand", 3).unwrap(), live_search);
        assert_eq!(replay.detect_logo(b"logo").unwrap(), live_logo);
        assert_eq!(replay.describe_screenshot(b"shot", Some(b"logo")).unwrap(), live_desc);
        assert_eq!(replay.fetch_thumbnail("https://t/1").unwrap(), live_thumb);
        assert!(matches!(
            replay.fetch_thumbnail("https://t/missing"),
            Err(ClientError::HttpStatus { status: 404, .. })
        ));
        assert_eq!(replay.resolve_redirect(&u).unwrap(), live_redirect);
    }
}
