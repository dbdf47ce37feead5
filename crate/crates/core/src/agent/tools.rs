//! The agent's toolkit: web search and image search with logo similarity.

use log::info;
use serde_json::{json, Value};

use super::gateway::ToolSpec;
use crate::clients::{ClientError, SearchClient, ThumbnailFetcher};
use crate::similarity::{annotate_image_results, Scorer, DEFAULT_FETCH_PARALLELISM};

pub const WEB_SEARCH_TOOL: &str = "get_google_search_results";
pub const IMAGE_SEARCH_TOOL: &str = "get_google_img_search_res";

pub const MAX_QUERY_CHARS: usize = 256;
const WEB_RESULTS: usize = 10;
const IMAGE_RESULTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ToolFailure {
    /// Reported back to the model as the tool result.
    Recoverable(String),
    /// Aborts the run (e.g. a cassette miss during replay).
    Fatal(ClientError),
}

impl From<ClientError> for ToolFailure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::CassetteMiss { .. } | ClientError::Cassette(_) => ToolFailure::Fatal(e),
            other => ToolFailure::Recoverable(other.to_string()),
        }
    }
}

pub trait AgentTool: Send + Sync {
    fn spec(&self) -> ToolSpec;
    fn call(&self, arguments: &Value) -> Result<Value, ToolFailure>;
}

/// Trims the model-supplied query and caps it at [`MAX_QUERY_CHARS`].
pub fn sanitize_query(arguments: &Value) -> Result<String, ToolFailure> {
    let raw = match arguments {
        Value::Object(m) => m.get("query").and_then(Value::as_str),
        Value::String(s) => Some(s.as_str()),
        _ => None,
    }
    .ok_or_else(|| ToolFailure::Recoverable("missing string argument 'query'".into()))?;
    let q = raw.trim();
    if q.is_empty() {
        return Err(ToolFailure::Recoverable("query is empty".into()));
    }
    if q.chars().count() > MAX_QUERY_CHARS {
        info!("truncating {}-char tool query to {MAX_QUERY_CHARS}", q.chars().count());
        return Ok(q.chars().take(MAX_QUERY_CHARS).collect::<String>().trim_end().to_string());
    }
    Ok(q.to_string())
}

fn query_schema(description: &str) -> Value {
    json!({
        "type": "object",
        "properties": {"query": {"type": "string", "description": description}},
        "required": ["query"],
    })
}

pub struct WebSearchTool<'a> {
    pub search: &'a dyn SearchClient,
}

impl AgentTool for WebSearchTool<'_> {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: WEB_SEARCH_TOOL.into(),
            description: "Google Search. Input: text query; Output: search results with URLs, snippets and titles."
                .into(),
            parameters: query_schema("text query"),
        }
    }

    fn call(&self, arguments: &Value) -> Result<Value, ToolFailure> {
        let q = sanitize_query(arguments)?;
        let results = self.search.web_search(&q, WEB_RESULTS)?;
        Ok(json!({"query": q, "results": results}))
    }
}

pub struct ImageSearchTool<'a> {
    pub search: &'a dyn SearchClient,
    pub fetch: &'a dyn ThumbnailFetcher,
    pub scorer: &'a Scorer,
    pub logo: Option<&'a [u8]>,
}

impl AgentTool for ImageSearchTool<'_> {
    fn spec(&self) -> ToolSpec {
        ToolSpec {
            name: IMAGE_SEARCH_TOOL.into(),
            description: "Google Image Search. Input: text query; Output: image URLs, basic info, snippets, titles \
and a similarity score against the webpage's logo image."
                .into(),
            parameters: query_schema("text query"),
        }
    }

    fn call(&self, arguments: &Value) -> Result<Value, ToolFailure> {
        let q = sanitize_query(arguments)?;
        let results = self.search.image_search(&q, IMAGE_RESULTS)?;
        let annotated =
            annotate_image_results(self.logo, results, self.fetch, self.scorer, DEFAULT_FETCH_PARALLELISM);
        Ok(json!({"query": q, "results": annotated}))
    }
}

#[derive(Default)]
pub struct ToolRegistry<'a> {
    tools: Vec<Box<dyn AgentTool + 'a>>,
}

impl<'a> ToolRegistry<'a> {
    pub fn new() -> Self {
        Self { tools: Vec::new() }
    }

    /// Web search plus logo-aware image search.
    pub fn standard(
        search: &'a dyn SearchClient,
        fetch: &'a dyn ThumbnailFetcher,
        scorer: &'a Scorer,
        logo: Option<&'a [u8]>,
    ) -> Self {
        Self::new()
            .with(WebSearchTool { search })
            .with(ImageSearchTool {
                search,
                fetch,
                scorer,
                logo,
            })
    }

    pub fn with(mut self, tool: impl AgentTool + 'a) -> Self {
        self.tools.push(Box::new(tool));
        self
    }

    pub fn specs(&self) -> Vec<ToolSpec> {
        self.tools.iter().map(|t| t.spec()).collect()
    }

    pub fn dispatch(&self, name: &str, arguments: &Value) -> Result<Value, ToolFailure> {
        match self.tools.iter().find(|t| t.spec().name == name) {
            Some(tool) => tool.call(arguments),
            None => Err(ToolFailure::Recoverable(format!("unknown tool {name:?}"))),
        }
    }
}
