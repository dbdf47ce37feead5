//! Wiring from a [`RunConfig`] to clients and gateways, plus the analyze and
//! eval commands.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use brandcheck::agent::{LiveGateway, LiveGatewayConfig};
use brandcheck::clients::{
    content_hash, Cassette, CassetteWriter, ClientError, Credentials, Endpoints, LiveClient, Recorder, ReplayClient,
    RetryPolicy, ToolClients, ToolName,
};
use brandcheck::eval::{load_corpus, load_sample_dir, run_suite, summary_row, SuiteOptions, SuiteResult};
use brandcheck::model::parse_absolute_url;
use brandcheck::pipeline::{analyze, GatewayProvider, PipelineError, PipelineOutput, ScenarioSource, SharedGateway};
use brandcheck::{BrandMode, Verdict, WebSample};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;
use url::Url;

use crate::config::{Mode, RunConfig};

pub const EXIT_BENIGN: u8 = 0;
pub const EXIT_PHISHING: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

// one per process, so the size difference does not matter
#[allow(clippy::large_enum_variant)]
enum Tools {
    Replay(ReplayClient),
    Live(LiveClient),
    Record(Recorder<LiveClient>, LiveClient, Arc<CassetteWriter>),
    Custom(Box<dyn ToolClients>),
}

/// Clients and gateways for one process, built once from the config.
pub struct Backend {
    tools: Tools,
    gateways: Box<dyn GatewayProvider>,
    pub mode: Mode,
}

impl Backend {
    pub fn new(cfg: &RunConfig) -> anyhow::Result<Self> {
        cfg.check(|k| std::env::var(k).ok())?;
        let live_parts = || -> anyhow::Result<(LiveClient, Box<dyn GatewayProvider>)> {
            let client = LiveClient::new(Credentials::from_env()?, Endpoints::default(), RetryPolicy::default())?;
            let gw_cfg = LiveGatewayConfig::from_env().ok_or_else(|| anyhow!("{} is not set", LiveGatewayConfig::API_KEY_VAR))?;
            let gateway: Box<dyn GatewayProvider> = Box::new(SharedGateway(Arc::new(LiveGateway::new(gw_cfg)?)));
            Ok((client, gateway))
        };
        let (tools, gateways) = match cfg.mode {
            Mode::Replay => {
                let path = cfg.cassette.as_deref().expect("checked");
                let cassette = Cassette::load(path).with_context(|| format!("loading cassette {}", path.display()))?;
                info!("replaying {} cassette entries from {}", cassette.len(), path.display());
                let scenario = cfg.scenario.as_deref().expect("checked");
                if !scenario.exists() {
                    anyhow::bail!("scenario path {} does not exist", scenario.display());
                }
                let gw: Box<dyn GatewayProvider> = Box::new(ScenarioSource::from_path(scenario));
                (Tools::Replay(ReplayClient::new(Arc::new(cassette))), gw)
            }
            Mode::Live => {
                let (client, gw) = live_parts()?;
                (Tools::Live(client), gw)
            }
            Mode::Record => {
                let (client, gw) = live_parts()?;
                let path = cfg.cassette.as_deref().expect("checked");
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                let writer = Arc::new(CassetteWriter::open(path)?);
                let recorder = Recorder::new(client.clone(), Arc::clone(&writer));
                (Tools::Record(recorder, client, writer), gw)
            }
        };
        Ok(Self {
            tools,
            gateways,
            mode: cfg.mode,
        })
    }

    /// Backend over caller-supplied clients; pages cannot be fetched by URL.
    pub fn with_clients(clients: Box<dyn ToolClients>, gateways: Box<dyn GatewayProvider>, mode: Mode) -> Self {
        Self {
            tools: Tools::Custom(clients),
            gateways,
            mode,
        }
    }

    pub fn clients(&self) -> &dyn ToolClients {
        match &self.tools {
            Tools::Replay(c) => c,
            Tools::Live(c) => c,
            Tools::Record(r, _, _) => r,
            Tools::Custom(c) => c.as_ref(),
        }
    }

    pub fn gateways(&self) -> &dyn GatewayProvider {
        self.gateways.as_ref()
    }

    /// Cassette details for the health endpoint.
    pub fn cassette_status(&self) -> serde_json::Value {
        match &self.tools {
            Tools::Replay(c) => json!({
                "path": c.cassette().path().map(|p| p.display().to_string()),
                "entries": c.cassette().len(),
                "writable": false,
            }),
            Tools::Record(_, _, w) => json!({"path": w.path().display().to_string(), "writable": true}),
            Tools::Live(_) | Tools::Custom(_) => serde_json::Value::Null,
        }
    }

    /// HTML for a bare URL: fetched live, recorded in record mode, and read
    /// back from the cassette in replay mode.
    pub fn page_html(&self, url: &Url) -> Result<String, ClientError> {
        let from_value = |v: &serde_json::Value| v["html"].as_str().unwrap_or_default().to_string();
        match &self.tools {
            Tools::Replay(c) => c.cassette().get(ToolName::FetchPage, url.as_str()).map(from_value),
            Tools::Live(c) => c.fetch_html(url),
            Tools::Record(_, c, w) => {
                let html = c.fetch_html(url)?;
                w.append(ToolName::FetchPage, url.as_str(), json!({ "html": html }))?;
                Ok(html)
            }
            Tools::Custom(_) => Err(ClientError::ToolUnavailable {
                tool: ToolName::FetchPage,
                reason: "no page fetcher configured".into(),
            }),
        }
    }

    pub fn is_recording(&self) -> bool {
        matches!(self.tools, Tools::Record(..))
    }
}

/// What `analyze` prints and the service returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeResponse {
    pub id: String,
    pub url: String,
    pub classification: String,
    pub basis: brandcheck::Basis,
    pub brand: Option<String>,
    pub reason: String,
    pub rounds_used: u32,
    pub query: Option<String>,
    pub domains_checked: Vec<String>,
    pub sample_domain: Option<String>,
    pub redirected_to: Option<String>,
}

impl AnalyzeResponse {
    pub fn new(sample: &WebSample, out: &PipelineOutput) -> Self {
        let c = &out.check;
        Self {
            id: sample.id.clone(),
            url: sample.url.to_string(),
            classification: match c.classification.value() {
                Verdict::Phishing => "phishing",
                Verdict::Benign => "benign",
            }
            .to_string(),
            basis: c.classification.basis(),
            brand: out.verdict.brand.name().map(str::to_string),
            reason: out.verdict.reason.clone(),
            rounds_used: out.verdict.rounds_used,
            query: c.query.clone(),
            domains_checked: c.domains_checked.entries().iter().map(ToString::to_string).collect(),
            sample_domain: c.sample_domain.as_ref().map(ToString::to_string),
            redirected_to: c.redirected_to.clone(),
        }
    }
}

/// Exit status for every pipeline outcome.
pub fn exit_code(outcome: &Result<PipelineOutput, PipelineError>) -> u8 {
    match outcome {
        Ok(out) if out.check.classification.is_phishing() => EXIT_PHISHING,
        Ok(_) => EXIT_BENIGN,
        Err(_) => EXIT_ERROR,
    }
}

/// Id for a sample given only by URL: the host, or a hash when the host
/// would not make a usable file name.
pub fn id_for_url(url: &Url) -> String {
    match url.host_str() {
        Some(h) if !h.starts_with('.') && !h.contains(['/', '\\', ':', '[']) => h.to_string(),
        _ => content_hash(url.as_str().as_bytes())[..16].to_string(),
    }
}

/// Turns the analyze target (sample directory or URL) into a sample.
pub fn load_target(target: &str, id: Option<&str>, backend: &Backend) -> anyhow::Result<WebSample> {
    let path = Path::new(target);
    let mut sample = if path.is_dir() {
        load_sample_dir(path)?
    } else {
        let url = parse_absolute_url(target).map_err(|e| anyhow!("{target:?} is neither a sample directory nor a URL: {e}"))?;
        let html = backend.page_html(&url).with_context(|| format!("fetching {url}"))?;
        WebSample {
            id: id_for_url(&url),
            url,
            html,
            screenshot: None,
            logo_crop: None,
            label: None,
        }
    };
    if let Some(id) = id {
        sample.id = id.to_string();
    }
    Ok(sample)
}

fn record_scenario(cfg: &RunConfig, sample: &WebSample, out: &PipelineOutput) -> anyhow::Result<()> {
    let Some(dir) = &cfg.scenario else { return Ok(()) };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = ScenarioSource::scenario_path(dir, &sample.id, cfg.pipeline.brand_mode)?;
    let body = serde_json::to_string_pretty(&out.transcript.to_scenario())?;
    std::fs::write(&path, body + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Runs one sample and prints the response JSON. Returns the exit status.
pub fn cmd_analyze(cfg: &RunConfig, target: &str, id: Option<&str>) -> u8 {
    let run = || -> anyhow::Result<u8> {
        let backend = Backend::new(cfg)?;
        let sample = load_target(target, id, &backend)?;
        let outcome = analyze(&sample, &cfg.pipeline, backend.clients(), backend.gateways());
        let code = exit_code(&outcome);
        let out = outcome?;
        if backend.is_recording() {
            record_scenario(cfg, &sample, &out)?;
        }
        let body = serde_json::to_string_pretty(&AnalyzeResponse::new(&sample, &out))?;
        writeln!(std::io::stdout().lock(), "{body}")?;
        Ok(code)
    };
    run().unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        EXIT_ERROR
    })
}

pub fn detector_label(cfg: &RunConfig) -> String {
    match cfg.pipeline.brand_mode {
        BrandMode::Agent => format!("this run (agent, budget {})", cfg.pipeline.agent_budget),
        BrandMode::OneShot => "this run (one-shot)".to_string(),
    }
}

pub fn eval(cfg: &RunConfig, corpus: &Path, labels: Option<&Path>) -> anyhow::Result<SuiteResult> {
    let backend = Backend::new(cfg)?;
    let loaded = load_corpus(corpus, labels)?;
    if loaded.samples.is_empty() {
        anyhow::bail!("no samples in {}", corpus.display());
    }
    let opts = SuiteOptions {
        concurrency: cfg.concurrency,
        out_dir: Some(cfg.out.clone()),
        record_scenarios: if backend.is_recording() { cfg.scenario.clone() } else { None },
    };
    let result = run_suite(&loaded.samples, &cfg.pipeline, backend.clients(), backend.gateways(), &opts)?;
    for e in &result.errored {
        warn!("sample {} errored: {}", e.id, e.error);
    }
    Ok(result)
}

/// Evaluates a corpus, writes the reports and prints the summary row.
pub fn cmd_eval(cfg: &RunConfig, corpus: &Path, labels: Option<&Path>) -> u8 {
    let run = || -> anyhow::Result<()> {
        let r = eval(cfg, corpus, labels)?;
        let c = r.report.counts;
        let mut out = std::io::stdout().lock();
        writeln!(out, "| Detector | Precision | Recall | Accuracy | F1 |")?;
        writeln!(out, "|---|---|---|---|---|")?;
        writeln!(out, "{}", summary_row(&detector_label(cfg), &r.report))?;
        writeln!(
            out,
            "\ntp={} fp={} tn={} fn={} errored={}; reports in {}",
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            r.errored.len(),
            cfg.out.display()
        )?;
        Ok(())
    };
    match run() {
        Ok(()) => EXIT_BENIGN,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_ids() {
        assert_eq!(id_for_url(&Url::parse("https://a.example.com/x").unwrap()), "a.example.com");
        let v6 = id_for_url(&Url::parse("http://[::1]:8080/").unwrap());
        assert_eq!(v6.len(), 16);
        assert!(v6.chars().all(|c| c.is_ascii_hexdigit()));
    }
}
