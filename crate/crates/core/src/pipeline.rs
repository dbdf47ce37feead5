//! One sample end to end: preprocess, identify the brand, check the domain.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    run_agent, run_one_shot, AgentError, AgentTranscript, GatewayError, ModelGateway, PromptContext,
    ScriptedGateway, ToolRegistry,
};
use crate::checker::{classify, CheckError, CheckOutcome, CheckerConfig};
use crate::clients::{ClientError, LogoDetection, ToolClients, VisionClient, VisionDescription};
use crate::condense::{condense, CondensedPage, TokenBudget};
use crate::model::{BrandVerdict, WebSample, TOOL_BUDGET};
use crate::similarity::{DHash, Scorer, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrandMode {
    /// Tool-calling agent.
    #[default]
    Agent,
    /// Single prompt over condensed HTML, no tools.
    OneShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub checker: CheckerConfig,
    pub agent_budget: u32,
    pub condense_budget: TokenBudget,
    pub brand_mode: BrandMode,
    pub similarity_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            checker: CheckerConfig::default(),
            agent_budget: TOOL_BUDGET,
            condense_budget: TokenBudget::default(),
            brand_mode: BrandMode::Agent,
            similarity_threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Preprocessed signals fed into the prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub page: CondensedPage,
    pub logo_detection: Option<LogoDetection>,
    pub vision: Option<VisionDescription>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("preprocessing failed: {0}")]
    Preprocess(ClientError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl PipelineError {
    /// True when a remote tool or the model was unreachable, as opposed to
    /// missing recordings or bad configuration.
    pub fn is_outage(&self) -> bool {
        let client = match self {
            PipelineError::Preprocess(e) => e,
            PipelineError::Agent(AgentError::Tool(e)) => e,
            PipelineError::Check(CheckError::SearchUnavailable(e) | CheckError::Redirect(e)) => e,
            PipelineError::Agent(AgentError::Gateway(GatewayError::Unavailable(_)))
            | PipelineError::Gateway(GatewayError::Unavailable(_)) => return true,
            _ => return false,
        };
        matches!(client, ClientError::ToolUnavailable { .. } | ClientError::HttpStatus { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub evidence: EvidenceBundle,
    pub verdict: BrandVerdict,
    pub check: CheckOutcome,
    pub transcript: AgentTranscript,
}

/// Supplies the model gateway for each sample.
pub trait GatewayProvider: Send + Sync {
    fn gateway_for(&self, sample_id: &str, mode: BrandMode) -> Result<Arc<dyn ModelGateway>, GatewayError>;
}

/// One gateway shared by every sample (live mode).
pub struct SharedGateway(pub Arc<dyn ModelGateway>);

impl GatewayProvider for SharedGateway {
    fn gateway_for(&self, _: &str, _: BrandMode) -> Result<Arc<dyn ModelGateway>, GatewayError> {
        Ok(Arc::clone(&self.0))
    }
}

/// Scenario files named `<id>.json` (agent) or `<id>.one_shot.json`
/// (baseline) inside a directory, or a single file used for every sample.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Dir(PathBuf),
    File(PathBuf),
}

impl ScenarioSource {
    pub fn from_path(path: &Path) -> Self {
        if path.is_dir() {
            ScenarioSource::Dir(path.to_path_buf())
        } else {
            ScenarioSource::File(path.to_path_buf())
        }
    }

    pub fn scenario_path(dir: &Path, sample_id: &str, mode: BrandMode) -> Result<PathBuf, GatewayError> {
        if sample_id.is_empty() || sample_id.contains(['/', '\\']) || sample_id.starts_with('.') {
            return Err(GatewayError::Scenario {
                path: dir.display().to_string(),
                reason: format!("sample id {sample_id:?} is not usable as a file name"),
            });
        }
        let name = match mode {
            BrandMode::Agent => format!("{sample_id}.json"),
            BrandMode::OneShot => format!("{sample_id}.one_shot.json"),
        };
        Ok(dir.join(name))
    }
}

impl GatewayProvider for ScenarioSource {
    fn gateway_for(&self, sample_id: &str, mode: BrandMode) -> Result<Arc<dyn ModelGateway>, GatewayError> {
        let path = match self {
            ScenarioSource::Dir(dir) => Self::scenario_path(dir, sample_id, mode)?,
            ScenarioSource::File(f) => f.clone(),
        };
        Ok(Arc::new(ScriptedGateway::from_file(&path)?))
    }
}

/// Condenses the HTML and queries the logo detector and vision describer
/// for whichever images the sample carries.
pub fn preprocess(
    sample: &WebSample,
    budget: TokenBudget,
    vision: &dyn VisionClient,
) -> Result<EvidenceBundle, ClientError> {
    let page = condense(&sample.html, budget);
    let logo = sample.logo_crop.as_deref().filter(|b| !b.is_empty());
    let logo_detection = logo.map(|l| vision.detect_logo(l)).transpose()?;
    let vision_out = sample
        .screenshot
        .as_deref()
        .filter(|b| !b.is_empty())
        .map(|s| vision.describe_screenshot(s, logo))
        .transpose()?;
    Ok(EvidenceBundle {
        page,
        logo_detection,
        vision: vision_out,
    })
}

pub fn prompt_context(sample: &WebSample, ev: &EvidenceBundle, threshold: f64) -> PromptContext {
    PromptContext::new(
        &ev.page,
        sample.logo_crop.as_ref().is_some_and(|b| !b.is_empty()),
        sample.screenshot.as_ref().is_some_and(|b| !b.is_empty()),
        ev.logo_detection.as_ref(),
        ev.vision.as_ref(),
    )
    .with_threshold(threshold)
}

/// Runs the full pipeline on one sample.
pub fn analyze(
    sample: &WebSample,
    cfg: &PipelineConfig,
    clients: &dyn ToolClients,
    gateways: &dyn GatewayProvider,
) -> Result<PipelineOutput, PipelineError> {
    let gateway = gateways.gateway_for(&sample.id, cfg.brand_mode)?;
    let (evidence, verdict, transcript) = match cfg.brand_mode {
        BrandMode::Agent => {
            let evidence = preprocess(sample, cfg.condense_budget, clients).map_err(PipelineError::Preprocess)?;
            let ctx = prompt_context(sample, &evidence, cfg.similarity_threshold);
            let scorer = Scorer::new(Box::new(DHash), cfg.similarity_threshold);
            let logo = sample.logo_crop.as_deref().filter(|b| !b.is_empty());
            let tools = ToolRegistry::standard(clients, clients, &scorer, logo);
            let (verdict, transcript) = run_agent(&ctx, gateway.as_ref(), &tools, cfg.agent_budget)?;
            (evidence, verdict, transcript)
        }
        BrandMode::OneShot => {
            let page = condense(&sample.html, cfg.condense_budget);
            let (verdict, transcript) = run_one_shot(&page, gateway.as_ref())?;
            let evidence = EvidenceBundle {
                page,
                logo_detection: None,
                vision: None,
            };
            (evidence, verdict, transcript)
        }
    };
    let check = classify(sample, &verdict, &cfg.checker, clients, Some(clients))?;
    Ok(PipelineOutput {
        evidence,
        verdict,
        check,
        transcript,
    })
}
