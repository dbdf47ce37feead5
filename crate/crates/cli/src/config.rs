//! Run configuration. Each setting is taken from the command line, then the
//! environment, then the TOML file, then the built-in default.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use brandcheck::agent::LiveGatewayConfig;
use brandcheck::clients::Credentials;
use brandcheck::{BrandMode, CheckerConfig, PipelineConfig, TokenBudget};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_OUT: &str = "eval-out";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    #[default]
    Replay,
    Record,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Replay => "replay",
            Mode::Record => "record",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum BrandModeArg {
    Agent,
    OneShot,
}

impl From<BrandModeArg> for BrandMode {
    fn from(m: BrandModeArg) -> Self {
        match m {
            BrandModeArg::Agent => BrandMode::Agent,
            BrandModeArg::OneShot => BrandMode::OneShot,
        }
    }
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long, global = true, env = "BRANDCHECK_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "MODE", value_enum)]
    pub mode: Option<Mode>,
    /// Number of search results whose domains are compared (1, 5 or 10).
    #[arg(long, global = true, env = "BRANDCHECK_LIST_SIZE")]
    pub list_size: Option<usize>,
    /// Follow the page URL's redirects before declaring a mismatch.
    #[arg(long, global = true, env = "BRANDCHECK_REDIRECT_CHECK", num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub redirect_check: Option<bool>,
    /// Tool calls the agent may make.
    #[arg(long, global = true, env = "BRANDCHECK_BUDGET")]
    pub budget: Option<u32>,
    /// Token budget for the condensed page.
    #[arg(long, global = true, env = "BRANDCHECK_CONDENSE_BUDGET")]
    pub condense_budget: Option<usize>,
    #[arg(long, global = true, env = "BRANDCHECK_BRAND_MODE", value_enum)]
    pub brand_mode: Option<BrandModeArg>,
    #[arg(long, global = true, env = "BRANDCHECK_SIMILARITY_THRESHOLD")]
    pub similarity_threshold: Option<f64>,
    /// Cassette file read in replay mode and appended to in record mode.
    #[arg(long, global = true, env = "BRANDCHECK_CASSETTE")]
    pub cassette: Option<PathBuf>,
    /// Scenario file or directory (replay), or output directory (record).
    #[arg(long, global = true, env = "BRANDCHECK_SCENARIO")]
    pub scenario: Option<PathBuf>,
    #[arg(long, global = true, env = "BRANDCHECK_CONCURRENCY")]
    pub concurrency: Option<usize>,
    #[arg(long, global = true, env = "BRANDCHECK_OUT")]
    pub out: Option<PathBuf>,
}

/// Contents of the TOML config file. Credentials are not accepted here.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<Mode>,
    pub list_size: Option<usize>,
    pub redirect_check: Option<bool>,
    pub budget: Option<u32>,
    pub condense_budget: Option<usize>,
    pub brand_mode: Option<BrandModeArg>,
    pub similarity_threshold: Option<f64>,
    pub cassette: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub out: Option<PathBuf>,
    pub bind: Option<String>,
}

impl FileConfig {
    /// Parses the file; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.cassette, &mut cfg.scenario, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub pipeline: PipelineConfig,
    pub cassette: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub concurrency: usize,
    pub out: PathBuf,
    pub bind: String,
}

impl RunConfig {
    /// Merges flags (already merged with env by clap) over the file.
    pub fn resolve(args: &CommonArgs, file: &FileConfig) -> anyhow::Result<Self> {
        let d = PipelineConfig::default();
        let list_size = args.list_size.or(file.list_size).unwrap_or(d.checker.list_size());
        let checker = CheckerConfig::new(list_size)?
            .with_redirection_check(args.redirect_check.or(file.redirect_check).unwrap_or(false));
        let condense_budget = match args.condense_budget.or(file.condense_budget) {
            Some(n) => TokenBudget::try_from(n)?,
            None => d.condense_budget,
        };
        let agent_budget = args.budget.or(file.budget).unwrap_or(d.agent_budget);
        if agent_budget == 0 {
            bail!("budget must be at least 1");
        }
        let similarity_threshold = args.similarity_threshold.or(file.similarity_threshold).unwrap_or(d.similarity_threshold);
        if !(0.0..=1.0).contains(&similarity_threshold) {
            bail!("similarity threshold must lie in [0, 1], got {similarity_threshold}");
        }
        let concurrency = args.concurrency.or(file.concurrency).unwrap_or(4);
        if concurrency == 0 {
            bail!("concurrency must be at least 1");
        }
        Ok(Self {
            mode: args.mode.or(file.mode).unwrap_or_default(),
            pipeline: PipelineConfig {
                checker,
                agent_budget,
                condense_budget,
                brand_mode: args.brand_mode.or(file.brand_mode).map(Into::into).unwrap_or_default(),
                similarity_threshold,
            },
            cassette: args.cassette.clone().or_else(|| file.cassette.clone()),
            scenario: args.scenario.clone().or_else(|| file.scenario.clone()),
            concurrency,
            out: args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into()),
            bind: file.bind.clone().unwrap_or_else(|| DEFAULT_BIND.into()),
        })
    }

    pub fn from_args(args: &CommonArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Self::resolve(args, &file)
    }

    /// Mode-specific requirements. `env` looks up environment variables.
    pub fn check(&self, env: impl Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        match self.mode {
            Mode::Replay => {
                if self.cassette.is_none() {
                    bail!("replay mode requires --cassette");
                }
                if self.scenario.is_none() {
                    bail!("replay mode requires --scenario");
                }
            }
            Mode::Live | Mode::Record => {
                let mut missing = match Credentials::from_lookup(&env) {
                    Ok(_) => Vec::new(),
                    Err(e) => e.0,
                };
                if env(LiveGatewayConfig::API_KEY_VAR).filter(|v| !v.trim().is_empty()).is_none() {
                    missing.push(LiveGatewayConfig::API_KEY_VAR);
                }
                if !missing.is_empty() {
                    bail!("{} mode requires credentials; missing {}", self.mode, missing.join(", "));
                }
                if self.mode == Mode::Record && self.cassette.is_none() {
                    bail!("record mode requires --cassette");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_none(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(&CommonArgs::default(), &FileConfig::default()).unwrap();
        assert_eq!(c.mode, Mode::Replay);
        assert_eq!(c.pipeline, PipelineConfig::default());
        assert_eq!(c.concurrency, 4);
        assert_eq!(c.bind, DEFAULT_BIND);
    }

    #[test]
    fn flags_win_over_file() {
        let file: FileConfig = toml::from_str("list_size = 1\nbudget = 3\nredirect_check = true\nconcurrency = 2").unwrap();
        let args = CommonArgs {
            list_size: Some(5),
            redirect_check: Some(false),
            ..Default::default()
        };
        let c = RunConfig::resolve(&args, &file).unwrap();
        assert_eq!(c.pipeline.checker.list_size(), 5);
        assert!(!c.pipeline.checker.redirection_check);
        assert_eq!(c.pipeline.agent_budget, 3);
        assert_eq!(c.concurrency, 2);
    }

    #[test]
    fn rejects_bad_values() {
        for args in [
            CommonArgs { list_size: Some(3), ..Default::default() },
            CommonArgs { budget: Some(0), ..Default::default() },
            CommonArgs { concurrency: Some(0), ..Default::default() },
            CommonArgs { condense_budget: Some(0), ..Default::default() },
            CommonArgs { similarity_threshold: Some(1.5), ..Default::default() },
        ] {
            assert!(RunConfig::resolve(&args, &FileConfig::default()).is_err(), "{args:?}");
        }
    }

    #[test]
    fn file_rejects_credentials_and_unknown_keys() {
        assert!(toml::from_str::<FileConfig>("search_api_key = \"x\"").is_err());
        assert!(toml::from_str::<FileConfig>("mode = \"nope\"").is_err());
        let f: FileConfig = toml::from_str("mode = \"record\"\nbrand_mode = \"one_shot\"").unwrap();
        assert_eq!(f.mode, Some(Mode::Record));
        assert_eq!(f.brand_mode, Some(BrandModeArg::OneShot));
    }

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("b.toml");
        std::fs::write(&p, "cassette = \"c/x.jsonl\"\nout = \"/abs\"").unwrap();
        let f = FileConfig::load(&p).unwrap();
        assert_eq!(f.cassette.unwrap(), tmp.path().join("c/x.jsonl"));
        assert_eq!(f.out.unwrap(), PathBuf::from("/abs"));
    }

    #[test]
    fn mode_requirements() {
        let mut c = RunConfig::resolve(&CommonArgs::default(), &FileConfig::default()).unwrap();
        assert!(c.check(env_none).unwrap_err().to_string().contains("--cassette"));
        c.cassette = Some("x.jsonl".into());
        assert!(c.check(env_none).unwrap_err().to_string().contains("--scenario"));
        c.scenario = Some("s".into());
        c.check(env_none).unwrap();

        c.mode = Mode::Live;
        let err = c.check(env_none).unwrap_err().to_string();
        assert!(err.contains("SEARCH_API_KEY") && err.contains("LLM_API_KEY"), "{err}");
        let full = |k: &str| Some(format!("v-{k}"));
        c.check(full).unwrap();

        c.mode = Mode::Record;
        c.cassette = None;
        assert!(c.check(full).unwrap_err().to_string().contains("--cassette"));
    }
}
