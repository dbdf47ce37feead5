//! Command-line front end and HTTP service for the brandcheck pipeline.

pub mod config;
pub mod run;
pub mod service;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{CommonArgs, FileConfig, Mode, RunConfig};
pub use run::{cmd_analyze, cmd_eval, exit_code, AnalyzeResponse, Backend, EXIT_BENIGN, EXIT_ERROR, EXIT_PHISHING};

#[derive(Debug, Parser)]
#[command(name = "brandcheck", version, about = "Reference-free phishing detection by brand identification")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify one sample directory or URL. Exit status: 0 benign, 1 phishing, 2 error.
    Analyze {
        /// Sample directory (info.txt, html.txt, shot.png, logo.png) or URL.
        target: String,
        /// Override the sample id used to find the scenario file.
        #[arg(long)]
        id: Option<String>,
    },
    /// Evaluate a corpus and write report.json, report.md and timings.json.
    Eval {
        corpus: PathBuf,
        /// Labels file; defaults to labels.jsonl inside the corpus.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "BRANDCHECK_BIND")]
        bind: Option<String>,
    },
}
