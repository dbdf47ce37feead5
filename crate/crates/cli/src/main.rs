use std::process::ExitCode;
use std::sync::Arc;

use brandcheck_cli::run::{cmd_analyze, cmd_eval, Backend, EXIT_ERROR};
use brandcheck_cli::service::{serve, AppState};
use brandcheck_cli::{Cli, Command, RunConfig};
use clap::Parser;

fn run_server(cfg: RunConfig, bind: Option<String>) -> anyhow::Result<()> {
    // blocking HTTP clients must be built outside the async runtime
    let backend = Backend::new(&cfg)?;
    let state = Arc::new(AppState::new(backend, cfg.pipeline, cfg.concurrency));
    let bind = bind.unwrap_or(cfg.bind);
    let rt = tokio::runtime::Runtime::new()?;
    let result = rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        serve(listener, state).await
    });
    Ok(result?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match RunConfig::from_args(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let code = match cli.command {
        Command::Analyze { target, id } => cmd_analyze(&cfg, &target, id.as_deref()),
        Command::Eval { corpus, labels } => cmd_eval(&cfg, &corpus, labels.as_deref()),
        Command::Serve { bind } => match run_server(cfg, bind) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_ERROR
            }
        },
    };
    ExitCode::from(code)
}
