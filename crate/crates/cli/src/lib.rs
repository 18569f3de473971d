//! `busnet` command line: one subcommand per analysis step over a workspace
//! directory, plus an HTTP service for the planner.

pub mod cli;
pub mod commands;
pub mod error;
pub mod server;
pub mod workspace;

use std::process::ExitCode;

use cli::{Cli, Command};
use commands::Ctx;
use error::{CliError, CliResult};
use workspace::Workspace;

fn dispatch(cli: Cli) -> CliResult<()> {
    let mut cfg = commands::load_config(&cli.workspace, cli.config.as_deref())?;
    if cli.exact {
        cfg.metrics.exact_threshold = usize::MAX;
    }
    if cli.sampled {
        cfg.metrics.exact_threshold = 0;
    }
    let ws = Workspace::open(&cli.workspace, cli.force)?;
    let cfg_text = commands::config_text(&cfg);
    let mut ctx = Ctx { ws, cfg, cfg_text };
    match cli.command {
        Command::Synth {
            seed,
            synth_config,
            full_scale,
            users,
        } => commands::synth(&mut ctx, seed, synth_config.as_deref(), full_scale, users),
        Command::Ingest { from } => commands::ingest(&mut ctx, &from),
        Command::Odm => commands::odm(&mut ctx),
        Command::ValidateSample { seed } => commands::validate_sample(&mut ctx, seed),
        Command::Graph => commands::graph(&mut ctx),
        Command::Communities { seed } => commands::communities(&mut ctx, seed),
        Command::Flows => commands::flows(&mut ctx),
        Command::Intervene { k } => commands::intervene(&mut ctx, k),
        Command::Report => commands::report(&mut ctx),
        Command::Serve { bind } => serve(ctx, &bind),
    }
}

fn serve(mut ctx: Ctx, bind: &str) -> CliResult<()> {
    let snapshot = server::Snapshot::load(&mut ctx.ws, &ctx.cfg)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| CliError::Data(format!("cannot bind {bind}: {e}")))?;
        eprintln!("serving on http://{}", listener.local_addr()?);
        axum::serve(listener, server::router(snapshot))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Data(e.to_string()))
    })
}

pub fn run(cli: Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
