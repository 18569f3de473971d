use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "busnet", version, about = "Bus network analytics over a workspace directory")]
pub struct Cli {
    /// Workspace directory, one per analysis
    #[arg(long, global = true, default_value = ".")]
    pub workspace: PathBuf,

    /// Pipeline config (TOML). Defaults to <workspace>/config.toml when present
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Run even when inputs are stale
    #[arg(long, global = true)]
    pub force: bool,

    /// Exact hop metrics whatever the graph size
    #[arg(long, global = true, conflicts_with = "sampled")]
    pub exact: bool,

    /// Hop metrics from sampled sources
    #[arg(long, global = true)]
    pub sampled: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic city into the workspace
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Generator settings (TOML)
        #[arg(long)]
        synth_config: Option<PathBuf>,
        /// Start from the full-size network (4783 stops, 359 routes)
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        users: Option<usize>,
    },
    /// Load and check the five CSV datasets from a directory
    Ingest {
        #[arg(long)]
        from: PathBuf,
    },
    /// Reconstruct origin-destination pairs
    Odm,
    /// Power-law fit and kernel band of sampled against total embarkings
    ValidateSample {
        /// Bootstrap seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Supply graph and hop metrics
    Graph,
    /// Louvain communities and their statistics
    Communities {
        /// Louvain seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Intra and inter community flows by day class
    Flows,
    /// Express links between community centers, with metric trajectory
    Intervene {
        /// Number of interventions
        #[arg(short = 'k', long)]
        k: Option<usize>,
    },
    /// Human-readable summary of every artifact
    Report,
    /// HTTP service for the planner
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}
