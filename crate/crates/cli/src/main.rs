use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    busnet_cli::run(busnet_cli::cli::Cli::parse())
}
