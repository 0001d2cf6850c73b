use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use archivesearch_server::cli::{run, Cli};
use archivesearch_server::one_line;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let verb = cli.command.name();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {verb}: cannot start runtime: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {verb}: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
