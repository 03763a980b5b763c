mod config;
mod error;
mod output;
mod run;
mod spec;

use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::Parser;

use crate::error::CliError;
use crate::spec::Cli;

fn fail(err: &CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => e.exit(),
        Err(e) => {
            let field = match e.get(ContextKind::InvalidArg) {
                Some(ContextValue::String(s)) => s.split_whitespace().next().unwrap_or(s).trim_start_matches('-').to_string(),
                _ => "arguments".to_string(),
            };
            let msg = e.kind().to_string();
            return fail(&CliError::validation(field, msg));
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => config::read_config(p)?,
        None => Default::default(),
    };
    let (spec, knobs) = spec::resolve(cli, file)?;
    if let Some(n) = spec::threads(&knobs)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation("threads", e.to_string()))?;
    }
    run::run(&spec)
}
