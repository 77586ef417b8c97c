//! `npc`: synthesize, featurize, sample, train, extract and evaluate.

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match npc_cli::execute(npc_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("npc: {e}");
            ExitCode::FAILURE
        }
    }
}
