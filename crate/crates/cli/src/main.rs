mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Init(a) => commands::init(a),
        Command::Train(a) => commands::train(a),
        Command::Adapt(a) => commands::adapt(a),
        Command::Verify(a) => commands::verify(a),
        Command::Sparsify(a) => commands::sparsify(a),
        Command::Divergence(a) => commands::divergence(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
