mod args;
mod commands;
mod error;
mod output;
mod prep;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hankel-id {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
