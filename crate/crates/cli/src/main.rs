//! `stabcert` command-line front end.

mod args;
mod builtin;
mod commands;
mod failure;
mod items;
mod record;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    let outcome = match &cli.command {
        Command::Certify(a) => commands::certify(a),
        Command::Curve(a) => commands::curve(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Bise(a) => commands::bise(a),
        Command::Rankstab(a) => commands::rankstab(a),
        Command::Smooth(a) => commands::smooth(a),
        Command::Serve(a) => commands::serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("stabcert: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
