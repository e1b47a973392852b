//! `varfilt` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation error.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{BankCommand, Cli, Command, VrrCommand};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<varfilt::Error>() {
            return match e {
                varfilt::Error::Io { .. } | varfilt::Error::Format(_) | varfilt::Error::Checksum { .. } => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Bank(BankCommand::Build(a)) => commands::bank_build(&a),
        Command::Bank(BankCommand::Dump(a)) => commands::bank_dump(&a),
        Command::Tables(a) => commands::tables(&a),
        Command::Filter(a) => commands::filter(&a),
        Command::Vrr(VrrCommand::Variance(a)) => commands::vrr_variance(&a),
        Command::Vrr(VrrCommand::Counts(a)) => commands::vrr_counts(&a),
        Command::Vrr(VrrCommand::Edge(a)) => commands::vrr_edge(&a),
        Command::Test1(a) => commands::test1(&a),
        Command::Test2(a) => commands::test2(&a),
        Command::Denoise(a) => commands::denoise(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
