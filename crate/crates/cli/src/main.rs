//! `hbdr`: train, evaluate, and inspect handwritten digit recognizers.

mod args;
mod common;
mod export;
mod run;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = common::executor(cli.threads).and_then(|exec| match &cli.command {
        Command::Train(a) => run::train(a, exec),
        Command::Eval(a) => run::eval(a, exec),
        Command::Pretrain(a) => run::pretrain(a, exec),
        Command::Export(a) => export::export(a, exec),
        Command::ExportFilters(a) => export::export_filters(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
