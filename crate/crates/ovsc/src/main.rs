use std::io::{self, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use log::LevelFilter;

use ovsc::cli::Cli;
use ovsc::commands;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = cli.global.log_level;
    let manifest_level = if level == LevelFilter::Off {
        level
    } else {
        level.max(LevelFilter::Info)
    };
    env_logger::Builder::new()
        .filter_level(level)
        .filter_module(commands::MANIFEST_TARGET, manifest_level)
        .format_timestamp(None)
        .init();

    let stdout = io::stdout();
    let mut lock = stdout.lock();
    let outcome = commands::run(&cli, &mut lock);
    let _ = lock.flush();
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
