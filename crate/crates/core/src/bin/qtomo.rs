use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use qtomo::harness::{run_experiment_timed, write_csv, write_outputs, Cli};
use qtomo::Error;

fn run() -> Result<(), Error> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let msg = e.to_string();
            return Err(Error::Config(msg.trim_start_matches("error: ").to_string()));
        }
    };
    let cfg = cli.into_config()?;
    let (rows, timings) = run_experiment_timed(&cfg)?;
    match &cfg.output_path {
        Some(p) => write_outputs(&cfg, &rows, &timings, p)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&rows, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Config(msg)) => {
            eprintln!("config error: {}", msg.trim_end());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
