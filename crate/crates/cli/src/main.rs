use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use bstraight_cli::{configure_threads, run, Cli, CliError, EXIT_CONFIG};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("bstraight: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    let (outcome, out, format) = run(cli)?;
    let io = |e: io::Error| CliError::Io(e.to_string());
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
            outcome.write(format, &mut w)?;
            w.flush().map_err(io)?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            outcome.write(format, &mut w)?;
            w.flush().map_err(io)?;
        }
    }
    for v in &outcome.report.violations {
        eprintln!("violation: sample {} {}: {}", v.sample, v.check, v.detail);
    }
    Ok(outcome.exit_code)
}
