use std::io::Write;
use std::process::ExitCode;

use bbl::cli::{render, run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|o| Ok((render(&o.report, cli.format)?, o.exit_code))) {
        Ok((text, code)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("bbl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
