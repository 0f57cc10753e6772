use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use spider_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            if out
                .write_all(outcome.stdout.as_bytes())
                .and_then(|_| out.flush())
                .is_err()
            {
                return ExitCode::from(1);
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("spider: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
