use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = sth_service::cli::Cli::parse();
    match sth_service::cli::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
