use std::process::ExitCode;

use clap::Parser;
use cloudprint::Verdict;
use cloudprint_cli::{configure_threads, exit, run, Cli, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli));
    let code = match result {
        Ok(Outcome::Verdict(Verdict::Stolen)) | Ok(Outcome::Done) => exit::STOLEN,
        Ok(Outcome::Verdict(Verdict::NotProven)) => exit::NOT_PROVEN,
        Err(e) => {
            eprintln!("error: {e}");
            exit::ERROR
        }
    };
    ExitCode::from(code as u8)
}
