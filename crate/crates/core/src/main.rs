mod cli;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = cli::Cli::parse();
    let code = match cli::run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tribranch: {e}");
            cli::EXIT_INPUT
        }
    };
    ExitCode::from(code as u8)
}
