use std::io::Write;
use std::process::ExitCode;

use breathid_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            // a closed pipe downstream is not an error of the command
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr().lock(), "{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
