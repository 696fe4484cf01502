use std::process::ExitCode;

use clap::Parser;
use lbo_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match lbo_cli::execute(&cli) {
        Ok(summary) => {
            eprintln!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lbo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
