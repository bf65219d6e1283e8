use std::process::ExitCode;

use clap::Parser;
use swbce_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        if n == 0 || pool.is_err() {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
