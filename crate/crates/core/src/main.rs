use clap::Parser;

use holonomy_sim::cli::{run, Cli, CliError};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Computation(e)) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
