use std::process::ExitCode;

use clap::Parser;
use multibump_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(cli, &mut std::io::stdout(), &mut std::io::stderr()))
}
