use clap::Parser;
use mtkd_cli::{run_cli, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run_cli(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
