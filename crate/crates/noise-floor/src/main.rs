use clap::Parser;
use noise_floor::cli::{run, CliConfig};

fn main() {
    let config = CliConfig::parse();
    if let Err(e) = run(&config) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
