use clap::Parser;

use alarm_pipeline_cli::{configure_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    configure_threads();
    std::process::exit(run(&cli));
}
