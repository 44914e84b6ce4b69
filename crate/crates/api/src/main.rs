use clap::Parser;
use metricscope::cli::{run, Cli};

fn main() {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    std::process::exit(run(Cli::parse()));
}
