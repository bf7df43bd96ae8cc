use clap::Parser;

use mpdetect::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
