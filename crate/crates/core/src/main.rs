use clap::Parser;
use nonstat_krr::cli::{dispatch, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(dispatch(&cli));
}
