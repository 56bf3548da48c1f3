use clap::Parser;
use nzs_bench::cli::{run, Cli};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    std::process::exit(run(cli, args));
}
