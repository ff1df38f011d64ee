use clap::Parser;
use fpt_exact::cli::{main_with, Args};

fn main() {
    let args = Args::parse();
    std::process::exit(main_with(&args));
}
