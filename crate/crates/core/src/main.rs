use clap::Parser;

fn main() {
    std::process::exit(conedp::cli::run(conedp::cli::Cli::parse()));
}
