use clap::Parser;

fn main() {
    std::process::exit(chc::cli::main_with(chc::cli::Cli::parse()));
}
