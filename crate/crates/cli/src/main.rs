use clap::Parser;

fn main() {
    std::process::exit(fintime_sctl::run(fintime_sctl::Cli::parse()));
}
