use clap::Parser;

fn main() {
    let cli = apflow::cli::Cli::parse();
    std::process::exit(apflow::cli::run(&cli));
}
