use clap::Parser;

fn main() {
    let cli = dvcm::cli::Cli::parse();
    if let Err(e) = dvcm::cli::run(cli) {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
