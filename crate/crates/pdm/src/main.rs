use clap::Parser;

fn main() {
    let cli = pdm::cli::Cli::parse();
    if let Err(e) = pdm::cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
