use clap::Parser;

fn main() {
    let cli = polyhe_cli::Cli::parse();
    if let Err(e) = polyhe_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
