use clap::Parser;

fn main() {
    let cli = randcode_cli::Cli::parse();
    if let Err(e) = randcode_cli::run(&cli) {
        eprintln!("randcode: {e}");
        std::process::exit(e.exit_code());
    }
}
