use clap::Parser;

fn main() {
    let cli = nird_cli::Cli::parse();
    if let Err(e) = nird_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
