use clap::Parser;

fn main() {
    let cli = d2dcache::cli::Cli::parse();
    if let Err(e) = d2dcache::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
