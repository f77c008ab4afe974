use clap::Parser;
use lipmin::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(&cli, &mut std::io::stdout().lock()) {
        eprintln!("lipmin: {e}");
        std::process::exit(2);
    }
}
