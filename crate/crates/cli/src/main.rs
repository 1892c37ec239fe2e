use clap::Parser;
use skgcn_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("SKGCN_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: thread pool: {}", e);
                    std::process::exit(1);
                }
            }
            _ => {
                eprintln!("error: SKGCN_THREADS must be a positive integer, got `{}`", n);
                std::process::exit(2);
            }
        }
    }
    if let Err(e) = skgcn_cli::run(cli) {
        eprintln!("error: {:#}", e);
        std::process::exit(1);
    }
}
