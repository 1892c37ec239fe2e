//! Command-line front end: argument parsing, experiment configs and the
//! five subcommands.

pub mod args;
pub mod commands;
pub mod config;

use args::{Cli, Command};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenData(a) => {
            let manifest = commands::gen_data(&a)?;
            println!("wrote {}", manifest.display());
        }
        Command::Train(a) => {
            let s = commands::train(&a)?;
            println!(
                "test top-1 {:.4} (best {:.4} at epoch {}); run in {}",
                s.top1,
                s.best_top1,
                s.best_epoch,
                s.out.display()
            );
            println!("sha256 {}", s.sha256);
        }
        Command::Evaluate(a) => {
            let r = commands::evaluate_cmd(&a)?;
            println!("top-1 {:.4} over {} samples", r.top1_accuracy, r.total());
            for (k, (c, t)) in r.per_class_correct.iter().zip(&r.per_class_total).enumerate() {
                println!("class {}: {}/{}", k, c, t);
            }
        }
        Command::NoiseSweep(a) => {
            let rows = commands::noise_sweep(&a, |r| {
                eprintln!("{} {}={} seed {}: {:.4}", r.variant, r.kind, r.level, r.seed, r.test_top1)
            })?;
            println!("wrote {} rows to {}", rows.len(), a.out.join("sweep.csv").display());
        }
        Command::Analyze(a) => {
            for path in commands::analyze(&a)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
