use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use continuity_lab::{load_scenario, run, Mode, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "continuity-lab", version, about = "Solve, certify and compare continuity problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        /// Scenario file.
        file: PathBuf,
        #[arg(long, value_enum, default_value = "simulate")]
        mode: Mode,
        /// Seed of a campaign scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, env = "CONTINUITY_LAB_OUT", default_value = ".")]
        out: PathBuf,
    },
}

/// 0 when every check passes, 1 when a check fails, 2 on error.
fn main() -> ExitCode {
    let Command::Run { file, mode, seed, out } = Cli::parse().command;
    let result = load_scenario(&file).and_then(|s| run(&s, &RunOptions { mode, seed, out_dir: out }));
    match result {
        Ok(reports) => {
            let mut passed = true;
            for r in &reports {
                passed &= r.passed;
                let files: Vec<String> = r.artifacts.iter().map(|p| p.display().to_string()).collect();
                println!("{}: {}", r.scenario, if r.passed { "passed" } else { "failed" });
                for f in files {
                    println!("  wrote {f}");
                }
                for n in &r.notes {
                    println!("  note: {n}");
                }
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
