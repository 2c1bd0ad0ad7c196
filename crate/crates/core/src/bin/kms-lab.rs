use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kms_lab_core::config::{load_config, SuiteName};
use kms_lab_core::exponentiable::StepFunction;
use kms_lab_core::runner::{run_suite, RunError};

#[derive(Parser)]
#[command(name = "kms-lab", version, about = "Randomized verification suites for KMS states and trace inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        suite: Option<SuiteName>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the built-in step-function examples as JSON.
    Examples,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Examples => {
            println!("{}", StepFunction::example1().to_json());
            println!("{}", StepFunction::example2().to_json());
            ExitCode::SUCCESS
        }
        Command::Run { config, suite, seed, out } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = suite {
                cfg.suite = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_path = o.display().to_string();
            }
            let report = match run_suite(&cfg) {
                Ok(r) => r,
                Err(RunError::Config(e)) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            };
            if let Err(e) = report.write_outputs(&PathBuf::from(&cfg.output_path)) {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            let s = report.summary;
            println!(
                "{}: passed {} failed {} inconclusive {} in {:.2}s -> {}",
                cfg.suite, s.passed, s.failed, s.inconclusive, report.wall_time_secs, cfg.output_path
            );
            for f in report.failures().take(20) {
                let r = &f.report;
                println!("FAIL {} dim={} [{}] lhs={:e} rhs={:e} trial={}", r.name, r.dim, r.indices, r.lhs, r.rhs, f.trial);
            }
            if s.failed > 0 {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
