use std::path::PathBuf;
use std::process::ExitCode;

use catsim_cli::{run, RunOptions};
use clap::Parser;

/// Run one catsim job described by a JSON file.
#[derive(Parser, Debug)]
#[command(name = "catsim", version)]
struct Args {
    /// Job file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Where results and manifest.json go.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides the seed in the job file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trajectory ensembles and sweeps.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let opts = RunOptions {
        config: args.config,
        output_dir: args.output_dir,
        seed: args.seed,
        threads: args.threads,
        quiet: args.quiet,
    };
    match run(&opts) {
        Ok(report) => {
            if !opts.quiet {
                eprintln!(
                    "wrote {} file(s) to {}",
                    report.manifest.outputs.len() + 1,
                    report.output_dir.display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("catsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
