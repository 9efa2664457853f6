use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use projlab_cli::{list_experiments, run_file, RunOptions, EXIT_ERROR};

/// Run projection, incidence and high/low frequency experiments from a JSON config.
#[derive(Parser, Debug)]
#[command(name = "projlab", version)]
struct Args {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "PATH", required_unless_present = "list_experiments")]
    config: Option<PathBuf>,
    /// Output directory (defaults to the config's "output", then ./projlab-out).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, value_name = "N", env = "PROJLAB_THREADS")]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Write the synthesized fields of spectral experiments as raw complex64.
    #[arg(long)]
    dump_field: bool,
    /// Print experiments, parameters and CSV columns, then exit.
    #[arg(long)]
    list_experiments: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list_experiments {
        print!("{}", list_experiments());
        return ExitCode::SUCCESS;
    }
    if args.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_ERROR);
    }
    let opts = RunOptions {
        out: args.out,
        threads: args.threads,
        seed: args.seed,
        dump_field: args.dump_field,
    };
    let path = args.config.expect("clap enforces --config");
    match run_file(&path, &opts) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
