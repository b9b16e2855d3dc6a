use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nashlearn::experiment::{error_record, list_experiments, load_config, output_dir, run_experiment};

/// Run a gradient-play experiment from a TOML config or a bundled id.
#[derive(Parser, Debug)]
#[command(name = "nashlearn", version)]
struct Cli {
    /// Config file path or bundled experiment id.
    config: Option<String>,
    /// Output directory (defaults to the config's `output`, else out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for batch operations (default: logical processors).
    #[arg(long)]
    workers: Option<usize>,
    /// List bundled experiments and exit.
    #[arg(long)]
    list: bool,
}

fn fail(e: &nashlearn::Error) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&error_record(e)).unwrap_or_else(|_| e.to_string()));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list {
        print!("{}", list_experiments());
        return ExitCode::SUCCESS;
    }
    let Some(config) = cli.config else {
        eprintln!("nashlearn: give a config path or bundled id, or --list");
        return ExitCode::from(2);
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("nashlearn: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let mut cfg = match load_config(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dir = output_dir(&cfg, cli.out.as_deref());
    match run_experiment(&cfg, &dir) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("\nwrote {} files to {}", outcome.files.len(), outcome.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
