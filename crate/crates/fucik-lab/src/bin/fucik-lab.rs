//! Command-line front end: `fucik-lab <task> --config <path> [--out <dir>]
//! [--no-cache]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fucik_lab::config::{parse_config, Task};
use fucik_lab::runner::{run, RunOptions};

#[derive(Parser)]
#[command(
    name = "fucik-lab",
    version,
    about = "Fučík spectrum laboratory for a nonlocal operator on bounded 1-D domains"
)]
struct Cli {
    /// Task to run: spectrum | minimax | curve | nonres | validate.
    task: String,
    /// Path to the configuration file (flat `section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: ./out).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Skip the on-disk matrix cache (always reassemble, never write).
    #[arg(long)]
    no_cache: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let task = match cli.task.parse::<Task>() {
        Ok(t) => t,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(err) => {
            eprintln!("error: cannot read {}: {err}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };
    if let Some(cfg_task) = cfg.task {
        if cfg_task != task {
            log::warn!("config sets task = {cfg_task}, running {task} from the command line");
        }
    }

    let opts = RunOptions {
        out_dir: cli.out,
        use_cache: !cli.no_cache,
    };
    match run(&cfg, task, &opts) {
        Ok(report) => {
            for msg in &report.messages {
                println!("{msg}");
            }
            for path in &report.outputs {
                println!("wrote {}", path.display());
            }
            if report.failures > 0 {
                eprintln!("{} validator(s) failed", report.failures);
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(err) => {
            eprintln!("error [{task}]: {err}");
            ExitCode::from(2)
        }
    }
}
