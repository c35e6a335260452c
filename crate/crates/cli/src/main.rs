use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use slowfast_vr::bundled::BUNDLED;
use slowfast_vr::{load_config, run_config, CliError, ConfigFile};

#[derive(Parser)]
#[command(name = "slowfast-vr", version, about = "Variance-reduced HMM experiments for slow-fast SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a bundled experiment (see list-experiments).
    Run {
        #[arg(long)]
        config: String,
        /// Output CSV for a single run, output directory for a suite.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the realizations.
        #[arg(long, env = "SLOWFAST_VR_JOBS")]
        jobs: Option<usize>,
        /// Overrides master_seed in every run.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the bundled experiment configs.
    ListExperiments,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,slowfast_core=error")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, jobs, seed } => run(&config, out, jobs, seed),
        Command::ListExperiments => list(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(source: &str, out: Option<PathBuf>, jobs: Option<usize>, seed: Option<u64>) -> Result<(), CliError> {
    let mut file = load_config(source)?;
    if let Some(seed) = seed {
        for run in file.runs_mut() {
            run.master_seed = seed;
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs:?} workers: {e}")))?;
    let written = pool.install(|| run_config(&file, out.as_deref()))?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn list() -> Result<(), CliError> {
    for (name, text) in BUNDLED {
        match ConfigFile::parse(text)? {
            ConfigFile::Suite(s) => println!("{name}\t{} runs\t{}", s.runs.len(), s.description),
            ConfigFile::Single(c) => println!("{name}\t1 run\t{}", c.name),
        }
    }
    Ok(())
}
