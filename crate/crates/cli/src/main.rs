use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vqa_lab::experiment::{find_trapped_seeds, run_experiment, ExperimentConfig, ExperimentOutput};
use vqa_lab::optimizer::smoothness_bounds;
use vqa_lab::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CAPACITY: u8 = 3;
const EXIT_ALL_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "vqa-lab",
    version,
    about = "Saddle-escape experiments on simulated variational circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the named experiment of a config and write its CSV files.
    Run {
        config: PathBuf,
        /// Maximum number of runs executing at once.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the trapped starts of a noiseless search as JSON.
    Seeds {
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the smoothness constants and recommended learning rate as JSON.
    Bounds { config: PathBuf },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Capacity(_) => EXIT_CAPACITY,
        Error::Io(_) | Error::Diverged { .. } => EXIT_RUNTIME,
        _ => EXIT_CONFIG,
    }
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Io(e.to_string()))?;
    Ok(pool.install(f))
}

/// Writes through a temporary name so a file is either absent or complete.
fn write_atomic(dir: &Path, name: &str, body: &str) -> Result<(), Error> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, body)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    output: &ExperimentOutput,
) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    write_atomic(dir, "trajectories.csv", &output.trajectories_csv())?;
    write_atomic(dir, "summary.csv", &output.summary_csv())?;
    write_atomic(dir, "config-echo.json", &(config.to_json() + "\n"))?;
    Ok(())
}

fn run(config_path: &Path, jobs: Option<usize>, out: Option<PathBuf>) -> Result<u8, Error> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(dir) = out {
        config.output_dir = dir;
    }
    let output = with_jobs(jobs, || run_experiment(&config))??;
    write_outputs(&config.output_dir, &config, &output)?;
    let failed = output.n_failed();
    eprintln!(
        "{}: {} runs, {failed} failed, written to {}",
        config.experiment.as_str(),
        output.runs.len(),
        config.output_dir.display()
    );
    Ok(if output.all_failed() {
        EXIT_ALL_FAILED
    } else {
        0
    })
}

fn seeds(config_path: &Path, jobs: Option<usize>) -> Result<u8, Error> {
    let config = ExperimentConfig::load(config_path)?;
    let found = with_jobs(jobs, || find_trapped_seeds(&config))??;
    println!(
        "{}",
        serde_json::to_string_pretty(&found).expect("seeds serialize")
    );
    Ok(0)
}

fn bounds(config_path: &Path) -> Result<u8, Error> {
    let config = ExperimentConfig::load(config_path)?;
    let b = smoothness_bounds(&config.layout()?, &config.observable()?)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&b).expect("bounds serialize")
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, jobs, out } => run(&config, jobs, out),
        Command::Seeds { config, jobs } => seeds(&config, jobs),
        Command::Bounds { config } => bounds(&config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
