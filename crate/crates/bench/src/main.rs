use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dppca::experiment::{preset, run_experiment_with_threads, summarize, write_csv, ExperimentConfig, PRESETS};
use dppca::{verify, Error};

/// Seeded sweeps of the private PCA algorithms.
///
/// Each row of the output CSV reports `zeta2` (the ζ² excess-variance
/// fraction) together with `captured_energy` and `optimal_energy`. Plotted
/// "utility" is captured_energy / optimal_energy, where higher is better.
#[derive(Parser)]
#[command(name = "bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write the result CSV.
    Run(RunArgs),
    /// List the built-in presets.
    Presets,
    /// Run the lemma property sweeps.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// Config file (`key = value` lines, `[algorithm]` sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output CSV path. Defaults to the config's `out`, else `<preset>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: RunArgs) -> Result<(), Error> {
    let (mut cfg, default_out) = match (&args.source.config, &args.source.preset) {
        (Some(path), _) => (ExperimentConfig::parse(&std::fs::read_to_string(path)?)?, "results.csv".to_string()),
        (None, Some(name)) => (preset(name)?, format!("{name}.csv")),
        (None, None) => unreachable!("clap enforces one source"),
    };
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    let out = args.out.or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from(default_out));
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if threads == 0 {
        return Err(Error::Usage("--threads must be >= 1".into()));
    }
    eprintln!("running {} rows on {threads} threads", cfg.row_count());
    let records = run_experiment_with_threads(&cfg, threads)?;
    write_csv(BufWriter::new(File::create(&out)?), &records)?;
    eprint!("{}", summarize(&records));
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Presets => {
            for name in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Verify { seed } => match verify::run_all(seed) {
            Ok(reports) => {
                for r in &reports {
                    println!("{r}");
                }
                if !reports.iter().all(|r| r.passed()) {
                    return ExitCode::from(3);
                }
                Ok(())
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) | Error::Config { .. } | Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
