use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use flbench::config::parse_config;
use flbench::experiment::{run_experiment, write_partition_plan};
use flbench::report::{load_rows, render_report, ReportFormat};
use flbench_core::data::{fixture_csv, Provenance, AI4I_FIXTURE_SEED, SCANIA_FIXTURE_SEED};
use flbench_core::error::Error;

/// Federated-learning benchmark harness for imbalanced tabular data.
#[derive(Parser)]
#[command(name = "flbench", version, about)]
struct Cli {
    /// Cap for worker threads (default: all cores). Results do not depend on
    /// this value.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for result and history files.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Compute a client partition plan and write it as JSON.
    Partition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pivot result files into a Table-2-style grid.
    Report {
        /// Glob over result JSON files, e.g. "results/*.result.json".
        #[arg(long)]
        glob: String,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Generate a synthetic dataset fixture shaped like one of the families.
    Fixtures {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        /// Directory the CSV is written into.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        pos_rate: Option<f64>,
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    #[value(name = "ai4i-like")]
    Ai4iLike,
    #[value(name = "scania-like")]
    ScaniaLike,
    #[value(name = "harddrive-like")]
    HarddriveLike,
    #[value(name = "fladi-like")]
    FladiLike,
    Synthetic,
}

impl FixtureKind {
    /// (provenance, file name, default rows, default pos_rate, default dims,
    /// default seed)
    fn defaults(self) -> (Provenance, &'static str, usize, f64, usize, u64) {
        match self {
            FixtureKind::Ai4iLike => (
                Provenance::Ai4i2020,
                "ai4i2020.csv",
                10_000,
                0.0,
                0,
                AI4I_FIXTURE_SEED,
            ),
            FixtureKind::ScaniaLike => (
                Provenance::Scania,
                "scania.csv",
                60_000,
                1.0 / 60.0,
                0,
                SCANIA_FIXTURE_SEED,
            ),
            FixtureKind::HarddriveLike => {
                (Provenance::HardDrive, "harddrive.csv", 20_000, 0.01, 0, 2)
            }
            FixtureKind::FladiLike => (Provenance::FladiLike, "fladi.csv", 4_281, 0.2, 0, 3),
            FixtureKind::Synthetic => (Provenance::Synthetic, "synthetic.csv", 1_000, 0.2, 10, 4),
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io(_) => 3,
        Error::Shape(_) | Error::Train(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(4);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(command: Command) -> flbench_core::error::Result<()> {
    match command {
        Command::Run { config, out } => {
            let cfg = parse_config(&config)?;
            let (row, _) = run_experiment(&cfg, &out)?;
            println!(
                "{} {} K={} {}: fbeta {:.4}, fairness {:.4}, best round {}",
                row.dataset, row.scenario, row.clients, row.method, row.fbeta, row.fairness,
                row.best_round
            );
            Ok(())
        }
        Command::Partition { config, out } => {
            let cfg = parse_config(&config)?;
            let plan = write_partition_plan(&cfg, &out)?;
            println!(
                "wrote {:?} plan with {} clients to {}",
                plan.scheme,
                plan.clients.len(),
                out.display()
            );
            Ok(())
        }
        Command::Report { glob, format } => {
            let rows = load_rows(&glob)?;
            let format = match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Text => ReportFormat::Text,
            };
            print!("{}", render_report(&rows, format)?);
            Ok(())
        }
        Command::Fixtures {
            kind,
            out,
            rows,
            pos_rate,
            dims,
            seed,
        } => {
            let (provenance, file, d_rows, d_rate, d_dims, d_seed) = kind.defaults();
            let csv = fixture_csv(
                provenance,
                rows.unwrap_or(d_rows),
                dims.unwrap_or(d_dims),
                pos_rate.unwrap_or(d_rate),
                seed.unwrap_or(d_seed),
            )?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(file);
            std::fs::write(&path, csv)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}
