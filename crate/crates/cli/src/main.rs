use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pairgrid::experiment::{
    load_points, run_dynamic, run_static, save_points, write_points, Dataset, Distribution, DynamicConfig,
    DynamicOp, RunReport, StaticConfig, DEFAULT_VERIFY_CUTOFF,
};
use pairgrid::{Config, Mode, StaticAlgo};

mod table;

#[derive(Parser, Debug)]
#[command(name = "pairgrid", version, about = "Closest-pair data generation and benchmarks")]
struct Cli {
    /// Worker threads for the whole process; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a generated dataset to a point file (stdout without --out).
    Gen {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time static algorithms.
    Static {
        #[command(flatten)]
        data: DataArgs,
        /// Algorithm name, or `all`.
        #[arg(long, default_value = "all")]
        algo: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Time batch insertion or deletion on the dynamic structure.
    Dynamic {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1000)]
        batch: usize,
        #[arg(long, default_value = "theoretical")]
        mode: Mode,
        #[arg(long, default_value = "insert")]
        op: DynamicOp,
        /// Also print one row per batch.
        #[arg(long)]
        per_batch: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check every algorithm and both dynamic modes against brute force.
    Verify {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1000)]
        batch: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Read points from this file instead of generating them.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "uniform")]
    dist: Distribution,
}

#[derive(Args, Debug)]
struct OutArgs {
    #[arg(long, default_value_t = DEFAULT_VERIFY_CUTOFF)]
    verify_cutoff: usize,
    /// Also write the reports as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Verification,
}

impl From<pairgrid::Error> for Failure {
    fn from(e: pairgrid::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn dataset(a: &DataArgs) -> Result<Dataset, Failure> {
    Ok(match &a.input {
        Some(path) => load_points(path)?,
        None => Dataset::generate(a.dist, a.n, a.k, a.seed)?,
    })
}

fn emit(reports: &[RunReport], out: &OutArgs) -> Result<(), Failure> {
    print!("{}", table::render(reports));
    if let Some(path) = &out.csv {
        table::write_csv(reports, path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if reports.iter().any(RunReport::failed) {
        return Err(Failure::Verification);
    }
    Ok(())
}

fn static_algos(name: &str) -> Result<Vec<StaticAlgo>, Failure> {
    if name == "all" {
        Ok(StaticAlgo::ALL.to_vec())
    } else {
        name.split(',').map(|s| s.parse::<StaticAlgo>().map_err(Failure::from)).collect()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Gen { data, out } => {
            let ds = dataset(&data)?;
            match out {
                Some(path) => save_points(&ds, &path)?,
                None => write_points(&ds, std::io::stdout().lock())?,
            }
            Ok(())
        }
        Cmd::Static { data, algo, out } => {
            let algos = static_algos(&algo)?;
            let ds = dataset(&data)?;
            let cfg = StaticConfig { seed: data.seed, verify_cutoff: out.verify_cutoff };
            let reports = algos.into_iter().map(|a| run_static(a, &ds, &cfg)).collect::<Result<Vec<_>, _>>()?;
            emit(&reports, &out)
        }
        Cmd::Dynamic { data, batch, mode, op, per_batch, out } => {
            let ds = dataset(&data)?;
            let cfg = DynamicConfig {
                op,
                batch,
                structure: Config::with_mode(mode),
                seed: data.seed,
                verify_cutoff: out.verify_cutoff,
            };
            let batches = run_dynamic(&ds, &cfg)?;
            let total = RunReport::total(&batches).expect("at least one batch");
            let mut reports = if per_batch { batches } else { Vec::new() };
            reports.push(total);
            emit(&reports, &out)
        }
        Cmd::Verify { data, batch, out } => {
            let ds = dataset(&data)?;
            // verification always runs the oracle
            let cutoff = usize::MAX;
            let scfg = StaticConfig { seed: data.seed, verify_cutoff: cutoff };
            let mut reports = Vec::new();
            for a in StaticAlgo::ALL {
                reports.push(run_static(a, &ds, &scfg)?);
            }
            for mode in [Mode::Theoretical, Mode::Simplified] {
                for op in [DynamicOp::Insert, DynamicOp::Delete] {
                    let cfg = DynamicConfig {
                        op,
                        batch,
                        structure: Config::with_mode(mode),
                        seed: data.seed,
                        verify_cutoff: cutoff,
                    };
                    reports.push(RunReport::total(&run_dynamic(&ds, &cfg)?).expect("at least one batch"));
                }
            }
            emit(&reports, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
