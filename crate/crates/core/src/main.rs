use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gaussian_qaoa::harness::{exit_code, run_config_file, ExperimentKind};
use gaussian_qaoa::Error;

#[derive(Parser)]
#[command(name = "gqaoa", version, about = "Free-fermion QAOA experiments on transverse-field Ising rings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form dimension counts and critical depth.
    Predict(Common),
    /// Many-body gap along the annealing path.
    GapScan(Common),
    /// Residual-energy distribution at one depth.
    QaoaOpt(Common),
    /// Smallest depth with a successful restart.
    CriticalDepth(Common),
    /// Critical-depth checks over disorder realizations.
    DisorderSweep(Common),
    /// Cross-checks against the dense spin reference.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `optimizer.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// `key=value` with a dotted key, e.g. `optimizer.n_samples=20`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Predict(c) => (ExperimentKind::Predict, c),
            Command::GapScan(c) => (ExperimentKind::GapScan, c),
            Command::QaoaOpt(c) => (ExperimentKind::QaoaOpt, c),
            Command::CriticalDepth(c) => (ExperimentKind::CriticalDepth, c),
            Command::DisorderSweep(c) => (ExperimentKind::DisorderSweep, c),
            Command::Verify(c) => (ExperimentKind::Verify, c),
        }
    }
}

fn run(kind: ExperimentKind, args: Common) -> Result<(), Error> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let mut overrides = vec![format!("kind=\"{}\"", kind.as_str())];
    if let Some(seed) = args.seed {
        overrides.push(format!("optimizer.seed={seed}"));
        if kind == ExperimentKind::Verify {
            overrides.push(format!("verify.seed={seed}"));
        }
    }
    overrides.extend(args.overrides);
    let bundle = run_config_file(&args.config, &overrides, args.out.as_deref())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&bundle.summary).unwrap_or_else(|_| bundle.summary.to_string())
    );
    if kind == ExperimentKind::Verify {
        let failed = bundle.summary["failed"].as_u64().unwrap_or(u64::MAX);
        if failed != 0 {
            return Err(Error::VerificationFailed(failed as usize));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (kind, args) = Cli::parse().command.split();
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
