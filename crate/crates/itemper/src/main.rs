use clap::{Parser, Subcommand};
use itemper::config::{load_config, Overrides};
use itemper::experiments::execute;
use itemper::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Interacting tempering experiment runner.
#[derive(Parser)]
#[command(name = "itemper", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Parser)]
struct CommonArgs {
    /// Experiment config (JSON); its `kind` must match the subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: config file's stem in the working dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the root seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replica count from the config.
    #[arg(long)]
    replicas: Option<u64>,
    /// Worker threads (default: all cores). Output bytes do not depend on
    /// this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Replica runs recording statistic trajectories.
    Run(CommonArgs),
    /// Coupled pairs from two starts, with per-pair coalescence records.
    Couple(CommonArgs),
    /// Coupled pairs plus the coalescence-bound summary.
    Forget(CommonArgs),
    /// The torpid-mixing demonstration on the near-point-mass target.
    Needle(CommonArgs),
    /// Per-coordinate marginal uniformity at fixed times.
    LemmaUniform(CommonArgs),
    /// Between-process scale-reduction diagnostic.
    Diag(CommonArgs),
    /// Exact worst-case distance curves d(t) and d-bar(t).
    DbarCheck(CommonArgs),
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::Run(_) => "run",
            Command::Couple(_) => "couple",
            Command::Forget(_) => "forget",
            Command::Needle(_) => "needle",
            Command::LemmaUniform(_) => "lemma-uniform",
            Command::Diag(_) => "diag",
            Command::DbarCheck(_) => "dbar-check",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Run(a)
            | Command::Couple(a)
            | Command::Forget(a)
            | Command::Needle(a)
            | Command::LemmaUniform(a)
            | Command::Diag(a)
            | Command::DbarCheck(a) => a,
        }
    }
}

fn run(cli: &Cli) -> itemper::Result<()> {
    let args = cli.command.args();
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let mut config = load_config(&args.config)?;
    if config.kind() != cli.command.kind() {
        return Err(Error::Config(format!(
            "config kind `{}` does not match subcommand `{}`",
            config.kind(),
            cli.command.kind()
        )));
    }
    config.apply(&Overrides {
        seed: args.seed,
        replicas: args.replicas,
    });
    let out_dir = match &args.out {
        Some(p) => p.clone(),
        None => {
            let stem = args
                .config
                .file_stem()
                .ok_or_else(|| Error::Config("cannot derive --out from config path".into()))?;
            PathBuf::from(stem)
        }
    };
    if let Some(eps) = vacuous_epsilon(&config) {
        eprintln!(
            "warning: epsilon = {eps} >= 1 makes the total-variation guarantee vacuous"
        );
    }
    let outcome = execute(&config, &out_dir)?;
    println!("{}", outcome.summary);
    Ok(())
}

fn vacuous_epsilon(config: &itemper::config::ExperimentConfig) -> Option<f64> {
    use itemper::config::ExperimentConfig as E;
    let eps = match config {
        E::Run(c) => c.schedule.epsilon,
        E::Couple(c) | E::Forget(c) => c.schedule.epsilon,
        E::Needle(c) => c.schedule.epsilon,
        E::LemmaUniform(c) => c.schedule.epsilon,
        E::Diag(c) => c.schedule.epsilon,
        E::DbarCheck(_) => return None,
    };
    (eps >= 1.0).then_some(eps)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ Error::Config(_)) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(3)
        }
    }
}
