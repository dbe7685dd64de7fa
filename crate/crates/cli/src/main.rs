use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use realitygame_cli::experiment::run_experiment;
use realitygame_cli::spec::{load_spec, ExperimentKind};
use realitygame_cli::verify::{self, Scale};

#[derive(Parser)]
#[command(name = "realitygame", version, about = "Simulate the reality game and reproduce its experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec file (`key = value` lines).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensembles.
    #[arg(long, env = "REALITYGAME_WORKERS")]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Full,
    Reduced,
}

#[derive(Subcommand)]
enum Command {
    /// Bias of the coin over time for several seeds.
    BiasDynamics(RunArgs),
    /// Wealth of each strategy over time and the eventual winner.
    WealthDynamics(RunArgs),
    /// Exact heads-count distribution for the identity map.
    SubjectiveDistribution(RunArgs),
    /// Expected log-return of a rational player against the population.
    RationalCurve(RunArgs),
    /// Ensemble inefficiency and its power-law fit.
    Inefficiency(RunArgs),
    /// Fitted against predicted exponents for the six standard maps.
    Table1(RunArgs),
    /// Run the acceptance checks.
    Verify {
        #[arg(long, value_enum, default_value = "reduced")]
        scale: ScaleArg,
        #[arg(long, env = "REALITYGAME_WORKERS")]
        workers: Option<usize>,
    },
}

fn pool(workers: Option<usize>) -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        if k == 0 {
            bail!("--workers must be at least 1");
        }
        builder = builder.num_threads(k);
    }
    Ok(builder.build()?)
}

fn run(kind: ExperimentKind, args: RunArgs) -> anyhow::Result<()> {
    let mut spec = load_spec(&args.spec)?;
    if spec.kind != kind {
        bail!(
            "{} declares kind = {}, but the subcommand is {kind}",
            args.spec.display(),
            spec.kind
        );
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let pool = pool(args.workers)?;
    let output = pool
        .install(|| run_experiment(&spec, &args.out))
        .with_context(|| format!("{kind} experiment failed"))?;
    println!("{}", output.summary);
    let aborted = output.runs.iter().filter(|r| r.status != "ok").count();
    if aborted > 0 {
        eprintln!("warning: {aborted} run(s) aborted; see manifest.json");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BiasDynamics(a) => run(ExperimentKind::BiasDynamics, a),
        Command::WealthDynamics(a) => run(ExperimentKind::WealthDynamics, a),
        Command::SubjectiveDistribution(a) => run(ExperimentKind::SubjectiveDistribution, a),
        Command::RationalCurve(a) => run(ExperimentKind::RationalCurve, a),
        Command::Inefficiency(a) => run(ExperimentKind::Inefficiency, a),
        Command::Table1(a) => run(ExperimentKind::Table1, a),
        Command::Verify { scale, workers } => {
            let scale = match scale {
                ScaleArg::Full => Scale::Full,
                ScaleArg::Reduced => Scale::Reduced,
            };
            pool(workers).and_then(|p| {
                let reports = p.install(|| verify::run_all(scale, |r| println!("{r}")))?;
                let failed = reports.iter().filter(|r| !r.passed).count();
                if failed > 0 {
                    bail!("{failed} of {} criteria failed", reports.len());
                }
                Ok(())
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
