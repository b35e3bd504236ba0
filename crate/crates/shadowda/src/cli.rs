//! Command-line entry point.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use shadowda_core::bench::Method;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;
use crate::formats::ShadowFormat;
use crate::pool::RayonPool;
use crate::stages::Pipeline;
use crate::store::RunDir;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "SHADOWDA_OUT";

#[derive(Parser, Debug)]
#[command(name = "shadowda", version, about = "Domain adaptation benchmarks on classical shadows of imperfect quantum data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML). Optional when --task is given.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Run directory. Defaults to $SHADOWDA_OUT/<task>-s<seed>, or runs/<task>-s<seed>.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (0: one per core). Results do not depend on it.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub jobs: usize,
    /// Shadow file format written by gen-shadows.
    #[arg(long, global = true, value_enum)]
    pub format: Option<ShadowFormat>,
    /// Task id, overriding the config.
    #[arg(long, global = true, value_name = "ID")]
    pub task: Option<String>,
    /// Selection criterion (repeatable): ensv, infomax.
    #[arg(long, global = true, value_name = "NAME")]
    pub criterion: Vec<String>,
    /// Method (repeatable): uda, erm, kkmeans, spectral, pca.
    #[arg(long, global = true, value_name = "NAME")]
    pub method: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Sample parameters, label them and prepare the fixed states.
    GenStates,
    /// Draw every trial's shadows.
    GenShadows,
    /// Feature tensors from the shadows (exact source features where configured).
    Features,
    /// Train the CDAN grid on every trial.
    TrainUda,
    /// Source-only training with k-fold CV on every trial.
    TrainErm,
    /// Clustering baselines over the kernel grid (--method kkmeans|spectral|pca).
    ClusterBaseline,
    /// Label-free model selection.
    Select,
    /// Score the selections on target-unseen.
    Evaluate,
    /// Aggregate rows into the report, table and prediction grid.
    Report,
    /// All stages for one task.
    FullRun,
}

fn run_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    if let Some(o) = &cli.out {
        return o.clone();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{}-s{}", cfg.task.id, cfg.plan.seed))
}

fn methods_for(cmd: Command, cfg: &RunConfig) -> Result<Vec<Method>, CliError> {
    let pick = |f: fn(&Method) -> bool| cfg.methods.iter().copied().filter(f).collect::<Vec<_>>();
    let v = match cmd {
        Command::TrainUda => vec![Method::Uda],
        Command::TrainErm => vec![Method::Erm],
        Command::ClusterBaseline => pick(|m| matches!(m, Method::Cluster(_))),
        _ => cfg.methods.clone(),
    };
    if v.is_empty() {
        return Err(CliError::Config("no clustering method selected (pass --method kkmeans|spectral|pca)".into()));
    }
    Ok(v)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let ov = Overrides {
        task: cli.task.clone(),
        seed: cli.seed,
        methods: cli.method.clone(),
        criteria: cli.criterion.clone(),
        format: cli.format,
    };
    let cfg = RunConfig::load(cli.config.as_deref(), &ov)?;
    let methods = methods_for(cli.command, &cfg)?;
    let exec = RayonPool::new(cli.jobs).map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let dir = run_dir(cli, &cfg);
    log::info!("run directory {}, {} threads", dir.display(), exec.threads());
    let p = Pipeline::new(cfg, RunDir::new(dir), exec);
    match cli.command {
        Command::GenStates => drop(p.gen_states()?),
        Command::GenShadows => drop(p.gen_shadows(p.cfg.format)?),
        Command::Features => drop(p.features()?),
        Command::TrainUda | Command::TrainErm | Command::ClusterBaseline => {
            for m in methods {
                p.train(m)?;
            }
        }
        Command::Select => {
            for m in methods {
                p.select(m)?;
            }
        }
        Command::Evaluate => {
            for m in methods {
                p.evaluate(m)?;
            }
        }
        Command::Report => print!("{}", p.report()?.table()),
        Command::FullRun => print!("{}", p.full_run()?.table()),
    }
    Ok(())
}

/// Parse `args`, run, and return the process exit status. Usage errors
/// count as config errors.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
