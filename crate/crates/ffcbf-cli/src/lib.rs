//! Command-line front end: batch runs, paired comparisons and replay export.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use ffcbf::barriers::BarrierKind;
use ffcbf::controllers::Mode;
use ffcbf::report::{self, RunManifest, SummaryDoc, SummaryRow, TrialRecord};
use ffcbf::scenario::{run_batch_with, BatchOutcome, LogPolicy, ScenarioConfig, ScenarioKind};
use ffcbf::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "ffcbf",
    version,
    about = "Intersection-crossing experiments with future-focused CBFs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one barrier kind over a batch of trials.
    Run {
        #[arg(long, value_enum)]
        cbf: Option<CbfArg>,
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Run all three barrier kinds on the same trials and tabulate them.
    Compare {
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Convert a trajectory log into plot-ready columns.
    Replay {
        /// Trajectory log written by `run` or `compare`.
        #[arg(long)]
        log: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = LogArg::Failures)]
    pub log_trajectories: LogArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CbfArg {
    Zero,
    Ff,
    Rff,
}

impl From<CbfArg> for BarrierKind {
    fn from(a: CbfArg) -> Self {
        match a {
            CbfArg::Zero => BarrierKind::Zero,
            CbfArg::Ff => BarrierKind::Ff,
            CbfArg::Rff => BarrierKind::Rff,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Straight,
    LeftTurn,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(a: ScenarioArg) -> Self {
        match a {
            ScenarioArg::Straight => ScenarioKind::AllStraight,
            ScenarioArg::LeftTurn => ScenarioKind::OneLeftTurn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Centralized,
    Decentralized,
}

impl From<ModeArg> for Mode {
    fn from(a: ModeArg) -> Self {
        match a {
            ModeArg::Centralized => Mode::Centralized,
            ModeArg::Decentralized => Mode::Decentralized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogArg {
    None,
    Failures,
    All,
}

impl From<LogArg> for LogPolicy {
    fn from(a: LogArg) -> Self {
        match a {
            LogArg::None => LogPolicy::None,
            LogArg::Failures => LogPolicy::Failures,
            LogArg::All => LogPolicy::All,
        }
    }
}

/// Caps the global rayon pool at `FFCBF_THREADS` workers when set.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FFCBF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "FFCBF_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { cbf, batch } => {
            cmd_run(cbf.map(Into::into), &batch).map(|doc| print!("{}", doc.table()))
        }
        Command::Compare { batch } => cmd_compare(&batch).map(|doc| print!("{}", doc.table())),
        Command::Replay { log, out } => cmd_replay(&log, out.as_deref()),
    }
}

fn base_config(args: &BatchArgs) -> Result<ScenarioConfig> {
    let mut config = match &args.config {
        Some(path) => report::load_config(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = args.scenario {
        config.scenario = s.into();
    }
    if let Some(m) = args.mode {
        config.controller.mode = m.into();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs one batch into `dir`: trajectory logs, then the manifest.
fn run_into(
    config: &ScenarioConfig,
    n_trials: usize,
    policy: LogPolicy,
    dir: &Path,
) -> Result<BatchOutcome> {
    create_dir(dir)?;
    let traj_dir = dir.join("trajectories");
    let started_at = report::unix_now();
    let mut written = Vec::new();
    let outcome = run_batch_with(config, n_trials, policy, |result| {
        if let Some(log) = &result.log {
            if written.is_empty() {
                create_dir(&traj_dir)?;
            }
            let name =
                PathBuf::from("trajectories").join(format!("trial_{:05}.csv", result.trial_index));
            report::save_trajectory(&dir.join(&name), log)?;
            written.push((result.trial_index, name));
        }
        Ok(())
    })?;
    written.sort();

    let trials = outcome
        .results
        .iter()
        .map(|r| {
            let log = written
                .binary_search_by_key(&r.trial_index, |(i, _)| *i)
                .ok()
                .map(|k| written[k].1.clone());
            TrialRecord::new(r, log)
        })
        .collect();
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        n_trials,
        started_at,
        finished_at: report::unix_now(),
        outputs: written.into_iter().map(|(_, p)| p).collect(),
        trials,
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(outcome)
}

pub fn cmd_run(cbf: Option<BarrierKind>, args: &BatchArgs) -> Result<SummaryDoc> {
    let mut config = base_config(args)?;
    if let Some(kind) = cbf {
        config.controller.cbf_kind = kind;
    }
    let outcome = run_into(
        &config,
        args.trials as usize,
        args.log_trajectories.into(),
        &args.out,
    )?;
    let doc = SummaryDoc {
        scenario: config.scenario,
        mode: config.controller.mode,
        seed: config.seed,
        rows: vec![SummaryRow {
            cbf: config.controller.cbf_kind,
            summary: outcome.summary,
        }],
    };
    doc.write(&args.out.join("summary.toml"))?;
    Ok(doc)
}

/// Runs the three barrier kinds on identical trial streams.
pub fn cmd_compare(args: &BatchArgs) -> Result<SummaryDoc> {
    let base = base_config(args)?;
    let mut rows = Vec::with_capacity(BarrierKind::ALL.len());
    for kind in BarrierKind::ALL {
        let mut config = base.clone();
        config.controller.cbf_kind = kind;
        let dir = args.out.join(kind.as_str());
        let outcome = run_into(
            &config,
            args.trials as usize,
            args.log_trajectories.into(),
            &dir,
        )?;
        rows.push(SummaryRow {
            cbf: kind,
            summary: outcome.summary,
        });
    }
    let doc = SummaryDoc {
        scenario: base.scenario,
        mode: base.controller.mode,
        seed: base.seed,
        rows,
    };
    doc.write(&args.out.join("summary.toml"))?;
    let table = args.out.join("table.md");
    fs::write(&table, doc.table()).map_err(|e| Error::io(table, e))?;
    Ok(doc)
}

pub fn cmd_replay(log: &Path, out: Option<&Path>) -> Result<()> {
    let trajectory = report::load_trajectory(log)?;
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
            report::write_replay(BufWriter::new(file), &trajectory).map_err(|e| Error::io(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            match report::write_replay(&mut lock, &trajectory).and_then(|_| lock.flush()) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
                _ => Ok(()),
            }
        }
    }
}
