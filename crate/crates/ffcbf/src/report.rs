//! File formats: configuration, summaries, trajectory logs, replay series and
//! run manifests.
//!
//! | File | Format |
//! |------|--------|
//! | config | TOML, sections mirror [`ScenarioConfig`]; unknown keys are errors |
//! | summary | TOML document, one `[[rows]]` entry per barrier kind |
//! | trajectory log | CSV, header row, floats as `{:.8e}` (9 significant digits) |
//! | replay | CSV, same float format, plot-ready columns |
//! | manifest | pretty-printed JSON |
//!
//! Trajectory log header for `n` vehicles, with pairs ordered
//! `(0,1), (0,2), …, (n−2,n−1)`:
//!
//! ```text
//! t,x_0,y_0,psi_0,beta_0,v_0,omega_0,a_0,…,H_0_1,h0_0_1,…
//! ```
//!
//! The replay header is the same without the `beta_i` columns, so it has
//! `1 + 6n + 2·n(n−1)/2` columns.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::barriers::BarrierKind;
use crate::controllers::Mode;
use crate::dynamics::{ControlInput, VehicleState};
use crate::error::{Error, Result};
use crate::scenario::{
    BatchSummary, LogRow, ScenarioConfig, ScenarioKind, TrajectoryLog, TrialResult,
};

/// Reads and validates a TOML scenario configuration.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: ScenarioConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
    config.validate().map_err(|e| Error::parse(path, e))?;
    Ok(config)
}

pub fn config_to_toml(config: &ScenarioConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::InvalidConfig(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRow {
    pub cbf: BarrierKind,
    pub summary: BatchSummary,
}

/// Summary document for one `run` (one row) or one `compare` (three rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDoc {
    pub scenario: ScenarioKind,
    pub mode: Mode,
    pub seed: u64,
    pub rows: Vec<SummaryRow>,
}

impl SummaryDoc {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn row(&self, cbf: BarrierKind) -> Option<&BatchSummary> {
        self.rows.iter().find(|r| r.cbf == cbf).map(|r| &r.summary)
    }

    /// Markdown table with one line per barrier kind.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "| CBF | Success | Feas. | DLock | Unsafe | Avg. Time |"
        );
        let _ = writeln!(
            out,
            "|-----|---------|-------|-------|--------|-----------|"
        );
        for row in &self.rows {
            let s = &row.summary;
            let time = s
                .avg_time
                .map_or_else(|| "-".to_string(), |t| format!("{t:.2}"));
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {} |",
                row.cbf, s.success_rate, s.feas_rate, s.deadlock_rate, s.unsafe_rate, time
            );
        }
        out
    }
}

fn trajectory_header(n: usize, with_beta: bool) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 0..n {
        let fields: &[&str] = if with_beta {
            &["x", "y", "psi", "beta", "v", "omega", "a"]
        } else {
            &["x", "y", "psi", "v", "omega", "a"]
        };
        cols.extend(fields.iter().map(|f| format!("{f}_{i}")));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            cols.push(format!("H_{i}_{j}"));
            cols.push(format!("h0_{i}_{j}"));
        }
    }
    cols
}

fn push_value(line: &mut String, v: f64) {
    let _ = write!(line, ",{v:.8e}");
}

fn row_line(row: &LogRow, with_beta: bool) -> String {
    let mut line = format!("{:.8e}", row.t);
    for (z, u) in row.states.iter().zip(&row.inputs) {
        push_value(&mut line, z.x);
        push_value(&mut line, z.y);
        push_value(&mut line, z.psi);
        if with_beta {
            push_value(&mut line, z.beta);
        }
        push_value(&mut line, z.v);
        push_value(&mut line, u.omega);
        push_value(&mut line, u.a);
    }
    for (h, h0) in row.barrier.iter().zip(&row.h0) {
        push_value(&mut line, *h);
        push_value(&mut line, *h0);
    }
    line
}

fn write_rows<W: Write>(mut out: W, log: &TrajectoryLog, with_beta: bool) -> std::io::Result<()> {
    writeln!(
        out,
        "{}",
        trajectory_header(log.num_vehicles, with_beta).join(",")
    )?;
    for row in &log.rows {
        writeln!(out, "{}", row_line(row, with_beta))?;
    }
    out.flush()
}

pub fn write_trajectory<W: Write>(out: W, log: &TrajectoryLog) -> std::io::Result<()> {
    write_rows(out, log, true)
}

/// Plot-ready per-step series without the slip angle.
pub fn write_replay<W: Write>(out: W, log: &TrajectoryLog) -> std::io::Result<()> {
    write_rows(out, log, false)
}

pub fn save_trajectory(path: &Path, log: &TrajectoryLog) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory(BufWriter::new(file), log).map_err(|e| Error::io(path, e))
}

/// Parses a trajectory log written by [`write_trajectory`]. `source` only
/// names the input in error messages.
pub fn read_trajectory<R: Read>(input: R, source: &Path) -> Result<TrajectoryLog> {
    let bad = |line: usize, msg: String| Error::parse(source, format!("line {line}: {msg}"));
    let mut lines = BufReader::new(input).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(source, e))?,
        None => return Err(bad(1, "empty file".into())),
    };
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    let n = (0..=64usize)
        .find(|&n| 1 + 7 * n + n * n.saturating_sub(1) == cols.len())
        .ok_or_else(|| bad(1, format!("unexpected column count {}", cols.len())))?;
    if cols != trajectory_header(n, true) {
        return Err(bad(1, "header does not match the trajectory format".into()));
    }

    let mut log = TrajectoryLog {
        num_vehicles: n,
        rows: Vec::new(),
    };
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| bad(line_no, e.to_string()))?;
        if values.len() != cols.len() {
            return Err(bad(
                line_no,
                format!("expected {} fields, found {}", cols.len(), values.len()),
            ));
        }
        let (vehicles, pairs) = values[1..].split_at(7 * n);
        log.rows.push(LogRow {
            t: values[0],
            states: vehicles
                .chunks(7)
                .map(|c| VehicleState::new(c[0], c[1], c[2], c[3], c[4]))
                .collect(),
            inputs: vehicles
                .chunks(7)
                .map(|c| ControlInput::new(c[5], c[6]))
                .collect(),
            barrier: pairs.iter().step_by(2).copied().collect(),
            h0: pairs.iter().skip(1).step_by(2).copied().collect(),
        });
    }
    Ok(log)
}

pub fn load_trajectory(path: &Path) -> Result<TrajectoryLog> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory(file, path)
}

/// Per-trial line of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial_index: u64,
    /// Random stream of the trial; the generator is seeded with the batch seed.
    pub stream: u64,
    pub resamples: usize,
    pub outcome: String,
    pub success: bool,
    pub always_feasible: bool,
    pub deadlock: bool,
    pub timeout: bool,
    #[serde(rename = "unsafe")]
    pub unsafe_: bool,
    pub completion_time: Option<f64>,
    /// `None` when the trial had a single vehicle.
    pub min_h0: Option<f64>,
    pub log: Option<PathBuf>,
}

impl TrialRecord {
    pub fn new(result: &TrialResult, log: Option<PathBuf>) -> Self {
        Self {
            trial_index: result.trial_index,
            stream: result.trial_index,
            resamples: result.resamples,
            outcome: result.outcome().to_string(),
            success: result.success,
            always_feasible: result.always_feasible,
            deadlock: result.deadlock,
            timeout: result.timeout,
            unsafe_: result.unsafe_,
            completion_time: result.completion_time,
            min_h0: result.min_h0.is_finite().then_some(result.min_h0),
            log,
        }
    }

    /// True when both records carry the same outcome flags.
    pub fn same_flags(&self, other: &Self) -> bool {
        (
            self.success,
            self.always_feasible,
            self.deadlock,
            self.timeout,
            self.unsafe_,
        ) == (
            other.success,
            other.always_feasible,
            other.deadlock,
            other.timeout,
            other.unsafe_,
        )
    }
}

/// Everything needed to re-run a batch and check it against the original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: String,
    pub config: ScenarioConfig,
    pub n_trials: usize,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub outputs: Vec<PathBuf>,
    pub trials: Vec<TrialRecord>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}
