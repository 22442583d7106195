use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{run_trial, TrialResult};
use super::ScenarioConfig;
use crate::error::{Error, Result};

/// Which trials keep their full trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogPolicy {
    None,
    #[default]
    Failures,
    All,
}

impl LogPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            LogPolicy::None => "none",
            LogPolicy::Failures => "failures",
            LogPolicy::All => "all",
        }
    }

    fn keep(self, result: &TrialResult) -> bool {
        match self {
            LogPolicy::None => false,
            LogPolicy::Failures => result.is_failure(),
            LogPolicy::All => true,
        }
    }
}

impl std::str::FromStr for LogPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(LogPolicy::None),
            "failures" => Ok(LogPolicy::Failures),
            "all" => Ok(LogPolicy::All),
            other => Err(Error::InvalidConfig(format!(
                "unknown log policy `{other}`"
            ))),
        }
    }
}

/// Aggregate metrics over a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSummary {
    pub n_trials: usize,
    pub success_rate: f64,
    pub feas_rate: f64,
    pub deadlock_rate: f64,
    pub unsafe_rate: f64,
    pub timeout_rate: f64,
    /// Mean completion time over successful trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_time: Option<f64>,
    pub resamples: usize,
}

impl BatchSummary {
    pub fn from_results(results: &[TrialResult]) -> Self {
        let n = results.len();
        let rate = |pred: fn(&TrialResult) -> bool| {
            if n == 0 {
                0.0
            } else {
                results.iter().filter(|r| pred(r)).count() as f64 / n as f64
            }
        };
        let times: Vec<f64> = results.iter().filter_map(|r| r.completion_time).collect();
        let avg_time = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
        Self {
            n_trials: n,
            success_rate: rate(|r| r.success),
            feas_rate: rate(|r| r.always_feasible),
            deadlock_rate: rate(|r| r.deadlock),
            unsafe_rate: rate(|r| r.unsafe_),
            timeout_rate: rate(|r| r.timeout),
            avg_time,
            resamples: results.iter().map(|r| r.resamples).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub summary: BatchSummary,
    /// Ordered by trial index.
    pub results: Vec<TrialResult>,
}

/// Runs `n_trials` trials on the current rayon pool, keeping no logs.
pub fn run_batch(config: &ScenarioConfig, n_trials: usize) -> Result<BatchOutcome> {
    run_batch_with(config, n_trials, LogPolicy::None, |_| Ok(()))
}

/// Runs `n_trials` trials in parallel. Completed trials are handed to
/// `on_result` one at a time, in completion order, on the calling thread.
pub fn run_batch_with<F>(
    config: &ScenarioConfig,
    n_trials: usize,
    policy: LogPolicy,
    mut on_result: F,
) -> Result<BatchOutcome>
where
    F: FnMut(&TrialResult) -> Result<()>,
{
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
    }
    config.validate()?;
    let record = policy != LogPolicy::None;
    let (tx, rx) = mpsc::channel::<Result<TrialResult>>();
    let mut results: Vec<TrialResult> = Vec::with_capacity(n_trials);
    let mut first_error = None;

    std::thread::scope(|scope| {
        scope.spawn(move || {
            (0..n_trials as u64)
                .into_par_iter()
                .for_each_with(tx, |tx, index| {
                    let outcome = run_trial(config, index, record).map(|mut r| {
                        if !policy.keep(&r) {
                            r.log = None;
                        }
                        r
                    });
                    // The receiver only goes away once every result has arrived.
                    let _ = tx.send(outcome);
                });
        });
        for outcome in rx {
            match outcome.and_then(|r| on_result(&r).map(|_| r)) {
                Ok(r) => results.push(r),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
    });

    if let Some(e) = first_error {
        return Err(e);
    }
    results.sort_by_key(|r| r.trial_index);
    Ok(BatchOutcome {
        summary: BatchSummary::from_results(&results),
        results,
    })
}
