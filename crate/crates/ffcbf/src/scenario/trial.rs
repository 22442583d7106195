use rand::Rng;

use super::world::{
    build_world, clear_over_horizon, initial_states_for, randomize_initial, trial_rng, InitialDraw,
    Route,
};
use super::ScenarioConfig;
use crate::barriers::{barrier_value, h0};
use crate::controllers::{centralized_step, decentralized_step, Mode, NominalTarget};
use crate::dynamics::{step, ControlInput, VehicleState};
use crate::error::{Error, Result};
use crate::qp::WarmStart;

/// Speeds of every vehicle at one instant; exited vehicles are ignored by
/// the deadlock test.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSample {
    pub t: f64,
    pub speeds: Vec<f64>,
    pub exited: Vec<bool>,
}

/// Tracks how long every remaining vehicle has been stopped.
#[derive(Debug, Clone)]
pub struct DeadlockMonitor {
    threshold: f64,
    window: f64,
    stopped_since: Option<f64>,
}

impl DeadlockMonitor {
    pub fn new(threshold: f64, window: f64) -> Self {
        Self {
            threshold,
            window,
            stopped_since: None,
        }
    }

    /// Feeds one sample and reports whether the stop has lasted a full window.
    pub fn observe(&mut self, sample: &SpeedSample) -> bool {
        let mut remaining = sample
            .speeds
            .iter()
            .zip(&sample.exited)
            .filter(|(_, exited)| !**exited)
            .peekable();
        let all_stopped =
            remaining.peek().is_some() && remaining.all(|(v, _)| v.abs() < self.threshold);
        if !all_stopped {
            self.stopped_since = None;
            return false;
        }
        let since = *self.stopped_since.get_or_insert(sample.t);
        sample.t - since >= self.window - 1e-9
    }
}

/// True iff some contiguous stretch of `window` seconds has every
/// not-yet-exited vehicle below `threshold`.
pub fn detect_deadlock(history: &[SpeedSample], threshold: f64, window: f64) -> bool {
    let mut monitor = DeadlockMonitor::new(threshold, window);
    history.iter().any(|s| monitor.observe(s))
}

/// One logged instant. Pair series are ordered `(0,1), (0,2), …, (n−2,n−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub states: Vec<VehicleState>,
    pub inputs: Vec<ControlInput>,
    /// Barrier of the configured kind per pair (`h0` for the zero kind).
    pub barrier: Vec<f64>,
    pub h0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub num_vehicles: usize,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn num_pairs(&self) -> usize {
        self.num_vehicles * self.num_vehicles.saturating_sub(1) / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: u64,
    /// Rejected draws before one passed the initial screen.
    pub resamples: usize,
    pub draws: Vec<InitialDraw>,
    pub success: bool,
    pub always_feasible: bool,
    pub deadlock: bool,
    pub timeout: bool,
    pub unsafe_: bool,
    /// Time the last vehicle exited, when successful.
    pub completion_time: Option<f64>,
    /// Smallest pairwise `h0` seen; `+∞` without pairs.
    pub min_h0: f64,
    /// Smallest pairwise barrier of the configured kind at `t = 0`.
    pub initial_min_barrier: f64,
    pub steps: usize,
    pub infeasible_steps: usize,
    /// Infeasible steps while a turning vehicle was still in the intersection.
    pub infeasible_steps_turning: usize,
    /// Exit time per vehicle.
    pub exit_times: Vec<Option<f64>>,
    pub log: Option<TrajectoryLog>,
}

impl TrialResult {
    /// Short label used for logs and file names.
    pub fn outcome(&self) -> &'static str {
        if self.success {
            "success"
        } else if self.deadlock {
            "deadlock"
        } else if self.timeout {
            "timeout"
        } else {
            "failure"
        }
    }

    /// Trials worth keeping a full log for under the failures policy.
    pub fn is_failure(&self) -> bool {
        !self.success || self.unsafe_ || !self.always_feasible
    }
}

/// Draws initial conditions for `trial_index` and runs the trial.
pub fn run_trial(config: &ScenarioConfig, trial_index: u64, record: bool) -> Result<TrialResult> {
    config.validate()?;
    let mut rng = trial_rng(config.seed, trial_index);
    let (draws, resamples) = screened_draws(config, &mut rng)?;
    let mut result = run_trial_from(config, &draws, record)?;
    result.trial_index = trial_index;
    result.resamples = resamples;
    Ok(result)
}

fn screened_draws<R: Rng>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<(Vec<InitialDraw>, usize)> {
    for attempt in 0..config.max_resamples.max(1) {
        let draws = randomize_initial(config, rng);
        let states = initial_states_for(&build_world(config, &draws));
        if clear_over_horizon(
            &states,
            config.controller.barrier.ff.tau_bar,
            config.vehicle.radius,
        ) {
            return Ok((draws, attempt));
        }
    }
    Err(Error::ScreeningExhausted {
        attempts: config.max_resamples,
    })
}

/// Runs the closed loop from fixed initial draws.
pub fn run_trial_from(
    config: &ScenarioConfig,
    draws: &[InitialDraw],
    record: bool,
) -> Result<TrialResult> {
    config.validate()?;
    if draws.len() != config.num_vehicles {
        return Err(Error::InvalidConfig(format!(
            "expected {} initial draws, got {}",
            config.num_vehicles,
            draws.len()
        )));
    }
    let n = config.num_vehicles;
    let world = build_world(config, draws);
    let mut states = initial_states_for(&world);
    let ctrl = &config.controller;
    let half = world.box_half_width;
    let dt = config.dt;
    let max_steps = (config.t_max / dt).round() as usize;

    let mut exit_times: Vec<Option<f64>> = vec![None; n];
    let mut monitor = DeadlockMonitor::new(config.stop_threshold, config.deadlock_window);
    let mut log = record.then(|| TrajectoryLog {
        num_vehicles: n,
        rows: Vec::new(),
    });
    let mut warm_central = WarmStart::default();
    let mut warm_ego = vec![WarmStart::default(); n];

    let mut min_h0 = f64::INFINITY;
    let mut initial_min_barrier = f64::INFINITY;
    let mut infeasible_steps = 0;
    let mut infeasible_steps_turning = 0;
    let mut deadlock = false;
    let mut steps = 0;

    // Every vehicle stays under control until the last one exits; exiting
    // only records the time.
    for k in 0..=max_steps {
        let t = k as f64 * dt;
        for i in 0..n {
            for j in (i + 1)..n {
                min_h0 = min_h0.min(h0(&states[i], &states[j], config.vehicle.radius));
                if k == 0 {
                    initial_min_barrier = initial_min_barrier.min(barrier_value(
                        ctrl.cbf_kind,
                        &states[i],
                        &states[j],
                        &ctrl.barrier,
                    ));
                }
            }
        }
        let all_exited = exit_times.iter().all(Option::is_some);
        let sample = SpeedSample {
            t,
            speeds: states.iter().map(|z| z.v).collect(),
            exited: exit_times.iter().map(Option::is_some).collect(),
        };
        deadlock = !all_exited && monitor.observe(&sample);
        if all_exited || deadlock || k == max_steps {
            steps = k;
            if let Some(log) = log.as_mut() {
                log.rows.push(log_row(
                    t,
                    &states,
                    &vec![ControlInput::default(); n],
                    config,
                ));
            }
            break;
        }

        let targets: Vec<NominalTarget> = world.routes.iter().map(|r| r.target(t)).collect();
        let inputs: Vec<ControlInput>;
        let feasible = match ctrl.mode {
            Mode::Centralized => {
                let out =
                    centralized_step(&states, &targets, ctrl, &config.vehicle, &mut warm_central)?;
                inputs = out.inputs;
                out.feasible
            }
            Mode::Decentralized => {
                let mut all = true;
                let mut ego_inputs = Vec::with_capacity(n);
                for i in 0..n {
                    let out = decentralized_step(
                        i,
                        &states,
                        &targets[i],
                        ctrl,
                        &config.vehicle,
                        &mut warm_ego[i],
                    )?;
                    ego_inputs.push(out.input);
                    all &= out.feasible;
                }
                inputs = ego_inputs;
                all
            }
        };
        if !feasible {
            infeasible_steps += 1;
            let turning = (0..n).any(|i| {
                exit_times[i].is_none() && matches!(world.routes[i], Route::LeftTurn { .. })
            });
            if turning {
                infeasible_steps_turning += 1;
            }
        }
        if let Some(log) = log.as_mut() {
            log.rows.push(log_row(t, &states, &inputs, config));
        }

        for (z, u) in states.iter_mut().zip(&inputs) {
            *z = step(z, *u, &config.vehicle, dt)?;
            if !z.is_finite() {
                return Err(Error::NonFinite("vehicle state"));
            }
        }
        let t_next = (k + 1) as f64 * dt;
        for i in 0..n {
            if exit_times[i].is_none()
                && world.routes[i].has_exited(&states[i].position(), half, config.exit_tolerance)
            {
                exit_times[i] = Some(t_next);
            }
        }
    }

    let success = exit_times.iter().all(Option::is_some);
    let completion_time = if success {
        exit_times.iter().flatten().copied().reduce(f64::max)
    } else {
        None
    };
    Ok(TrialResult {
        trial_index: 0,
        resamples: 0,
        draws: draws.to_vec(),
        success,
        always_feasible: infeasible_steps == 0,
        deadlock,
        timeout: !success && !deadlock,
        unsafe_: min_h0 < 0.0,
        completion_time,
        min_h0,
        initial_min_barrier,
        steps,
        infeasible_steps,
        infeasible_steps_turning,
        exit_times,
        log,
    })
}

fn log_row(
    t: f64,
    states: &[VehicleState],
    inputs: &[ControlInput],
    config: &ScenarioConfig,
) -> LogRow {
    let ctrl = &config.controller;
    let n = states.len();
    let mut barrier = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut h0s = Vec::with_capacity(barrier.capacity());
    for i in 0..n {
        for j in (i + 1)..n {
            barrier.push(barrier_value(
                ctrl.cbf_kind,
                &states[i],
                &states[j],
                &ctrl.barrier,
            ));
            h0s.push(h0(&states[i], &states[j], config.vehicle.radius));
        }
    }
    LogRow {
        t,
        states: states.to_vec(),
        inputs: inputs.to_vec(),
        barrier,
        h0: h0s,
    }
}
