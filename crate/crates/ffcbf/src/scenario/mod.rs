//! Four-way unsignaled intersection: geometry, reference routes, randomized
//! initial conditions, closed-loop trials and batch metrics.

mod batch;
mod trial;
mod world;

use serde::{Deserialize, Serialize};

use crate::controllers::ControllerConfig;
use crate::dynamics::VehicleParams;
use crate::error::{Error, Result};

pub use batch::{run_batch, run_batch_with, BatchOutcome, BatchSummary, LogPolicy};
pub use trial::{
    detect_deadlock, run_trial, run_trial_from, DeadlockMonitor, LogRow, SpeedSample,
    TrajectoryLog, TrialResult,
};
pub use world::{
    build_world, clear_over_horizon, initial_states_for, randomize_initial, trial_rng, Approach,
    InitialDraw, Lane, Route, World,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    AllStraight,
    OneLeftTurn,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::AllStraight => "all_straight",
            ScenarioKind::OneLeftTurn => "one_left_turn",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_straight" | "straight" => Ok(ScenarioKind::AllStraight),
            "one_left_turn" | "left-turn" | "left_turn" => Ok(ScenarioKind::OneLeftTurn),
            other => Err(Error::InvalidConfig(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Everything needed to reproduce a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub num_vehicles: usize,
    /// Centre of the initial distance to the intersection box (m).
    pub d0: f64,
    /// Half-width of the initial distance draw (m).
    pub delta_d: f64,
    /// Centre of the initial speed draw (m/s).
    pub s0: f64,
    /// Half-width of the initial speed draw (m/s).
    pub delta_s: f64,
    /// Cruise speed of every reference trajectory (m/s).
    pub reference_speed: f64,
    /// Let each reference cruise at its vehicle's initial speed instead.
    pub reference_from_initial: bool,
    pub dt: f64,
    /// Trial cap (s).
    pub t_max: f64,
    pub seed: u64,
    /// Width of one lane (m). The intersection box is two lanes wide.
    pub lane_width: f64,
    /// Speed below which a vehicle counts as stopped (m/s).
    pub stop_threshold: f64,
    /// How long every remaining vehicle must be stopped to call a deadlock (s).
    pub deadlock_window: f64,
    /// Lateral band around the exit lane centreline (m).
    pub exit_tolerance: f64,
    /// Draws allowed before an initial condition passes the screen.
    pub max_resamples: usize,
    pub vehicle: VehicleParams,
    pub controller: ControllerConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::AllStraight,
            num_vehicles: 4,
            d0: 12.0,
            delta_d: 5.0,
            s0: 6.0,
            delta_s: 3.0,
            reference_speed: 6.0,
            reference_from_initial: false,
            dt: 0.01,
            t_max: 30.0,
            seed: 0,
            lane_width: 5.0,
            stop_threshold: 0.01,
            deadlock_window: 3.0,
            exit_tolerance: 0.5,
            max_resamples: 100,
            vehicle: VehicleParams::default(),
            controller: ControllerConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(1..=4).contains(&self.num_vehicles) {
            return bad(format!(
                "num_vehicles must be between 1 and 4, got {}",
                self.num_vehicles
            ));
        }
        if !(self.delta_d >= 0.0 && self.d0 > self.delta_d) {
            return bad(format!(
                "need d0 > delta_d >= 0 (d0={}, delta_d={})",
                self.d0, self.delta_d
            ));
        }
        if !(self.delta_s >= 0.0 && self.s0 > self.delta_s) {
            return bad(format!(
                "need s0 > delta_s >= 0 (s0={}, delta_s={})",
                self.s0, self.delta_s
            ));
        }
        if self.s0 + self.delta_s > self.controller.v_max {
            return bad("initial speeds may exceed the speed limit".into());
        }
        for (name, v) in [
            ("dt", self.dt),
            ("t_max", self.t_max),
            ("lane_width", self.lane_width),
            ("stop_threshold", self.stop_threshold),
            ("deadlock_window", self.deadlock_window),
            ("exit_tolerance", self.exit_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let v = self.reference_speed;
        if !(v > 0.0 && v <= self.controller.v_max) {
            return bad(format!("reference_speed must lie in (0, v_max], got {v}"));
        }
        if self.max_resamples == 0 {
            return bad("max_resamples must be at least 1".into());
        }
        self.vehicle.validate()?;
        self.controller.validate()?;
        if self.controller.barrier.ff.radius != self.vehicle.radius {
            return bad(format!(
                "barrier radius {} differs from vehicle radius {}",
                self.controller.barrier.ff.radius, self.vehicle.radius
            ));
        }
        Ok(())
    }

    /// Half side of the square intersection box (m).
    pub fn box_half_width(&self) -> f64 {
        self.lane_width
    }
}
