//! Nominal tracking control and CBF-QP safety filters.
//!
//! The nominal law treats each vehicle as a planar double integrator, computes
//! a desired planar acceleration `μ = −K ζ̃` from the LQR gain, and maps it to
//! bicycle inputs through the inverse of the input coupling matrix `S`. The
//! slip rate is then saturated and the accelerations are filtered by a QP that
//! stays as close as possible to the nominal accelerations while satisfying
//! every barrier row.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{SMatrix, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::barriers::{
    constraint_row, h_speed, BarrierEval, BarrierKind, HocbfGains, RffParams, RowParams,
};
use crate::dynamics::{planar_kinematics, yaw_rate, ControlInput, VehicleParams, VehicleState};
use crate::error::{Error, Result};
use crate::qp::{solve_warm, QpProblem, QpStatus, WarmStart};

pub type LqrGain = SMatrix<f64, 2, 4>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Centralized,
    Decentralized,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Centralized => "centralized",
            Mode::Decentralized => "decentralized",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized" => Ok(Mode::Centralized),
            "decentralized" => Ok(Mode::Decentralized),
            other => Err(Error::InvalidConfig(format!(
                "unknown controller mode `{other}`"
            ))),
        }
    }
}

/// Desired `[x*, y*, ẋ*, ẏ*]` at the current time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalTarget {
    pub q_star: Vector4<f64>,
}

impl NominalTarget {
    pub fn new(position: Vector2<f64>, velocity: Vector2<f64>) -> Self {
        Self {
            q_star: Vector4::new(position.x, position.y, velocity.x, velocity.y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqrWeights {
    pub q_pos: f64,
    pub q_vel: f64,
    pub r: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q_pos: 1.0,
            q_vel: 2.0,
            r: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub cbf_kind: BarrierKind,
    pub mode: Mode,
    /// Slope of the linear class-K function used in every row.
    pub alpha_gain: f64,
    /// Gains of the second-order row used by the zero barrier.
    pub hocbf: HocbfGains,
    /// Added to the safety radius inside the pairwise rows (m).
    pub safety_margin: f64,
    pub omega_bar: f64,
    pub a_bar: f64,
    pub v_max: f64,
    pub lqr: LqrWeights,
    /// Below this speed the coupling matrix is treated as singular.
    pub v_eps: f64,
    /// Subtracted from each pair row in decentralized mode.
    pub decentral_eps: f64,
    pub barrier: RffParams,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            cbf_kind: BarrierKind::Rff,
            mode: Mode::Centralized,
            alpha_gain: 10.0,
            hocbf: HocbfGains::default(),
            safety_margin: 0.02,
            omega_bar: FRAC_PI_2,
            a_bar: 9.81,
            v_max: 10.0,
            lqr: LqrWeights::default(),
            v_eps: 1e-3,
            decentral_eps: 1e-9,
            barrier: RffParams::default(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_gain", self.alpha_gain),
            ("hocbf.k1", self.hocbf.k1),
            ("hocbf.k2", self.hocbf.k2),
            ("omega_bar", self.omega_bar),
            ("a_bar", self.a_bar),
            ("v_max", self.v_max),
            ("lqr.q_pos", self.lqr.q_pos),
            ("lqr.q_vel", self.lqr.q_vel),
            ("lqr.r", self.lqr.r),
            ("v_eps", self.v_eps),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "controller.{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.safety_margin >= 0.0 && self.safety_margin.is_finite()) {
            return Err(Error::InvalidConfig(
                "controller.safety_margin must be non-negative".into(),
            ));
        }
        if self.decentral_eps.is_nan() || self.decentral_eps < 0.0 {
            return Err(Error::InvalidConfig(
                "controller.decentral_eps must be non-negative".into(),
            ));
        }
        self.barrier.validate()
    }

    pub fn gain(&self) -> LqrGain {
        lqr_gain(self.lqr.q_pos, self.lqr.q_vel, self.lqr.r)
    }

    /// Row settings with the safety margin applied to the barrier radius.
    pub fn row_params(&self, vehicle: &VehicleParams) -> RowParams {
        let mut rff = self.barrier;
        rff.ff.radius += self.safety_margin;
        RowParams {
            kind: self.cbf_kind,
            alpha_gain: self.alpha_gain,
            hocbf: self.hocbf,
            rff,
            vehicle: *vehicle,
        }
    }
}

/// Infinite-horizon LQR gain for the planar double integrator `[ẍ, ÿ] = μ`
/// with state `[x, y, ẋ, ẏ]`, cost weights `diag(q_pos, q_pos, q_vel, q_vel)`
/// and input weight `r·I`.
///
/// Each axis decouples into `p̈ = μ`, whose Riccati equation has the closed
/// form solution `K = [√(q_pos/r), √(q_vel/r + 2√(q_pos/r))]`.
pub fn lqr_gain(q_pos: f64, q_vel: f64, r: f64) -> LqrGain {
    let kp = (q_pos / r).sqrt();
    let kd = (q_vel / r + 2.0 * kp).sqrt();
    LqrGain::new(kp, 0.0, kd, 0.0, 0.0, kp, 0.0, kd)
}

/// Desired planar acceleration `μ = −K (ζ − q*)`.
pub fn tracking_acceleration(
    state: &VehicleState,
    target: &NominalTarget,
    gain: &LqrGain,
) -> Vector2<f64> {
    let vel = crate::dynamics::planar_velocity(state);
    let zeta = Vector4::new(state.x, state.y, vel.x, vel.y);
    -(gain * (zeta - target.q_star))
}

/// Maps a desired planar acceleration to `[ω, a]` through `S⁻¹`, or through
/// the singular-speed rule `ω = 0, a = ‖μ‖` when `|v| < v_eps`.
pub fn map_planar_acceleration(
    state: &VehicleState,
    mu: Vector2<f64>,
    v_eps: f64,
    vehicle: &VehicleParams,
) -> Result<ControlInput> {
    if state.v.abs() < v_eps {
        return Ok(ControlInput::new(0.0, mu.norm()));
    }
    let pk = planar_kinematics(state, vehicle)?;
    let psi_dot = yaw_rate(state, vehicle);
    let rhs = Vector2::new(
        mu.x + pk.velocity.y * psi_dot,
        mu.y - pk.velocity.x * psi_dot,
    );
    let inv = pk
        .coupling
        .try_inverse()
        .ok_or(Error::NonFinite("inverse of the input coupling matrix"))?;
    let u = inv * rhs;
    Ok(ControlInput::new(u.x, u.y))
}

pub fn nominal_control(
    state: &VehicleState,
    target: &NominalTarget,
    gain: &LqrGain,
    v_eps: f64,
    vehicle: &VehicleParams,
) -> Result<ControlInput> {
    map_planar_acceleration(
        state,
        tracking_acceleration(state, target, gain),
        v_eps,
        vehicle,
    )
}

pub fn saturate_omega(omega0: f64, omega_bar: f64) -> f64 {
    omega0.max(-omega_bar).min(omega_bar)
}

/// One pairwise row as it entered the QP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    pub i: usize,
    pub j: usize,
    pub eval: BarrierEval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub inputs: Vec<ControlInput>,
    pub nominal: Vec<ControlInput>,
    pub feasible: bool,
    pub status: QpStatus,
    pub pairs: Vec<PairRow>,
}

/// Most negative acceleration the speed row allows, capped at `a_bar`.
fn braking_limit(state: &VehicleState, config: &ControllerConfig) -> f64 {
    let row = h_speed(state, config.v_max, config.alpha_gain);
    if row.gamma > 0.0 {
        (-row.phi / row.gamma).max(-config.a_bar).min(0.0)
    } else {
        -config.a_bar
    }
}

/// Centralized filter: one QP over every vehicle's acceleration.
pub fn centralized_step(
    states: &[VehicleState],
    targets: &[NominalTarget],
    config: &ControllerConfig,
    vehicle: &VehicleParams,
    warm: &mut WarmStart,
) -> Result<StepOutput> {
    if states.is_empty() || states.len() != targets.len() {
        return Err(Error::InvalidConfig(
            "need one target per vehicle and at least one vehicle".into(),
        ));
    }
    let n = states.len();
    let gain = config.gain();
    let nominal = states
        .iter()
        .zip(targets)
        .map(|(z, t)| nominal_control(z, t, &gain, config.v_eps, vehicle))
        .collect::<Result<Vec<_>>>()?;
    let omega: Vec<f64> = nominal
        .iter()
        .map(|u| saturate_omega(u.omega, config.omega_bar))
        .collect();

    let mut qp =
        QpProblem::new(nominal.iter().map(|u| u.a).collect()).with_box(-config.a_bar, config.a_bar);
    for (i, z) in states.iter().enumerate() {
        let row = h_speed(z, config.v_max, config.alpha_gain);
        let mut c = vec![0.0; n];
        c[i] = row.gamma;
        qp.push_row(c, -row.phi);
    }
    let params = config.row_params(vehicle);
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let eval = constraint_row(&params, &states[i], &states[j], omega[i], omega[j])?;
            let mut c = vec![0.0; n];
            c[i] = eval.gamma_i;
            c[j] = eval.gamma_j;
            qp.push_row(c, -eval.phi);
            pairs.push(PairRow { i, j, eval });
        }
    }

    let sol = solve_warm(&qp, warm)?;
    let feasible = sol.is_optimal();
    let accel: Vec<f64> = if feasible {
        warm.active = sol.active_set.clone();
        sol.u
            .iter()
            .map(|a| a.clamp(-config.a_bar, config.a_bar))
            .collect()
    } else {
        warm.active.clear();
        states.iter().map(|z| braking_limit(z, config)).collect()
    };
    Ok(StepOutput {
        inputs: omega
            .iter()
            .zip(&accel)
            .map(|(w, a)| ControlInput::new(*w, *a))
            .collect(),
        nominal,
        feasible,
        status: sol.status,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoOutput {
    pub input: ControlInput,
    pub nominal: ControlInput,
    pub feasible: bool,
    pub status: QpStatus,
    /// Rows against every other vehicle, with `i` the ego.
    pub pairs: Vec<PairRow>,
}

/// Decentralized filter for vehicle `ego`.
///
/// The ego sees every vehicle's state but not their inputs; other vehicles are
/// assumed to hold zero slip rate and their acceleration terms are dropped.
pub fn decentralized_step(
    ego: usize,
    states: &[VehicleState],
    target: &NominalTarget,
    config: &ControllerConfig,
    vehicle: &VehicleParams,
    warm: &mut WarmStart,
) -> Result<EgoOutput> {
    let me = states
        .get(ego)
        .ok_or_else(|| Error::InvalidConfig(format!("ego index {ego} out of range")))?;
    let nominal = nominal_control(me, target, &config.gain(), config.v_eps, vehicle)?;
    let omega = saturate_omega(nominal.omega, config.omega_bar);

    let mut qp = QpProblem::new(vec![nominal.a]).with_box(-config.a_bar, config.a_bar);
    let speed = h_speed(me, config.v_max, config.alpha_gain);
    qp.push_row(vec![speed.gamma], -speed.phi);
    let params = config.row_params(vehicle);
    let mut pairs = Vec::with_capacity(states.len().saturating_sub(1));
    for (j, other) in states.iter().enumerate() {
        if j == ego {
            continue;
        }
        let eval = constraint_row(&params, me, other, omega, 0.0)?;
        qp.push_row(vec![eval.gamma_i], config.decentral_eps - eval.phi);
        pairs.push(PairRow { i: ego, j, eval });
    }

    let sol = solve_warm(&qp, warm)?;
    let feasible = sol.is_optimal();
    let a = if feasible {
        warm.active = sol.active_set.clone();
        sol.u[0].clamp(-config.a_bar, config.a_bar)
    } else {
        warm.active.clear();
        braking_limit(me, config)
    };
    Ok(EgoOutput {
        input: ControlInput::new(omega, a),
        nominal,
        feasible,
        status: sol.status,
        pairs,
    })
}
