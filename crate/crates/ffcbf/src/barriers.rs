//! Barrier functions for inter-vehicle collision avoidance and the speed limit.
//!
//! Three pairwise barriers are provided:
//!
//! * the physical distance barrier `h0 = ‖ξ‖² − (2R)²`,
//! * the future-focused barrier `h_ff = ‖ξ + ν τ̂‖² − (2R)²`, which measures
//!   the minimum separation predicted under a zero-acceleration policy over a
//!   horizon `τ̄`,
//! * the relaxed barrier `H = h_ff + k0 · h0` with
//!   `k0 = c · max(τ̂ − 1, floor)`.
//!
//! Here `ξ` and `ν` are the differential position and velocity of vehicle `i`
//! relative to vehicle `j`, and `τ̂` is a smooth clamp of the regularized
//! time-to-closest-approach `τ̂* = −ξ·ν / (‖ν‖² + ε)` into `[0, τ̄]`.
//!
//! Every barrier is expressed through its partial derivatives with respect to
//! `ξ` and `ν`. Along trajectories `ξ̇ = ν` and `ν̇ = α` (the differential
//! acceleration), so the time derivative is `∂h/∂ξ · ν + ∂h/∂ν · α`, and `α`
//! is affine in both vehicles' inputs. [`constraint_row`] splits that
//! derivative into the part fixed before the QP (φ) and the coefficients of the
//! two accelerations (γ).

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    planar_kinematics, planar_velocity, ControlInput, VehicleParams, VehicleState,
};
use crate::error::{Error, Result};

/// Which pairwise barrier a controller enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierKind {
    /// Physical distance barrier, enforced as a second-order condition.
    Zero,
    /// Future-focused barrier.
    Ff,
    /// Relaxed future-focused barrier.
    Rff,
}

impl BarrierKind {
    pub const ALL: [BarrierKind; 3] = [BarrierKind::Zero, BarrierKind::Ff, BarrierKind::Rff];

    pub fn as_str(self) -> &'static str {
        match self {
            BarrierKind::Zero => "zero",
            BarrierKind::Ff => "ff",
            BarrierKind::Rff => "rff",
        }
    }
}

impl std::fmt::Display for BarrierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BarrierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "0" => Ok(BarrierKind::Zero),
            "ff" => Ok(BarrierKind::Ff),
            "rff" => Ok(BarrierKind::Rff),
            other => Err(Error::InvalidConfig(format!(
                "unknown barrier kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FfParams {
    /// Look-ahead horizon τ̄ (s).
    pub tau_bar: f64,
    /// Sharpness of the tanh switches.
    pub k: f64,
    /// Regularizer in the denominator of τ̂* (m²/s²).
    pub epsilon: f64,
    /// Safety radius R (m); vehicles must stay 2R apart.
    pub radius: f64,
}

impl Default for FfParams {
    fn default() -> Self {
        Self {
            tau_bar: 5.0,
            k: 1000.0,
            epsilon: 1e-9,
            radius: 1.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RffParams {
    pub ff: FfParams,
    /// Multiplier c in `k0 = c · max(τ̂ − 1, floor)`.
    pub k0_scale: f64,
    /// Floor inside the relaxation gain.
    pub k0_floor: f64,
}

impl Default for RffParams {
    fn default() -> Self {
        Self {
            ff: FfParams::default(),
            k0_scale: 0.1,
            k0_floor: 0.001,
        }
    }
}

impl RffParams {
    pub fn validate(&self) -> Result<()> {
        let ff = &self.ff;
        let ok = ff.tau_bar > 0.0
            && ff.k >= 1.0
            && ff.epsilon > 0.0
            && ff.radius > 0.0
            && self.k0_scale > 0.0
            && self.k0_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid barrier parameters {self:?}"
            )))
        }
    }

    /// Relaxation gain `k0` for a given clamped horizon.
    pub fn relaxation_gain(&self, tau_hat: f64) -> f64 {
        self.k0_scale * (tau_hat - 1.0).max(self.k0_floor)
    }
}

/// Differential kinematics of vehicle `i` relative to vehicle `j`.
///
/// The differential acceleration is
/// `α = alpha_drift + coupling_i · u_i − coupling_j · u_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeKinematics {
    pub xi: Vector2<f64>,
    pub nu: Vector2<f64>,
    pub alpha_drift: Vector2<f64>,
    pub coupling_i: Matrix2<f64>,
    pub coupling_j: Matrix2<f64>,
}

impl RelativeKinematics {
    pub fn acceleration(&self, u_i: ControlInput, u_j: ControlInput) -> Vector2<f64> {
        self.alpha_drift + self.coupling_i * u_i.as_vector() - self.coupling_j * u_j.as_vector()
    }
}

pub fn relative_kinematics(
    state_i: &VehicleState,
    state_j: &VehicleState,
    params: &VehicleParams,
) -> Result<RelativeKinematics> {
    let ki = planar_kinematics(state_i, params)?;
    let kj = planar_kinematics(state_j, params)?;
    Ok(RelativeKinematics {
        xi: state_i.position() - state_j.position(),
        nu: ki.velocity - kj.velocity,
        alpha_drift: ki.drift - kj.drift,
        coupling_i: ki.coupling,
        coupling_j: kj.coupling,
    })
}

/// Value of a barrier together with the QP row built from its time derivative.
///
/// For the future-focused barriers the row satisfies
/// `ḣ = phi − α_gain · value + gamma_i · a_i + gamma_j · a_j` whenever both
/// vehicles apply the slip rates folded into `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEval {
    pub value: f64,
    pub phi: f64,
    pub gamma_i: f64,
    pub gamma_j: f64,
    /// `phi` without the class-K term.
    pub drift: f64,
}

/// Speed-limit barrier `(v_max − v) v` and its row `phi + gamma · a ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedRow {
    pub value: f64,
    pub phi: f64,
    pub gamma: f64,
}

pub fn h_speed(state: &VehicleState, v_max: f64, alpha_gain: f64) -> SpeedRow {
    let value = (v_max - state.v) * state.v;
    SpeedRow {
        value,
        phi: alpha_gain * value,
        gamma: v_max - 2.0 * state.v,
    }
}

pub fn h0(state_i: &VehicleState, state_j: &VehicleState, radius: f64) -> f64 {
    let xi = state_i.position() - state_j.position();
    xi.norm_squared() - 4.0 * radius * radius
}

/// Regularized time of closest approach under constant velocities.
pub fn tau_star_hat(xi: &Vector2<f64>, nu: &Vector2<f64>, epsilon: f64) -> f64 {
    -xi.dot(nu) / (nu.norm_squared() + epsilon)
}

/// `K_δ(s) = ½ + ½ tanh(k (s − δ))`.
pub fn smooth_switch(s: f64, delta: f64, k: f64) -> f64 {
    0.5 + 0.5 * (k * (s - delta)).tanh()
}

/// `dK_δ/ds = (k/2) sech²(k (s − δ))`.
pub fn smooth_switch_slope(s: f64, delta: f64, k: f64) -> f64 {
    let t = (k * (s - delta)).tanh();
    0.5 * k * (1.0 - t * t)
}

/// Smooth clamp of `tau_star_hat` into approximately `[0, τ̄]`.
pub fn tau_hat(tau_star_hat: f64, tau_bar: f64, k: f64) -> f64 {
    tau_star_hat * smooth_switch(tau_star_hat, 0.0, k)
        + (tau_bar - tau_star_hat) * smooth_switch(tau_star_hat, tau_bar, k)
}

/// Derivative of [`tau_hat`] with respect to its first argument.
pub fn tau_hat_slope(tau_star_hat: f64, tau_bar: f64, k: f64) -> f64 {
    let s = tau_star_hat;
    smooth_switch(s, 0.0, k) + s * smooth_switch_slope(s, 0.0, k) - smooth_switch(s, tau_bar, k)
        + (tau_bar - s) * smooth_switch_slope(s, tau_bar, k)
}

/// Barrier value with partial derivatives in the differential coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierJet {
    pub value: f64,
    pub d_xi: Vector2<f64>,
    pub d_nu: Vector2<f64>,
    pub tau_hat: f64,
}

struct Horizon {
    tau_star_hat: f64,
    tau_hat: f64,
    d_xi: Vector2<f64>,
    d_nu: Vector2<f64>,
}

fn horizon(xi: &Vector2<f64>, nu: &Vector2<f64>, ff: &FfParams) -> Horizon {
    let den = nu.norm_squared() + ff.epsilon;
    let ts = -xi.dot(nu) / den;
    let slope = tau_hat_slope(ts, ff.tau_bar, ff.k);
    Horizon {
        tau_star_hat: ts,
        tau_hat: tau_hat(ts, ff.tau_bar, ff.k),
        d_xi: -nu * (slope / den),
        d_nu: -(xi + nu * (2.0 * ts)) * (slope / den),
    }
}

/// Future-focused barrier in differential coordinates.
pub fn ff_jet(xi: &Vector2<f64>, nu: &Vector2<f64>, ff: &FfParams) -> BarrierJet {
    ff_from_horizon(xi, nu, ff, &horizon(xi, nu, ff))
}

fn ff_from_horizon(
    xi: &Vector2<f64>,
    nu: &Vector2<f64>,
    ff: &FfParams,
    hz: &Horizon,
) -> BarrierJet {
    let w = xi + nu * hz.tau_hat;
    let wn = w.dot(nu);
    BarrierJet {
        value: w.norm_squared() - 4.0 * ff.radius * ff.radius,
        d_xi: 2.0 * w + hz.d_xi * (2.0 * wn),
        d_nu: w * (2.0 * hz.tau_hat) + hz.d_nu * (2.0 * wn),
        tau_hat: hz.tau_hat,
    }
}

/// Relaxed barrier in differential coordinates.
///
/// `k0` is not differentiable where `τ̂ − 1` equals the floor; there the floor
/// branch is used.
pub fn rff_jet(xi: &Vector2<f64>, nu: &Vector2<f64>, rff: &RffParams) -> BarrierJet {
    let hz = horizon(xi, nu, &rff.ff);
    let ff = ff_from_horizon(xi, nu, &rff.ff, &hz);
    let h0 = xi.norm_squared() - 4.0 * rff.ff.radius * rff.ff.radius;
    let k0 = rff.relaxation_gain(hz.tau_hat);
    let gain_branch = hz.tau_hat - 1.0 > rff.k0_floor;
    let (dk_xi, dk_nu) = if gain_branch {
        (hz.d_xi * rff.k0_scale, hz.d_nu * rff.k0_scale)
    } else {
        (Vector2::zeros(), Vector2::zeros())
    };
    BarrierJet {
        value: ff.value + k0 * h0,
        d_xi: ff.d_xi + xi * (2.0 * k0) + dk_xi * h0,
        d_nu: ff.d_nu + dk_nu * h0,
        tau_hat: ff.tau_hat,
    }
}

fn differential(state_i: &VehicleState, state_j: &VehicleState) -> (Vector2<f64>, Vector2<f64>) {
    (
        state_i.position() - state_j.position(),
        planar_velocity(state_i) - planar_velocity(state_j),
    )
}

pub fn h_ff(state_i: &VehicleState, state_j: &VehicleState, ff: &FfParams) -> f64 {
    let (xi, nu) = differential(state_i, state_j);
    ff_jet(&xi, &nu, ff).value
}

pub fn h_rff(state_i: &VehicleState, state_j: &VehicleState, rff: &RffParams) -> f64 {
    let (xi, nu) = differential(state_i, state_j);
    rff_jet(&xi, &nu, rff).value
}

/// Clamped horizon τ̂ for a vehicle pair.
pub fn pair_tau_hat(state_i: &VehicleState, state_j: &VehicleState, ff: &FfParams) -> f64 {
    let (xi, nu) = differential(state_i, state_j);
    horizon(&xi, &nu, ff).tau_hat
}

/// Regularized closest-approach time τ̂* for a vehicle pair.
pub fn pair_tau_star_hat(state_i: &VehicleState, state_j: &VehicleState, ff: &FfParams) -> f64 {
    let (xi, nu) = differential(state_i, state_j);
    horizon(&xi, &nu, ff).tau_star_hat
}

/// Value of the barrier of the given kind. For [`BarrierKind::Zero`] this is
/// the physical `h0`.
pub fn barrier_value(
    kind: BarrierKind,
    state_i: &VehicleState,
    state_j: &VehicleState,
    rff: &RffParams,
) -> f64 {
    match kind {
        BarrierKind::Zero => h0(state_i, state_j, rff.ff.radius),
        BarrierKind::Ff => h_ff(state_i, state_j, &rff.ff),
        BarrierKind::Rff => h_rff(state_i, state_j, rff),
    }
}

/// Gradients of a future-focused barrier with respect to both full vehicle
/// states, ordered like [`VehicleState::to_array`].
pub fn state_gradient(
    kind: BarrierKind,
    state_i: &VehicleState,
    state_j: &VehicleState,
    rff: &RffParams,
) -> Result<([f64; 5], [f64; 5])> {
    let (xi, nu) = differential(state_i, state_j);
    let jet = match kind {
        BarrierKind::Zero => BarrierJet {
            value: xi.norm_squared() - 4.0 * rff.ff.radius * rff.ff.radius,
            d_xi: 2.0 * xi,
            d_nu: Vector2::zeros(),
            tau_hat: 0.0,
        },
        BarrierKind::Ff => ff_jet(&xi, &nu, &rff.ff),
        BarrierKind::Rff => rff_jet(&xi, &nu, rff),
    };
    let one = |z: &VehicleState, sign: f64| -> Result<[f64; 5]> {
        if z.beta.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::SlipAngleDomain { beta: z.beta });
        }
        let (s, c) = z.psi.sin_cos();
        let t = z.beta.tan();
        let sec2 = 1.0 + t * t;
        let d_psi = Vector2::new(-z.v * (s + c * t), z.v * (c - s * t));
        let d_beta = Vector2::new(-z.v * s * sec2, z.v * c * sec2);
        let d_v = Vector2::new(c - s * t, s + c * t);
        Ok([
            sign * jet.d_xi.x,
            sign * jet.d_xi.y,
            sign * jet.d_nu.dot(&d_psi),
            sign * jet.d_nu.dot(&d_beta),
            sign * jet.d_nu.dot(&d_v),
        ])
    };
    Ok((one(state_i, 1.0)?, one(state_j, -1.0)?))
}

/// Gains of the second-order condition used for [`BarrierKind::Zero`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HocbfGains {
    /// Gain in the auxiliary barrier `h1 = ḣ0 + k1 h0`.
    pub k1: f64,
    /// Gain in the enforced condition `ḣ1 + k2 h1 ≥ 0`.
    pub k2: f64,
}

impl Default for HocbfGains {
    fn default() -> Self {
        Self { k1: 2.0, k2: 4.0 }
    }
}

/// Everything needed to build a pairwise row besides the two states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowParams {
    pub kind: BarrierKind,
    /// Slope of the linear class-K function for the ff and rff rows.
    pub alpha_gain: f64,
    pub hocbf: HocbfGains,
    pub rff: RffParams,
    pub vehicle: VehicleParams,
}

/// Builds the pairwise QP row `phi + gamma_i a_i + gamma_j a_j ≥ 0`.
///
/// The slip rates `omega_i`, `omega_j` are fixed before the QP, so their
/// contribution to the differential acceleration is folded into `phi`.
///
/// For [`BarrierKind::Zero`] the distance barrier has relative degree two in
/// the accelerations. The row then enforces `ḣ1 + k2 h1 ≥ 0` with
/// `h1 = ḣ0 + k1 h0`, and the returned `value` is `h1`.
pub fn constraint_row(
    params: &RowParams,
    state_i: &VehicleState,
    state_j: &VehicleState,
    omega_i: f64,
    omega_j: f64,
) -> Result<BarrierEval> {
    let rff = &params.rff;
    let rel = relative_kinematics(state_i, state_j, &params.vehicle)?;
    let (value, velocity_part, accel_weight, gain) = match params.kind {
        BarrierKind::Zero => {
            let HocbfGains { k1, k2 } = params.hocbf;
            let h0 = rel.xi.norm_squared() - 4.0 * rff.ff.radius * rff.ff.radius;
            let h0_dot = 2.0 * rel.xi.dot(&rel.nu);
            (
                h0_dot + k1 * h0,
                2.0 * rel.nu.norm_squared() + k1 * h0_dot,
                2.0 * rel.xi,
                k2,
            )
        }
        kind @ (BarrierKind::Ff | BarrierKind::Rff) => {
            let jet = if kind == BarrierKind::Ff {
                ff_jet(&rel.xi, &rel.nu, &rff.ff)
            } else {
                rff_jet(&rel.xi, &rel.nu, rff)
            };
            (
                jet.value,
                jet.d_xi.dot(&rel.nu),
                jet.d_nu,
                params.alpha_gain,
            )
        }
    };
    let fixed_accel =
        rel.alpha_drift + rel.coupling_i.column(0) * omega_i - rel.coupling_j.column(0) * omega_j;
    let drift = velocity_part + accel_weight.dot(&fixed_accel);
    Ok(BarrierEval {
        value,
        phi: drift + gain * value,
        gamma_i: accel_weight.dot(&rel.coupling_i.column(1)),
        gamma_j: -accel_weight.dot(&rel.coupling_j.column(1)),
        drift,
    })
}
