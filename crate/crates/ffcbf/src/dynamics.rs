//! Kinematic bicycle model with slip-angle-rate and rear-wheel acceleration
//! inputs.
//!
//! The state is `z = [x, y, ψ, β, v]` and the input is `u = [ω, a]`:
//!
//! ```text
//! ẋ = v (cos ψ − sin ψ tan β)
//! ẏ = v (sin ψ + cos ψ tan β)
//! ψ̇ = v tan β / l_r
//! β̇ = ω
//! v̇ = a
//! ```

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub beta: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, psi: f64, beta: f64, v: f64) -> Self {
        Self { x, y, psi, beta, v }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.x, self.y, self.psi, self.beta, self.v]
    }

    pub fn from_array(z: [f64; 5]) -> Self {
        Self::new(z[0], z[1], z[2], z[3], z[4])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    fn check_slip(&self) -> Result<()> {
        if self.beta.abs() < FRAC_PI_2 {
            Ok(())
        } else {
            Err(Error::SlipAngleDomain { beta: self.beta })
        }
    }
}

/// Geometry of one vehicle. Vehicles are discs of radius `radius` centred at
/// the centre of gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Centre of gravity to rear axle (m).
    pub lr: f64,
    /// Centre of gravity to front axle (m). Only enters through the
    /// steering relation `tan β = lr / (lr + lf) · tan δ`.
    pub lf: f64,
    /// Safety radius (m).
    pub radius: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            lr: 1.0,
            lf: 1.0,
            radius: 1.25,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lf > 0.0 && self.radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "vehicle lengths must be positive (lr={}, lf={}, radius={})",
                self.lr, self.lf, self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Slip-angle rate (rad/s).
    pub omega: f64,
    /// Rear-wheel acceleration (m/s²).
    pub a: f64,
}

impl ControlInput {
    pub fn new(omega: f64, a: f64) -> Self {
        Self { omega, a }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.omega, self.a)
    }
}

/// Planar velocity and the affine map from `[ω, a]` to planar acceleration:
/// `[ẍ, ÿ] = drift + coupling · [ω, a]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarKinematics {
    pub velocity: Vector2<f64>,
    pub drift: Vector2<f64>,
    /// Column 0 multiplies ω, column 1 multiplies a.
    pub coupling: Matrix2<f64>,
}

impl PlanarKinematics {
    pub fn acceleration(&self, input: ControlInput) -> Vector2<f64> {
        self.drift + self.coupling * input.as_vector()
    }
}

pub fn yaw_rate(state: &VehicleState, params: &VehicleParams) -> f64 {
    state.v * state.beta.tan() / params.lr
}

/// Right-hand side of the bicycle model, ordered `[ẋ, ẏ, ψ̇, β̇, v̇]`.
pub fn bicycle_derivative(
    state: &VehicleState,
    input: ControlInput,
    params: &VehicleParams,
) -> Result<[f64; 5]> {
    state.check_slip()?;
    let (s, c) = state.psi.sin_cos();
    let t = state.beta.tan();
    Ok([
        state.v * (c - s * t),
        state.v * (s + c * t),
        state.v * t / params.lr,
        input.omega,
        input.a,
    ])
}

/// One classical RK4 step with the input held constant over `dt`.
pub fn step(
    state: &VehicleState,
    input: ControlInput,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let z = state.to_array();
    let at = |dz: &[f64; 5], h: f64| {
        let mut out = z;
        for (o, d) in out.iter_mut().zip(dz) {
            *o += h * d;
        }
        VehicleState::from_array(out)
    };
    let k1 = bicycle_derivative(state, input, params)?;
    let k2 = bicycle_derivative(&at(&k1, 0.5 * dt), input, params)?;
    let k3 = bicycle_derivative(&at(&k2, 0.5 * dt), input, params)?;
    let k4 = bicycle_derivative(&at(&k3, dt), input, params)?;
    let mut next = z;
    for i in 0..5 {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(VehicleState::from_array(next))
}

/// Planar velocity `(ẋ, ẏ)`. Independent of the axle lengths.
pub fn planar_velocity(state: &VehicleState) -> Vector2<f64> {
    let (s, c) = state.psi.sin_cos();
    let t = state.beta.tan();
    Vector2::new(state.v * (c - s * t), state.v * (s + c * t))
}

/// Constant-velocity forecast of the position `tau` seconds ahead.
pub fn predict_position(state: &VehicleState, tau: f64) -> Vector2<f64> {
    state.position() + planar_velocity(state) * tau
}

/// Differentiates the planar velocity once more in time.
///
/// With ψ̇ = v tan β / l_r the result is
///
/// ```text
/// ẍ = −ψ̇ ẏ + S₀₀ ω + S₀₁ a
/// ÿ =  ψ̇ ẋ + S₁₀ ω + S₁₁ a
/// ```
///
/// where `S` has determinant `−v sec² β` and so is singular exactly at `v = 0`.
pub fn planar_kinematics(state: &VehicleState, params: &VehicleParams) -> Result<PlanarKinematics> {
    state.check_slip()?;
    let (s, c) = state.psi.sin_cos();
    let t = state.beta.tan();
    let sec2 = 1.0 + t * t;
    let velocity = Vector2::new(state.v * (c - s * t), state.v * (s + c * t));
    let psi_dot = yaw_rate(state, params);
    let drift = Vector2::new(-psi_dot * velocity.y, psi_dot * velocity.x);
    let coupling = Matrix2::new(
        -state.v * s * sec2,
        c - s * t,
        state.v * c * sec2,
        s + c * t,
    );
    Ok(PlanarKinematics {
        velocity,
        drift,
        coupling,
    })
}
