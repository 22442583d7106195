use ffcbf::barriers::{pair_tau_hat, pair_tau_star_hat, state_gradient, BarrierKind, RffParams};
use ffcbf::dynamics::VehicleState;

use crate::oracle::{central_difference, clamped_horizon, ff_value, relative, rff_value};

const FD_STEP: f64 = 1e-6;

/// Reference value of a future-focused barrier for two raw states.
pub fn reference_value(kind: BarrierKind, zi: [f64; 5], zj: [f64; 5], p: &RffParams) -> f64 {
    let (xi, nu) = relative(zi, zj);
    let ff = &p.ff;
    match kind {
        BarrierKind::Zero => xi[0] * xi[0] + xi[1] * xi[1] - 4.0 * ff.radius * ff.radius,
        BarrierKind::Ff => ff_value(xi, nu, ff.tau_bar, ff.k, ff.epsilon, ff.radius),
        BarrierKind::Rff => rff_value(
            xi, nu, ff.tau_bar, ff.k, ff.epsilon, ff.radius, p.k0_scale, p.k0_floor,
        ),
    }
}

/// Largest error of the analytic state gradient against central finite
/// differences of [`reference_value`], relative to `max(|fd|, 1)`.
///
/// Returns `None` for rff samples whose horizon sits within `1e-6` of the
/// kink in the relaxation gain, where the barrier is not differentiable.
pub fn gradient_error(kind: BarrierKind, zi: [f64; 5], zj: [f64; 5], p: &RffParams) -> Option<f64> {
    if kind == BarrierKind::Rff {
        let (xi, nu) = relative(zi, zj);
        let t = clamped_horizon(xi, nu, p.ff.tau_bar, p.ff.k, p.ff.epsilon);
        if (t - 1.0 - p.k0_floor).abs() < 1e-6 {
            return None;
        }
    }
    let (gi, gj) = state_gradient(
        kind,
        &VehicleState::from_array(zi),
        &VehicleState::from_array(zj),
        p,
    )
    .ok()?;
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let fd_i = central_difference(|z| reference_value(kind, z, zj, p), zi, k, FD_STEP);
        let fd_j = central_difference(|z| reference_value(kind, zi, z, p), zj, k, FD_STEP);
        worst = worst.max((gi[k] - fd_i).abs() / fd_i.abs().max(1.0));
        worst = worst.max((gj[k] - fd_j).abs() / fd_j.abs().max(1.0));
    }
    Some(worst)
}

/// Outcome of the horizon checks on one state pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonCheck {
    pub tau_hat: f64,
    pub tau_star_hat: f64,
    pub h_ff: f64,
    pub h0: f64,
}

impl HorizonCheck {
    pub fn new(zi: [f64; 5], zj: [f64; 5], p: &RffParams) -> Self {
        let (si, sj) = (VehicleState::from_array(zi), VehicleState::from_array(zj));
        Self {
            tau_hat: pair_tau_hat(&si, &sj, &p.ff),
            tau_star_hat: pair_tau_star_hat(&si, &sj, &p.ff),
            h_ff: reference_value(BarrierKind::Ff, zi, zj, p),
            h0: reference_value(BarrierKind::Zero, zi, zj, p),
        }
    }

    /// `h_ff ≤ h0` whenever `τ̂ ≤ 2 τ̂*`; vacuously true otherwise.
    pub fn dominance_holds(&self) -> bool {
        self.tau_hat > 2.0 * self.tau_star_hat
            || self.h_ff <= self.h0 + 1e-9 * self.h0.abs().max(1.0)
    }

    pub fn tau_in_range(&self, tau_bar: f64) -> bool {
        (-1e-3..=tau_bar + 1e-3).contains(&self.tau_hat)
    }
}
