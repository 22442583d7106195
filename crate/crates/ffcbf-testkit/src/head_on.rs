use nalgebra::Vector2;

use ffcbf::barriers::{constraint_row, pair_tau_star_hat, BarrierKind};
use ffcbf::controllers::{decentralized_step, ControllerConfig, Mode, NominalTarget};
use ffcbf::dynamics::{step, VehicleParams, VehicleState};
use ffcbf::qp::WarmStart;
use ffcbf::Result;

/// What the two-vehicle head-on run observed.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOnReport {
    pub steps: usize,
    pub min_distance: f64,
    /// Largest shortfall of `ḣ + α h_ij + α h_ji ≥ 0`, with `ḣ` evaluated from
    /// the applied inputs of both vehicles.
    pub max_summed_violation: f64,
    /// Largest `|L_f h|` over steps with `τ̂*` inside `[0, τ̄]`.
    pub max_drift_in_horizon: f64,
    pub steps_in_horizon: usize,
    pub all_feasible: bool,
    pub final_speeds: [f64; 2],
}

/// Two vehicles start `2 · half_gap` apart along x, driving at each other at
/// `speed` on lanes `y = ∓offset`, each tracking a reference along its own
/// lane. With `offset = 0` the references run straight through each other.
/// Both run the decentralized filter with the ff barrier.
pub fn head_on(half_gap: f64, offset: f64, speed: f64, duration: f64) -> Result<HeadOnReport> {
    let vehicle = VehicleParams::default();
    let config = ControllerConfig {
        cbf_kind: BarrierKind::Ff,
        mode: Mode::Decentralized,
        safety_margin: 0.0,
        ..ControllerConfig::default()
    };
    config.validate()?;
    let params = config.row_params(&vehicle);
    let dt = 0.01;

    let mut states = [
        VehicleState::new(-half_gap, -offset, 0.0, 0.0, speed),
        VehicleState::new(half_gap, offset, std::f64::consts::PI, 0.0, speed),
    ];
    let mut warm = [WarmStart::default(), WarmStart::default()];
    let mut report = HeadOnReport {
        steps: 0,
        min_distance: f64::INFINITY,
        max_summed_violation: 0.0,
        max_drift_in_horizon: 0.0,
        steps_in_horizon: 0,
        all_feasible: true,
        final_speeds: [speed; 2],
    };
    let n_steps = (duration / dt).round() as usize;
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let targets = [
            NominalTarget::new(
                Vector2::new(-half_gap + speed * t, -offset),
                Vector2::new(speed, 0.0),
            ),
            NominalTarget::new(
                Vector2::new(half_gap - speed * t, offset),
                Vector2::new(-speed, 0.0),
            ),
        ];
        let e0 = decentralized_step(0, &states, &targets[0], &config, &vehicle, &mut warm[0])?;
        let e1 = decentralized_step(1, &states, &targets[1], &config, &vehicle, &mut warm[1])?;
        report.all_feasible &= e0.feasible && e1.feasible;

        let joint = constraint_row(
            &params,
            &states[0],
            &states[1],
            e0.input.omega,
            e1.input.omega,
        )?;
        let h_dot = joint.drift + joint.gamma_i * e0.input.a + joint.gamma_j * e1.input.a;
        let alpha = config.alpha_gain;
        let summed = h_dot + alpha * e0.pairs[0].eval.value + alpha * e1.pairs[0].eval.value;
        report.max_summed_violation = report.max_summed_violation.max(-summed);

        let s = pair_tau_star_hat(&states[0], &states[1], &config.barrier.ff);
        if (0.0..=config.barrier.ff.tau_bar).contains(&s) {
            report.steps_in_horizon += 1;
            report.max_drift_in_horizon = report.max_drift_in_horizon.max(joint.drift.abs());
        }

        states = [
            step(&states[0], e0.input, &vehicle, dt)?,
            step(&states[1], e1.input, &vehicle, dt)?,
        ];
        let d = (states[0].position() - states[1].position()).norm();
        report.min_distance = report.min_distance.min(d);
        report.steps += 1;
    }
    report.final_speeds = [states[0].v, states[1].v];
    Ok(report)
}
