use ffcbf::barriers::BarrierKind;
use ffcbf::controllers::{
    centralized_step, lqr_gain, saturate_omega, tracking_acceleration, ControllerConfig,
    LqrWeights, Mode, NominalTarget,
};
use ffcbf::dynamics::{VehicleParams, VehicleState};
use ffcbf::qp::WarmStart;
use ffcbf_testkit::{head_on, riccati_gain};
use nalgebra::Vector2;
use proptest::prelude::*;

#[test]
fn unit_weight_gain_matches_riccati_oracle() {
    let k = lqr_gain(1.0, 1.0, 1.0);
    let [kp, kd] = riccati_gain(1.0, 1.0, 1.0);
    assert!((k[(0, 0)] - kp).abs() < 1e-9 && (k[(1, 1)] - kp).abs() < 1e-9);
    assert!((k[(0, 2)] - kd).abs() < 1e-9 && (k[(1, 3)] - kd).abs() < 1e-9);
    assert!((kd - 3f64.sqrt()).abs() < 1e-9);
    assert_eq!(k[(0, 1)], 0.0);
    assert_eq!(k[(1, 0)], 0.0);
}

#[test]
fn default_weights_match_riccati_oracle() {
    let w = LqrWeights::default();
    let k = lqr_gain(w.q_pos, w.q_vel, w.r);
    let [kp, kd] = riccati_gain(w.q_pos, w.q_vel, w.r);
    assert!((k[(0, 0)] - kp).abs() < 1e-9 && (k[(0, 2)] - kd).abs() < 1e-9);
}

proptest! {
    #[test]
    fn gain_matches_riccati_for_any_weights(q_pos in 0.1..10.0f64, q_vel in 0.1..10.0f64, r in 0.1..10.0f64) {
        let k = lqr_gain(q_pos, q_vel, r);
        let [kp, kd] = riccati_gain(q_pos, q_vel, r);
        prop_assert!((k[(0, 0)] - kp).abs() < 1e-7 && (k[(0, 2)] - kd).abs() < 1e-7);
    }

    #[test]
    fn saturation_stays_in_band(w in -10.0..10.0f64) {
        let s = saturate_omega(w, 1.0);
        prop_assert!(s.abs() <= 1.0);
        if w.abs() <= 1.0 { prop_assert_eq!(s, w); }
    }
}

#[test]
fn on_reference_the_tracking_acceleration_vanishes() {
    let z = VehicleState::new(3.0, 1.0, 0.0, 0.0, 6.0);
    let target = NominalTarget::new(Vector2::new(3.0, 1.0), Vector2::new(6.0, 0.0));
    let mu = tracking_acceleration(&z, &target, &lqr_gain(1.0, 2.0, 1.0));
    assert!(mu.norm() < 1e-12);
}

#[test]
fn centralized_rows_hold_at_the_returned_inputs() {
    let vehicle = VehicleParams::default();
    let states = [
        VehicleState::new(-12.0, -1.25, 0.0, 0.0, 6.0),
        VehicleState::new(1.25, -12.0, std::f64::consts::FRAC_PI_2, 0.0, 6.0),
    ];
    let targets = [
        NominalTarget::new(Vector2::new(-11.0, -1.25), Vector2::new(6.0, 0.0)),
        NominalTarget::new(Vector2::new(1.25, -11.0), Vector2::new(0.0, 6.0)),
    ];
    for kind in BarrierKind::ALL {
        let config = ControllerConfig {
            cbf_kind: kind,
            ..ControllerConfig::default()
        };
        let out = centralized_step(
            &states,
            &targets,
            &config,
            &vehicle,
            &mut WarmStart::default(),
        )
        .unwrap();
        assert!(out.feasible);
        for row in &out.pairs {
            let lhs = row.eval.phi
                + row.eval.gamma_i * out.inputs[row.i].a
                + row.eval.gamma_j * out.inputs[row.j].a;
            assert!(lhs >= -1e-8, "{kind:?}: {lhs}");
        }
        for u in &out.inputs {
            assert!(u.a.abs() <= config.a_bar + 1e-12);
            assert!(u.omega.abs() <= config.omega_bar + 1e-12);
        }
    }
}

#[test]
fn mode_parses_and_prints() {
    assert_eq!(
        "decentralized".parse::<Mode>().unwrap(),
        Mode::Decentralized
    );
    assert_eq!(Mode::Centralized.to_string(), "centralized");
    assert!("sideways".parse::<Mode>().is_err());
}

#[test]
fn invalid_controller_config_is_rejected() {
    let bad = ControllerConfig {
        a_bar: -1.0,
        ..ControllerConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = ControllerConfig {
        safety_margin: f64::NAN,
        ..ControllerConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn decentralized_head_on_stops_short_of_contact() {
    let r = head_on(30.0, 0.0, 5.0, 20.0).unwrap();
    assert!(r.all_feasible);
    assert!(r.min_distance >= 2.5 - 1e-3, "{r:?}");
    assert!(r.max_summed_violation <= 1e-6, "{r:?}");
    assert!(r.final_speeds.iter().all(|v| *v < 0.5), "{r:?}");
}

#[test]
fn decentralized_offset_pass_has_negligible_drift() {
    let r = head_on(30.0, 1.5, 5.0, 20.0).unwrap();
    assert!(r.steps_in_horizon > 100);
    assert!(r.max_drift_in_horizon <= 1e-6, "{r:?}");
    assert!(r.min_distance >= 2.5 - 1e-3);
}
