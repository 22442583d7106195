use ffcbf::barriers::{
    barrier_value, constraint_row, h0, relative_kinematics, tau_hat, BarrierKind, HocbfGains,
    RffParams, RowParams,
};
use ffcbf::dynamics::{VehicleParams, VehicleState};
use ffcbf_testkit::properties::{gradient_error, reference_value, HorizonCheck};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = [f64; 5]> {
    (
        -20.0..20.0f64,
        -20.0..20.0f64,
        -3.2..3.2f64,
        -0.5..0.5f64,
        0.0..10.0f64,
    )
        .prop_map(|(x, y, p, b, v)| [x, y, p, b, v])
}

fn params() -> RffParams {
    RffParams::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn values_match_reference(zi in state(), zj in state()) {
        let p = params();
        for kind in BarrierKind::ALL {
            let lib = barrier_value(kind, &VehicleState::from_array(zi), &VehicleState::from_array(zj), &p);
            let oracle = reference_value(kind, zi, zj, &p);
            prop_assert!((lib - oracle).abs() <= 1e-9 * oracle.abs().max(1.0), "{kind:?}: {lib} vs {oracle}");
        }
    }

    #[test]
    fn gradients_match_finite_differences(zi in state(), zj in state()) {
        for kind in BarrierKind::ALL {
            if let Some(err) = gradient_error(kind, zi, zj, &params()) {
                prop_assert!(err < 1e-4, "{kind:?}: relative error {err}");
            }
        }
    }

    #[test]
    fn predicted_barrier_never_exceeds_distance_barrier_inside_horizon(zi in state(), zj in state()) {
        let check = HorizonCheck::new(zi, zj, &params());
        prop_assert!(check.dominance_holds(), "{check:?}");
        prop_assert!(check.tau_in_range(params().ff.tau_bar), "{check:?}");
    }

    #[test]
    fn barriers_are_symmetric_in_the_pair(zi in state(), zj in state()) {
        let (si, sj) = (VehicleState::from_array(zi), VehicleState::from_array(zj));
        for kind in BarrierKind::ALL {
            let (a, b) = (barrier_value(kind, &si, &sj, &params()), barrier_value(kind, &sj, &si, &params()));
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn clamp_tracks_its_argument_inside_the_horizon(s in 0.05..4.95f64) {
        prop_assert!((tau_hat(s, 5.0, 1000.0) - s).abs() < 1e-12);
    }

    #[test]
    fn row_predicts_barrier_rate(zi in state(), zj in state(), wi in -1.0..1.0f64, wj in -1.0..1.0f64,
                                 ai in -5.0..5.0f64, aj in -5.0..5.0f64) {
        let vehicle = VehicleParams::default();
        let (si, sj) = (VehicleState::from_array(zi), VehicleState::from_array(zj));
        for kind in [BarrierKind::Ff, BarrierKind::Rff] {
            let rp = RowParams { kind, alpha_gain: 10.0, hocbf: HocbfGains::default(), rff: params(), vehicle };
            let row = constraint_row(&rp, &si, &sj, wi, wj).unwrap();
            let predicted = row.drift + row.gamma_i * ai + row.gamma_j * aj;
            // Chain rule through the reference value along the state flow.
            let flow = |z: [f64; 5], w: f64, a: f64| ffcbf_testkit::oracle::bicycle_rhs(z, w, a, vehicle.lr);
            let (di, dj) = (flow(zi, wi, ai), flow(zj, wj, aj));
            let h = 1e-6;
            let at = |s: f64| {
                let a: [f64; 5] = std::array::from_fn(|k| zi[k] + s * h * di[k]);
                let b: [f64; 5] = std::array::from_fn(|k| zj[k] + s * h * dj[k]);
                reference_value(kind, a, b, &params())
            };
            let fd = (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h);
            prop_assert!((predicted - fd).abs() <= 1e-4 * fd.abs().max(1.0), "{kind:?}: {predicted} vs {fd}");
        }
    }
}

#[test]
fn stationary_pair_reduces_to_distance_barrier() {
    let a = VehicleState::new(0.0, 0.0, 0.0, 0.0, 0.0);
    let b = VehicleState::new(4.0, 3.0, 1.0, 0.0, 0.0);
    let p = params();
    let expected = 25.0 - 4.0 * 1.25 * 1.25;
    assert!((h0(&a, &b, 1.25) - expected).abs() < 1e-12);
    assert!((barrier_value(BarrierKind::Ff, &a, &b, &p) - expected).abs() < 1e-9);
}

#[test]
fn head_on_pair_has_negative_prediction_inside_horizon() {
    let a = VehicleState::new(-5.0, 0.0, 0.0, 0.0, 5.0);
    let b = VehicleState::new(5.0, 0.0, std::f64::consts::PI, 0.0, 5.0);
    let p = params();
    assert!((barrier_value(BarrierKind::Ff, &a, &b, &p) + 4.0 * 1.25 * 1.25).abs() < 1e-6);
    assert!(h0(&a, &b, 1.25) > 0.0);
}

#[test]
fn relative_kinematics_reports_differences() {
    let vehicle = VehicleParams::default();
    let a = VehicleState::new(1.0, 2.0, 0.0, 0.0, 3.0);
    let b = VehicleState::new(-1.0, 0.0, std::f64::consts::FRAC_PI_2, 0.0, 2.0);
    let rel = relative_kinematics(&a, &b, &vehicle).unwrap();
    assert!((rel.xi.x - 2.0).abs() < 1e-12 && (rel.xi.y - 2.0).abs() < 1e-12);
    assert!((rel.nu.x - 3.0).abs() < 1e-12 && (rel.nu.y + 2.0).abs() < 1e-12);
}
