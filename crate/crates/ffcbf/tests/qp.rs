use ffcbf::qp::{solve, solve_warm, verify_kkt, QpProblem, QpStatus, WarmStart};
use ffcbf_testkit::{brute_force_qp, sample, BruteForce};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn agree(qp: &QpProblem) -> Result<(), String> {
    let sol = solve(qp).map_err(|e| e.to_string())?;
    match (brute_force_qp(qp), sol.status) {
        (BruteForce::Optimal(u), QpStatus::Optimal) => {
            let gap = u
                .iter()
                .zip(&sol.u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap > 1e-6 {
                return Err(format!("solutions differ by {gap}: {u:?} vs {:?}", sol.u));
            }
            Ok(())
        }
        (BruteForce::Infeasible, QpStatus::Infeasible) => Ok(()),
        (oracle, status) => Err(format!("oracle {oracle:?}, solver {status:?}")),
    }
}

#[test]
fn matches_enumeration_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut infeasible = 0;
    for k in 0..1000 {
        let qp = sample::qp(&mut rng);
        if let Err(msg) = agree(&qp) {
            panic!("instance {k}: {msg}\n{qp:?}");
        }
        infeasible += (brute_force_qp(&qp) == BruteForce::Infeasible) as usize;
    }
    assert!(
        infeasible > 20,
        "sampler produced only {infeasible} infeasible instances"
    );
}

#[test]
fn warm_start_gives_the_same_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let qp = sample::qp(&mut rng);
        let cold = solve(&qp).unwrap();
        if cold.status != QpStatus::Optimal {
            continue;
        }
        let mut warm = WarmStart {
            active: cold.active_set.clone(),
        };
        let again = solve_warm(&qp, &warm).unwrap();
        assert_eq!(again.status, QpStatus::Optimal);
        for (a, b) in cold.u.iter().zip(&again.u) {
            assert!((a - b).abs() < 1e-9);
        }
        warm.active.reverse();
        assert_eq!(solve_warm(&qp, &warm).unwrap().status, QpStatus::Optimal);
    }
}

#[test]
fn optimal_solutions_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let qp = sample::qp(&mut rng);
        let sol = solve(&qp).unwrap();
        if sol.is_optimal() {
            assert!(verify_kkt(&qp, &sol.u, &sol.active_set) < 1e-8);
            assert!(qp.max_violation(&sol.u) < 1e-9);
        }
    }
}

#[test]
fn parallel_rows_with_a_gap_are_infeasible() {
    let qp = QpProblem::new(vec![0.0, 0.0])
        .with_row(vec![1.0, 0.0], 1.0)
        .with_row(vec![-2.0, 0.0], -1.0);
    assert_eq!(solve(&qp).unwrap().status, QpStatus::Infeasible);
}

#[test]
fn non_finite_data_is_an_error() {
    let qp = QpProblem::new(vec![f64::NAN]);
    assert!(solve(&qp).is_err());
    let qp = QpProblem::new(vec![0.0]).with_row(vec![f64::INFINITY], 0.0);
    assert!(solve(&qp).is_err());
}

proptest! {
    #[test]
    fn row_scaling_does_not_change_the_minimizer(
        target in prop::collection::vec(-5.0..5.0f64, 2),
        c in prop::collection::vec(-3.0..3.0f64, 2),
        b in -3.0..3.0f64,
        scale in 0.01..100.0f64,
    ) {
        prop_assume!(c[0].abs() + c[1].abs() > 1e-3);
        let a = solve(&QpProblem::new(target.clone()).with_row(c.clone(), b)).unwrap();
        let s = solve(&QpProblem::new(target).with_row(c.iter().map(|x| x * scale).collect(), b * scale)).unwrap();
        for (x, y) in a.u.iter().zip(&s.u) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn feasible_target_is_returned_unchanged(target in prop::collection::vec(-1.0..1.0f64, 3)) {
        let sol = solve(&QpProblem::new(target.clone()).with_box(-2.0, 2.0)).unwrap();
        prop_assert_eq!(sol.u, target);
    }
}
