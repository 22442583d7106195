use rand::Rng;

use ffcbf::qp::QpProblem;

/// A bounded random state `[x, y, ψ, β, v]`.
pub fn state<R: Rng>(rng: &mut R) -> [f64; 5] {
    [
        rng.random_range(-20.0..20.0),
        rng.random_range(-20.0..20.0),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-0.5..0.5),
        rng.random_range(0.0..10.0),
    ]
}

/// A state whose input coupling is non-singular (speed bounded away from 0).
pub fn moving_state<R: Rng>(rng: &mut R) -> [f64; 5] {
    let mut z = state(rng);
    z[4] = rng.random_range(0.5..10.0);
    z
}

/// A random QP with `1..=4` variables, up to 12 rows and an optional box.
pub fn qp<R: Rng>(rng: &mut R) -> QpProblem {
    let n = rng.random_range(1..=4);
    let target = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut qp = QpProblem::new(target);
    if rng.random_bool(0.5) {
        let half = rng.random_range(0.5..5.0);
        qp = qp.with_box(-half, half);
    }
    let rows = rng.random_range(0..=12);
    for _ in 0..rows {
        let coeffs = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        qp.push_row(coeffs, rng.random_range(-4.0..4.0));
    }
    qp
}
