use nalgebra::{DMatrix, DVector};

use ffcbf::qp::QpProblem;

/// Result of [`brute_force_qp`].
#[derive(Debug, Clone, PartialEq)]
pub enum BruteForce {
    Optimal(Vec<f64>),
    Infeasible,
}

const KKT_TOL: f64 = 1e-9;

/// Minimizes `½‖u − u⁰‖²` over the problem's polytope by enumerating every
/// candidate active set of size at most `dim` and keeping the first KKT point.
///
/// The objective is strictly convex, so a KKT point is the unique optimum and
/// its absence means the polytope is empty.
pub fn brute_force_qp(problem: &QpProblem) -> BruteForce {
    let n = problem.target.len();
    let mut normals: Vec<Vec<f64>> = Vec::new();
    let mut bounds: Vec<f64> = Vec::new();
    for row in &problem.rows {
        normals.push(row.coeffs.clone());
        bounds.push(row.lower_bound);
    }
    for k in 0..n {
        let mut e = vec![0.0; n];
        if problem.lower[k].is_finite() {
            e[k] = 1.0;
            normals.push(e.clone());
            bounds.push(problem.lower[k]);
        }
        if problem.upper[k].is_finite() {
            e[k] = -1.0;
            normals.push(e);
            bounds.push(-problem.upper[k]);
        }
    }
    // Scale every constraint to a unit normal so the tolerances are in metres.
    let mut live = Vec::new();
    for (c, b) in normals.iter_mut().zip(bounds.iter_mut()) {
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-14 {
            if *b > KKT_TOL {
                return BruteForce::Infeasible;
            }
            continue;
        }
        c.iter_mut().for_each(|x| *x /= norm);
        *b /= norm;
        live.push((c.clone(), *b));
    }

    let m = live.len();
    let u0 = DVector::from_column_slice(&problem.target);
    for size in 0..=n.min(m) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            if let Some(u) = kkt_point(&live, &subset, &u0) {
                return BruteForce::Optimal(u.iter().copied().collect());
            }
            if !next_subset(&mut subset, m) {
                break;
            }
        }
    }
    BruteForce::Infeasible
}

/// Solves the equality-constrained projection for `subset` and checks
/// primal feasibility and multiplier signs.
fn kkt_point(
    live: &[(Vec<f64>, f64)],
    subset: &[usize],
    u0: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = u0.len();
    let u = if subset.is_empty() {
        u0.clone()
    } else {
        let a = DMatrix::from_fn(subset.len(), n, |r, c| live[subset[r]].0[c]);
        let b = DVector::from_fn(subset.len(), |r, _| live[subset[r]].1);
        // u = u0 + Aᵀλ with A u = b, so (A Aᵀ) λ = b − A u0.
        let gram = &a * a.transpose();
        if gram.determinant().abs() < 1e-10 {
            return None;
        }
        let lambda = gram.lu().solve(&(b - &a * u0))?;
        if lambda.iter().any(|l| *l < -KKT_TOL) {
            return None;
        }
        u0 + a.transpose() * lambda
    };
    let feasible = live.iter().all(|(c, b)| {
        let s: f64 = c.iter().zip(u.iter()).map(|(x, y)| x * y).sum();
        s >= b - KKT_TOL
    });
    feasible.then_some(u)
}

fn next_subset(subset: &mut [usize], m: usize) -> bool {
    let k = subset.len();
    for i in (0..k).rev() {
        if subset[i] < m - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Steady-state LQR gain `[k_pos, k_vel]` for one double-integrator axis,
/// obtained by integrating the Riccati differential equation
/// `Ṗ = AᵀP + PA − P B r⁻¹ Bᵀ P + Q` from `P = 0` until it stops moving.
pub fn riccati_gain(q_pos: f64, q_vel: f64, r: f64) -> [f64; 2] {
    // P = [[p11, p12], [p12, p22]], A = [[0, 1], [0, 0]], B = [0, 1]ᵀ.
    let rhs = |p: [f64; 3]| {
        let [p11, p12, p22] = p;
        [
            q_pos - p12 * p12 / r,
            p11 - p12 * p22 / r,
            2.0 * p12 + q_vel - p22 * p22 / r,
        ]
    };
    let mut p = [0.0; 3];
    let h = 1e-3;
    for _ in 0..10_000_000 {
        let add =
            |p: [f64; 3], k: [f64; 3], s: f64| [p[0] + s * k[0], p[1] + s * k[1], p[2] + s * k[2]];
        let k1 = rhs(p);
        let k2 = rhs(add(p, k1, 0.5 * h));
        let k3 = rhs(add(p, k2, 0.5 * h));
        let k4 = rhs(add(p, k3, h));
        let next: [f64; 3] =
            std::array::from_fn(|i| p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        let moved = (0..3).map(|i| (next[i] - p[i]).abs()).fold(0.0, f64::max);
        p = next;
        if moved < 1e-15 {
            break;
        }
    }
    [p[1] / r, p[2] / r]
}

/// Bicycle right-hand side `[ẋ, ẏ, ψ̇, β̇, v̇]`.
pub fn bicycle_rhs(z: [f64; 5], omega: f64, a: f64, lr: f64) -> [f64; 5] {
    let [_, _, psi, beta, v] = z;
    let heading = psi + beta;
    let scale = v / beta.cos();
    [
        scale * heading.cos(),
        scale * heading.sin(),
        v * beta.tan() / lr,
        omega,
        a,
    ]
}

/// Planar acceleration realized by `[ω, a]`, differentiating the velocity in
/// its polar form `v sec β · (cos(ψ+β), sin(ψ+β))`.
pub fn planar_acceleration(z: [f64; 5], omega: f64, a: f64, lr: f64) -> [f64; 2] {
    let [_, _, psi, beta, v] = z;
    let sec = 1.0 / beta.cos();
    let speed = v * sec;
    let speed_dot = a * sec + v * sec * beta.tan() * omega;
    let turn_rate = v * beta.tan() / lr + omega;
    let (s, c) = (psi + beta).sin_cos();
    [
        speed_dot * c - speed * turn_rate * s,
        speed_dot * s + speed * turn_rate * c,
    ]
}

/// Planar acceleration realized by `[ω, a]`, from a Richardson-extrapolated
/// central difference of the planar velocity along the flow.
pub fn planar_acceleration_fd(z: [f64; 5], omega: f64, a: f64, lr: f64) -> [f64; 2] {
    let dz = bicycle_rhs(z, omega, a, lr);
    let vel_at = |h: f64| {
        let moved: [f64; 5] = std::array::from_fn(|i| z[i] + h * dz[i]);
        let d = bicycle_rhs(moved, omega, a, lr);
        [d[0], d[1]]
    };
    let central = |h: f64| {
        let (p, m) = (vel_at(h), vel_at(-h));
        [(p[0] - m[0]) / (2.0 * h), (p[1] - m[1]) / (2.0 * h)]
    };
    let h = 1e-3;
    let (c1, c2) = (central(h), central(0.5 * h));
    [(4.0 * c2[0] - c1[0]) / 3.0, (4.0 * c2[1] - c1[1]) / 3.0]
}

/// Predicted separation barrier `‖ξ + ν τ̂‖² − 4R²` with the smooth clamp
/// written out in terms of `tanh`.
pub fn ff_value(xi: [f64; 2], nu: [f64; 2], tau_bar: f64, k: f64, eps: f64, radius: f64) -> f64 {
    let tau_hat = clamped_horizon(xi, nu, tau_bar, k, eps);
    let px = xi[0] + nu[0] * tau_hat;
    let py = xi[1] + nu[1] * tau_hat;
    px * px + py * py - 4.0 * radius * radius
}

/// `ff_value + c · max(τ̂ − 1, floor) · (‖ξ‖² − 4R²)`.
#[allow(clippy::too_many_arguments)]
pub fn rff_value(
    xi: [f64; 2],
    nu: [f64; 2],
    tau_bar: f64,
    k: f64,
    eps: f64,
    radius: f64,
    k0_scale: f64,
    k0_floor: f64,
) -> f64 {
    let tau_hat = clamped_horizon(xi, nu, tau_bar, k, eps);
    let h0 = xi[0] * xi[0] + xi[1] * xi[1] - 4.0 * radius * radius;
    ff_value(xi, nu, tau_bar, k, eps, radius) + k0_scale * (tau_hat - 1.0).max(k0_floor) * h0
}

pub fn clamped_horizon(xi: [f64; 2], nu: [f64; 2], tau_bar: f64, k: f64, eps: f64) -> f64 {
    let s = -(xi[0] * nu[0] + xi[1] * nu[1]) / (nu[0] * nu[0] + nu[1] * nu[1] + eps);
    let on = 0.5 * (1.0 + (k * s).tanh());
    let off = 0.5 * (1.0 + (k * (s - tau_bar)).tanh());
    s * on + (tau_bar - s) * off
}

/// Relative position and velocity of vehicle `i` with respect to `j`.
pub fn relative(zi: [f64; 5], zj: [f64; 5]) -> ([f64; 2], [f64; 2]) {
    let vel = |z: [f64; 5]| {
        let scale = z[4] / z[3].cos();
        [scale * (z[2] + z[3]).cos(), scale * (z[2] + z[3]).sin()]
    };
    let (vi, vj) = (vel(zi), vel(zj));
    (
        [zi[0] - zj[0], zi[1] - zj[1]],
        [vi[0] - vj[0], vi[1] - vj[1]],
    )
}

/// Fourth-order central difference of `f` along coordinate `k` of `z`.
pub fn central_difference(f: impl Fn([f64; 5]) -> f64, z: [f64; 5], k: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut w = z;
        w[k] += s * h;
        f(w)
    };
    (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
}
