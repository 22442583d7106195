//! Dense convex QP of the form
//!
//! ```text
//! minimize    ½ ‖u − u⁰‖²
//! subject to  cᵢ · u ≥ bᵢ        (rows)
//!             lo ≤ u ≤ hi        (box)
//! ```
//!
//! With an identity Hessian the minimizer is the Euclidean projection of `u⁰`
//! onto the feasible polytope. The solver is a dual active-set method in the
//! style of Goldfarb and Idnani: it starts at the unconstrained minimizer,
//! repeatedly adds the most violated constraint, and drops constraints whose
//! multipliers would turn negative. A violated constraint that is a
//! non-positive combination of the active normals is a Farkas certificate of
//! infeasibility.
//!
//! Rows are normalized to unit length before solving, so scaling a row does
//! not change the result.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const FEAS_TOL: f64 = 1e-10;
const DEPENDENT_TOL: f64 = 1e-12;
const ZERO_ROW_TOL: f64 = 1e-14;

/// Identifies one constraint of a [`QpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintId {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<f64>,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub target: Vec<f64>,
    pub rows: Vec<LinearRow>,
    /// Per-variable lower bounds; `-inf` disables a bound.
    pub lower: Vec<f64>,
    /// Per-variable upper bounds; `+inf` disables a bound.
    pub upper: Vec<f64>,
}

impl QpProblem {
    pub fn new(target: Vec<f64>) -> Self {
        let n = target.len();
        Self {
            target,
            rows: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    /// Adds `coeffs · u ≥ lower_bound`.
    pub fn push_row(&mut self, coeffs: Vec<f64>, lower_bound: f64) -> &mut Self {
        self.rows.push(LinearRow {
            coeffs,
            lower_bound,
        });
        self
    }

    pub fn with_row(mut self, coeffs: Vec<f64>, lower_bound: f64) -> Self {
        self.push_row(coeffs, lower_bound);
        self
    }

    pub fn with_box(mut self, lower: f64, upper: f64) -> Self {
        self.lower.fill(lower);
        self.upper.fill(upper);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidConfig(
                "QP needs at least one variable".into(),
            ));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidConfig("QP box has the wrong length".into()));
        }
        if self.target.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("QP target"));
        }
        for row in &self.rows {
            if row.coeffs.len() != n {
                return Err(Error::InvalidConfig("QP row has the wrong length".into()));
            }
            if !row.lower_bound.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("QP row"));
            }
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if lo.is_nan() || hi.is_nan() || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY {
                return Err(Error::NonFinite("QP box"));
            }
            if lo > hi {
                return Err(Error::InvalidConfig(format!(
                    "QP box lower {lo} exceeds upper {hi}"
                )));
            }
        }
        Ok(())
    }

    /// Normalized constraints `n · u ≥ b` with `‖n‖ = 1`. Rows with a zero
    /// normal are returned separately.
    fn normalized(&self) -> (Vec<Normalized>, Vec<ConstraintId>) {
        let n = self.dim();
        let mut out = Vec::with_capacity(self.rows.len() + 2 * n);
        let mut degenerate = Vec::new();
        for (idx, row) in self.rows.iter().enumerate() {
            let norm = row.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm < ZERO_ROW_TOL {
                degenerate.push(ConstraintId::Row(idx));
                continue;
            }
            out.push(Normalized {
                id: ConstraintId::Row(idx),
                normal: row.coeffs.iter().map(|c| c / norm).collect(),
                bound: row.lower_bound / norm,
            });
        }
        for k in 0..n {
            if self.lower[k].is_finite() {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                out.push(Normalized {
                    id: ConstraintId::Lower(k),
                    normal: e,
                    bound: self.lower[k],
                });
            }
            if self.upper[k].is_finite() {
                let mut e = vec![0.0; n];
                e[k] = -1.0;
                out.push(Normalized {
                    id: ConstraintId::Upper(k),
                    normal: e,
                    bound: -self.upper[k],
                });
            }
        }
        (out, degenerate)
    }

    /// Signed slack `c · u − b` of a constraint in the caller's scaling.
    pub fn slack(&self, id: ConstraintId, u: &[f64]) -> f64 {
        match id {
            ConstraintId::Row(i) => dot(&self.rows[i].coeffs, u) - self.rows[i].lower_bound,
            ConstraintId::Lower(k) => u[k] - self.lower[k],
            ConstraintId::Upper(k) => self.upper[k] - u[k],
        }
    }

    /// Largest violation of any row or bound, each measured relative to
    /// `1 + |bound|`.
    pub fn max_violation(&self, u: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let s = self.slack(ConstraintId::Row(i), u);
            worst = worst.max(-s / (1.0 + row.lower_bound.abs()));
        }
        for ((x, lo), hi) in u.iter().zip(&self.lower).zip(&self.upper) {
            if lo.is_finite() {
                worst = worst.max(-(x - lo) / (1.0 + lo.abs()));
            }
            if hi.is_finite() {
                worst = worst.max(-(hi - x) / (1.0 + hi.abs()));
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
struct Normalized {
    id: ConstraintId,
    normal: Vec<f64>,
    bound: f64,
}

impl Normalized {
    fn slack(&self, u: &[f64]) -> f64 {
        dot(&self.normal, u) - self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    /// The iteration cap was reached before convergence.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    /// Minimizer when optimal; otherwise the last iterate.
    pub u: Vec<f64>,
    /// Constraints held with equality, in the order they entered.
    pub active_set: Vec<ConstraintId>,
    /// Multipliers of the normalized active constraints.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Active set carried from one control step to the next.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WarmStart {
    pub active: Vec<ConstraintId>,
}

pub fn solve(problem: &QpProblem) -> Result<QpSolution> {
    solve_warm(problem, &WarmStart::default())
}

/// Solves `problem`, seeding the active set from `warm` when the seed is dual
/// feasible.
pub fn solve_warm(problem: &QpProblem, warm: &WarmStart) -> Result<QpSolution> {
    problem.validate()?;
    let (cons, degenerate) = problem.normalized();
    for id in &degenerate {
        if let ConstraintId::Row(i) = id {
            if problem.rows[*i].lower_bound > FEAS_TOL {
                return Ok(QpSolution {
                    status: QpStatus::Infeasible,
                    u: problem.target.clone(),
                    active_set: Vec::new(),
                    multipliers: Vec::new(),
                    kkt_residual: f64::INFINITY,
                    iterations: 0,
                });
            }
        }
    }
    let mut solver = ActiveSet::new(problem.target.clone(), &cons);
    if !warm.active.is_empty() {
        solver.try_warm_start(&warm.active);
    }
    let status = solver.run();
    let active_set: Vec<ConstraintId> = solver.active.iter().map(|&i| cons[i].id).collect();
    let kkt_residual = if status == QpStatus::Optimal {
        verify_kkt(problem, &solver.x, &active_set)
    } else {
        f64::INFINITY
    };
    Ok(QpSolution {
        status,
        u: solver.x,
        active_set,
        multipliers: solver.lambda,
        kkt_residual,
        iterations: solver.iterations,
    })
}

struct ActiveSet<'a> {
    target: Vec<f64>,
    cons: &'a [Normalized],
    x: Vec<f64>,
    active: Vec<usize>,
    lambda: Vec<f64>,
    iterations: usize,
}

impl<'a> ActiveSet<'a> {
    fn new(target: Vec<f64>, cons: &'a [Normalized]) -> Self {
        Self {
            x: target.clone(),
            target,
            cons,
            active: Vec::new(),
            lambda: Vec::new(),
            iterations: 0,
        }
    }

    fn dim(&self) -> usize {
        self.target.len()
    }

    /// Returns `(r, z)` with `r = (NᵀN)⁻¹ Nᵀ n` and `z = n − N r`, where `N`
    /// stacks the active normals.
    fn split(&self, normal: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.active.len();
        if m == 0 {
            return (Vec::new(), normal.to_vec());
        }
        let gram = DMatrix::from_fn(m, m, |a, b| {
            dot(
                &self.cons[self.active[a]].normal,
                &self.cons[self.active[b]].normal,
            )
        });
        let rhs = DVector::from_fn(m, |a, _| dot(&self.cons[self.active[a]].normal, normal));
        let r = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .unwrap_or_else(|_| DVector::zeros(m)),
        };
        let mut z = normal.to_vec();
        for (a, &ci) in self.active.iter().enumerate() {
            for (zk, nk) in z.iter_mut().zip(&self.cons[ci].normal) {
                *zk -= r[a] * nk;
            }
        }
        (r.iter().copied().collect(), z)
    }

    fn try_warm_start(&mut self, ids: &[ConstraintId]) {
        let mut active = Vec::new();
        for id in ids {
            let Some(ci) = self.cons.iter().position(|c| c.id == *id) else {
                continue;
            };
            if active.contains(&ci) || active.len() == self.dim() {
                continue;
            }
            self.active = active.clone();
            let (_, z) = self.split(&self.cons[ci].normal);
            if norm(&z) > 1e-8 {
                active.push(ci);
            }
        }
        if active.is_empty() {
            self.active.clear();
            return;
        }
        // Equality-constrained projection onto the seeded face.
        let m = active.len();
        let gram = DMatrix::from_fn(m, m, |a, b| {
            dot(&self.cons[active[a]].normal, &self.cons[active[b]].normal)
        });
        let rhs = DVector::from_fn(m, |a, _| {
            let c = &self.cons[active[a]];
            c.bound - dot(&c.normal, &self.target)
        });
        let Some(ch) = gram.cholesky() else {
            self.active.clear();
            return;
        };
        let lambda = ch.solve(&rhs);
        if lambda.iter().any(|l| *l < 0.0) {
            self.active.clear();
            return;
        }
        let mut x = self.target.clone();
        for (a, &ci) in active.iter().enumerate() {
            for (xk, nk) in x.iter_mut().zip(&self.cons[ci].normal) {
                *xk += lambda[a] * nk;
            }
        }
        self.x = x;
        self.active = active;
        self.lambda = lambda.iter().copied().collect();
    }

    fn most_violated(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (ci, c) in self.cons.iter().enumerate() {
            if self.active.contains(&ci) {
                continue;
            }
            let s = c.slack(&self.x);
            if s < -FEAS_TOL * (1.0 + c.bound.abs()) && best.is_none_or(|(_, bs)| s < bs) {
                best = Some((ci, s));
            }
        }
        best
    }

    fn drop_active(&mut self, pos: usize) {
        self.active.remove(pos);
        self.lambda.remove(pos);
    }

    fn run(&mut self) -> QpStatus {
        loop {
            let Some((p, _)) = self.most_violated() else {
                return QpStatus::Optimal;
            };
            let normal = self.cons[p].normal.clone();
            let mut lambda_p = 0.0;
            loop {
                self.iterations += 1;
                if self.iterations > MAX_ITERATIONS {
                    return QpStatus::IterationLimit;
                }
                let (r, z) = self.split(&normal);
                let zz = dot(&z, &z);
                let s_p = self.cons[p].slack(&self.x);
                let full_step = if zz > DEPENDENT_TOL {
                    -s_p / zz
                } else {
                    f64::INFINITY
                };
                let mut partial_step = f64::INFINITY;
                let mut blocking = None;
                for (a, (ra, la)) in r.iter().zip(&self.lambda).enumerate() {
                    if *ra > DEPENDENT_TOL {
                        let t = la / ra;
                        if t < partial_step {
                            partial_step = t;
                            blocking = Some(a);
                        }
                    }
                }
                if full_step.is_infinite() && partial_step.is_infinite() {
                    return QpStatus::Infeasible;
                }
                let t = full_step.min(partial_step);
                for (la, ra) in self.lambda.iter_mut().zip(&r) {
                    *la -= t * ra;
                }
                lambda_p += t;
                if full_step.is_finite() {
                    for (xk, zk) in self.x.iter_mut().zip(&z) {
                        *xk += t * zk;
                    }
                }
                if full_step <= partial_step {
                    self.active.push(p);
                    self.lambda.push(lambda_p);
                    break;
                }
                if let Some(a) = blocking {
                    self.drop_active(a);
                }
                if full_step.is_finite()
                    && self.cons[p].slack(&self.x) >= -FEAS_TOL * (1.0 + self.cons[p].bound.abs())
                {
                    self.active.push(p);
                    self.lambda.push(lambda_p);
                    break;
                }
            }
        }
    }
}

/// Largest violation among the KKT conditions of the normalized problem at
/// `u`: stationarity (least-squares multipliers on `active_set`), primal
/// feasibility, dual feasibility and complementarity.
pub fn verify_kkt(problem: &QpProblem, u: &[f64], active_set: &[ConstraintId]) -> f64 {
    let (cons, _) = problem.normalized();
    let n = problem.dim();
    let grad: Vec<f64> = u.iter().zip(&problem.target).map(|(a, b)| a - b).collect();

    let mut primal: f64 = 0.0;
    for c in &cons {
        primal = primal.max(-c.slack(u));
    }
    let active: Vec<&Normalized> = active_set
        .iter()
        .filter_map(|id| cons.iter().find(|c| c.id == *id))
        .collect();
    if active.is_empty() {
        let stationarity = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        return stationarity.max(primal);
    }
    let m = active.len();
    let nmat = DMatrix::from_fn(n, m, |k, a| active[a].normal[k]);
    let g = DVector::from_column_slice(&grad);
    let lambda = nmat
        .clone()
        .svd(true, true)
        .solve(&g, 1e-14)
        .unwrap_or_else(|_| DVector::zeros(m));
    let stationarity = (&g - &nmat * &lambda).amax();
    let dual = lambda.iter().fold(0.0f64, |w, l| w.max(-l));
    let complementarity = active
        .iter()
        .zip(lambda.iter())
        .fold(0.0f64, |w, (c, l)| w.max((l * c.slack(u)).abs()));
    stationarity.max(primal).max(dual).max(complementarity)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
