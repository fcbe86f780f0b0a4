//! Shared least-squares machinery over the bar-chain parameterization.
//!
//! Shapes are parameterized as three bars, each a midpoint plus a unit
//! direction, which keeps bar lengths exact by construction and leaves 15
//! effective degrees of freedom. Edge-length objectives are minimized with
//! damped Gauss-Newton steps; equality constraints (exact tendon lengths)
//! are enforced afterward with KKT polish steps.

use crate::shape::RobotShape;
use crate::topology::BARS;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3, SVD};

pub(crate) const PARAM_COUNT: usize = 18;

/// Three bars as midpoint + direction. Directions are renormalized after
/// every update, so node positions always satisfy the bar lengths exactly.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BarChain {
    pub mids: [Vector3<f64>; 3],
    pub dirs: [Vector3<f64>; 3],
    pub half_length: f64,
}

impl BarChain {
    pub fn from_shape(shape: &RobotShape, bar_length: f64) -> Self {
        let mut mids = [Vector3::zeros(); 3];
        let mut dirs = [Vector3::zeros(); 3];
        for (l, &(even, odd)) in BARS.iter().enumerate() {
            mids[l] = (shape.node(even) + shape.node(odd)) / 2.0;
            dirs[l] = (shape.node(even) - shape.node(odd)).normalize();
        }
        Self {
            mids,
            dirs,
            half_length: bar_length / 2.0,
        }
    }

    pub fn shape(&self) -> RobotShape {
        let mut nodes = [Vector3::zeros(); 6];
        for l in 0..3 {
            nodes[2 * l] = self.mids[l] + self.half_length * self.dirs[l];
            nodes[2 * l + 1] = self.mids[l] - self.half_length * self.dirs[l];
        }
        RobotShape::new(nodes)
    }

    fn apply_step(&mut self, delta: &DVector<f64>) {
        for l in 0..3 {
            for a in 0..3 {
                self.mids[l][a] += delta[6 * l + a];
                self.dirs[l][a] += delta[6 * l + 3 + a];
            }
            self.dirs[l].normalize_mut();
        }
    }
}

/// One scalar residual over node positions.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Residual {
    /// weight * (|n_p - n_q| - target)
    EdgeLength {
        p: usize,
        q: usize,
        target: f64,
        weight: f64,
    },
    /// weight * max(0, |n_p - n_q| - limit); one-sided cable penalty.
    EdgeMaxLength {
        p: usize,
        q: usize,
        limit: f64,
        weight: f64,
    },
}

impl Residual {
    fn edge(&self) -> (usize, usize) {
        match *self {
            Residual::EdgeLength { p, q, .. } | Residual::EdgeMaxLength { p, q, .. } => (p, q),
        }
    }

    fn value(&self, len: f64) -> f64 {
        match *self {
            Residual::EdgeLength { target, weight, .. } => weight * (len - target),
            Residual::EdgeMaxLength { limit, weight, .. } => weight * (len - limit).max(0.0),
        }
    }

    fn active(&self, len: f64) -> bool {
        match *self {
            Residual::EdgeLength { .. } => true,
            Residual::EdgeMaxLength { limit, .. } => len > limit,
        }
    }

    fn weight(&self) -> f64 {
        match *self {
            Residual::EdgeLength { weight, .. } | Residual::EdgeMaxLength { weight, .. } => weight,
        }
    }
}

/// d(node_i)/d(params): node i belongs to bar i/2 with direction sign
/// +1 (even) or -1 (odd); the direction block uses the normalization
/// projector (I - d d^T) since directions are unit at evaluation time.
fn node_jacobian_blocks(chain: &BarChain, node: usize) -> (usize, f64, Matrix3<f64>) {
    let bar = node / 2;
    let sign = if node.is_multiple_of(2) { 1.0 } else { -1.0 };
    let d = chain.dirs[bar];
    let proj = Matrix3::identity() - d * d.transpose();
    (bar, sign, proj * (sign * chain.half_length))
}

fn evaluate(
    chain: &BarChain,
    residuals: &[Residual],
) -> (DVector<f64>, DMatrix<f64>) {
    let shape = chain.shape();
    let m = residuals.len();
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, PARAM_COUNT);
    for (k, res) in residuals.iter().enumerate() {
        let (p, q) = res.edge();
        let diff = shape.node(p) - shape.node(q);
        let len = diff.norm();
        r[k] = res.value(len);
        if !res.active(len) || len < 1e-12 {
            continue;
        }
        let unit = diff / len;
        let w = res.weight();
        // dr/dnode_p = w * unit, dr/dnode_q = -w * unit, chained to params.
        for (node, s) in [(p, 1.0), (q, -1.0)] {
            let (bar, _, dir_block) = node_jacobian_blocks(chain, node);
            let g = unit * (w * s);
            let gd = dir_block.transpose() * g;
            for a in 0..3 {
                jac[(k, 6 * bar + a)] += g[a];
                jac[(k, 6 * bar + 3 + a)] += gd[a];
            }
        }
    }
    (r, jac)
}

pub(crate) fn objective(chain: &BarChain, residuals: &[Residual]) -> f64 {
    let shape = chain.shape();
    residuals
        .iter()
        .map(|res| {
            let (p, q) = res.edge();
            let v = res.value((shape.node(p) - shape.node(q)).norm());
            0.5 * v * v
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmReport {
    pub converged: bool,
    pub objective: f64,
    pub gradient_norm: f64,
}

/// Damped Gauss-Newton (Levenberg-Marquardt) over the bar chain.
pub(crate) fn minimize(
    chain: &mut BarChain,
    residuals: &[Residual],
    opts: &LmOptions,
) -> LmReport {
    let mut lambda = 1e-6;
    let mut cost = objective(chain, residuals);
    let mut gradient_norm = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let (r, jac) = evaluate(chain, residuals);
        let grad = jac.transpose() * &r;
        gradient_norm = grad.amax();
        if gradient_norm < opts.gradient_tol {
            return LmReport {
                converged: true,
                objective: cost,
                gradient_norm,
            };
        }
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        for _ in 0..25 {
            let mut lhs = jtj.clone();
            for i in 0..PARAM_COUNT {
                lhs[(i, i)] += lambda;
            }
            let Some(delta) = lhs.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = *chain;
            trial.apply_step(&delta);
            let trial_cost = objective(&trial, residuals);
            if trial_cost <= cost {
                *chain = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-14);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No downhill step found at any damping; treat as converged to
            // numerical precision.
            return LmReport {
                converged: gradient_norm < opts.gradient_tol * 1e4,
                objective: cost,
                gradient_norm,
            };
        }
    }
    LmReport {
        converged: false,
        objective: cost,
        gradient_norm,
    }
}

/// Equality constraint: edge (p, q) at exactly `target`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EdgeConstraint {
    pub p: usize,
    pub q: usize,
    pub target: f64,
}

/// KKT polish: minimize the residual objective subject to exact edge-length
/// constraints, starting from a near-feasible chain. Returns the final
/// maximum constraint violation.
pub(crate) fn polish_constrained(
    chain: &mut BarChain,
    energy: &[Residual],
    constraints: &[EdgeConstraint],
    iterations: usize,
) -> f64 {
    let k = constraints.len();
    if k == 0 {
        return 0.0;
    }
    let n = PARAM_COUNT;
    let mut worst = constraint_violation(chain, constraints);
    let mut obj = objective(chain, energy);
    let mut damping = 1e-8;
    for _ in 0..iterations {
        let (r, jac) = evaluate(chain, energy);
        let shape = chain.shape();
        let mut c = DVector::zeros(k);
        let mut jc = DMatrix::zeros(k, n);
        for (row, con) in constraints.iter().enumerate() {
            let diff = shape.node(con.p) - shape.node(con.q);
            let len = diff.norm();
            c[row] = len - con.target;
            let unit = diff / len;
            for (node, s) in [(con.p, 1.0), (con.q, -1.0)] {
                let (bar, _, dir_block) = node_jacobian_blocks(chain, node);
                let g = unit * s;
                let gd = dir_block.transpose() * g;
                for a in 0..3 {
                    jc[(row, 6 * bar + a)] += g[a];
                    jc[(row, 6 * bar + 3 + a)] += gd[a];
                }
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let scale = 1.0 + jtj.diagonal().amax();
        // KKT system with adaptive damping: steps that worsen the
        // constraints get retried with stronger regularization.
        let mut accepted = false;
        for _ in 0..20 {
            let mut kkt = DMatrix::zeros(n + k, n + k);
            for i in 0..n {
                for j in 0..n {
                    kkt[(i, j)] = jtj[(i, j)];
                }
                kkt[(i, i)] += damping * scale;
            }
            for row in 0..k {
                for j in 0..n {
                    kkt[(n + row, j)] = jc[(row, j)];
                    kkt[(j, n + row)] = jc[(row, j)];
                }
            }
            let mut rhs = DVector::zeros(n + k);
            for i in 0..n {
                rhs[i] = -jtr[i];
            }
            for row in 0..k {
                rhs[n + row] = -c[row];
            }
            let Some(sol) = kkt.lu().solve(&rhs) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = *chain;
            trial.apply_step(&sol.rows(0, n).into_owned());
            let trial_worst = constraint_violation(&trial, constraints);
            let trial_obj = objective(&trial, energy);
            // Two regimes. Far from the manifold, steps must shrink the
            // violation. Near it, steps may descend the objective through
            // transient quadratic violations (the next step's -c right-hand
            // side pulls them back), which is what lets the walk take full
            // Newton strides along the constraint valley.
            let tiny = 1e-12 * (1.0 + obj.abs());
            let improving = trial_obj <= obj - tiny;
            let ok = if worst > 1e-7 {
                trial_worst <= worst * 0.9 + 1e-16
            } else {
                trial_worst <= 1e-7 && (improving || trial_worst < worst)
            };
            if ok {
                let converged = !improving && trial_worst <= 1e-12;
                *chain = trial;
                worst = trial_worst;
                obj = trial_obj;
                damping = (damping / 3.0).max(1e-10);
                accepted = !converged;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    worst
}

pub(crate) fn constraint_violation(chain: &BarChain, constraints: &[EdgeConstraint]) -> f64 {
    let shape = chain.shape();
    constraints
        .iter()
        .map(|c| ((shape.node(c.p) - shape.node(c.q)).norm() - c.target).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Rotation fitting
// ---------------------------------------------------------------------------

/// Proper rotation minimizing sum |R a_i - b_i|^2 over pairs (a, b).
/// Closed-form orthogonal Procrustes restricted to det +1: SVD of the
/// attitude profile with a sign correction on its smallest singular value.
pub(crate) fn wahba_rotation(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Matrix3<f64> {
    let mut profile = Matrix3::zeros();
    for (a, b) in pairs {
        profile += b * a.transpose();
    }
    let svd = SVD::new(profile, true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let det = (u * v_t).determinant();
    let sv = svd.singular_values;
    let mut min_i = 0;
    for i in 1..3 {
        if sv[i] < sv[min_i] {
            min_i = i;
        }
    }
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    d[min_i] = det.signum();
    u * Matrix3::from_diagonal(&d) * v_t
}

/// Rigid fit (R, t) minimizing sum |R from_i + t - to_i|^2.
#[cfg(test)]
pub(crate) fn kabsch_fit(
    from: &[Vector3<f64>],
    to: &[Vector3<f64>],
) -> (Matrix3<f64>, Vector3<f64>) {
    let w = vec![1.0; from.len()];
    kabsch_fit_weighted(from, to, &w)
}

/// Weighted rigid fit (R, t) minimizing sum w_i |R from_i + t - to_i|^2.
pub(crate) fn kabsch_fit_weighted(
    from: &[Vector3<f64>],
    to: &[Vector3<f64>],
    weights: &[f64],
) -> (Matrix3<f64>, Vector3<f64>) {
    assert_eq!(from.len(), to.len());
    assert_eq!(from.len(), weights.len());
    let total: f64 = weights.iter().sum();
    let c_from = from
        .iter()
        .zip(weights)
        .map(|(p, &w)| p * w)
        .sum::<Vector3<f64>>()
        / total;
    let c_to = to
        .iter()
        .zip(weights)
        .map(|(p, &w)| p * w)
        .sum::<Vector3<f64>>()
        / total;
    let mut profile = Matrix3::zeros();
    for i in 0..from.len() {
        profile += (to[i] - c_to) * (from[i] - c_from).transpose() * weights[i];
    }
    let svd = SVD::new(profile, true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let det = (u * v_t).determinant();
    let sv = svd.singular_values;
    let mut min_i = 0;
    for i in 1..3 {
        if sv[i] < sv[min_i] {
            min_i = i;
        }
    }
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    d[min_i] = det.signum();
    let r = u * Matrix3::from_diagonal(&d) * v_t;
    let t = c_to - r * c_from;
    (r, t)
}
