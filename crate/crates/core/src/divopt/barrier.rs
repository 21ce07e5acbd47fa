//! Log-barrier interior-point method for small convex programs whose
//! objective and constraints are affine functions plus weighted
//! `-ln(affine)` terms. Channel-space divergence problems have exactly
//! this form once the channel entries are the variables.

use nalgebra::{DMatrix, DVector};

/// `-weight * ln(coeffs . x + offset)`.
#[derive(Debug, Clone)]
pub(crate) struct LogTerm {
    pub weight: f64,
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

/// `linear . x + constant + sum of log terms`.
#[derive(Debug, Clone)]
pub(crate) struct ConvexExpr {
    pub linear: Vec<f64>,
    pub constant: f64,
    pub logs: Vec<LogTerm>,
}

impl ConvexExpr {
    pub fn zero(n: usize) -> Self {
        Self { linear: vec![0.0; n], constant: 0.0, logs: Vec::new() }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant + dot(&self.linear, x);
        for t in &self.logs {
            let arg = dot(&t.coeffs, x) + t.offset;
            if arg <= 0.0 {
                return f64::INFINITY;
            }
            v -= t.weight * arg.ln();
        }
        v
    }

    /// Adds `scale * gradient` into `grad` and `scale * hessian` into `hess`,
    /// returning the unscaled gradient.
    fn derivatives(&self, x: &[f64], n: usize, hess: &mut DMatrix<f64>, scale: f64) -> Vec<f64> {
        let mut g = self.linear.clone();
        for t in &self.logs {
            let arg = dot(&t.coeffs, x) + t.offset;
            let w = t.weight / arg;
            let h = scale * t.weight / (arg * arg);
            for i in 0..n {
                if t.coeffs[i] == 0.0 {
                    continue;
                }
                g[i] -= w * t.coeffs[i];
                for j in 0..n {
                    if t.coeffs[j] != 0.0 {
                        hess[(i, j)] += h * t.coeffs[i] * t.coeffs[j];
                    }
                }
            }
        }
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `objective` subject to `constraints[k](x) <= 0`.
pub(crate) struct Program {
    pub n: usize,
    pub objective: ConvexExpr,
    pub constraints: Vec<ConvexExpr>,
}

pub(crate) struct BarrierOutcome {
    pub x: Vec<f64>,
    pub converged: bool,
}

impl Program {
    pub fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.objective.value(x).is_finite() && self.constraints.iter().all(|c| c.value(x) < 0.0)
    }

    fn barrier(&self, x: &[f64], tau: f64) -> f64 {
        let f = self.objective.value(x);
        if !f.is_finite() {
            return f64::INFINITY;
        }
        let mut phi = tau * f;
        for c in &self.constraints {
            let g = c.value(x);
            if g >= 0.0 || !g.is_finite() {
                return f64::INFINITY;
            }
            phi -= (-g).ln();
        }
        phi
    }

    /// Gradient and Hessian of the barrier function at a strictly feasible point.
    fn newton_system(&self, x: &[f64], tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n;
        let mut hess = DMatrix::zeros(n, n);
        let gf = self.objective.derivatives(x, n, &mut hess, tau);
        let mut grad = DVector::from_iterator(n, gf.iter().map(|v| tau * v));
        for c in &self.constraints {
            let slack = -c.value(x);
            let gc = c.derivatives(x, n, &mut hess, 1.0 / slack);
            for i in 0..n {
                grad[i] += gc[i] / slack;
                if gc[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    hess[(i, j)] += gc[i] * gc[j] / (slack * slack);
                }
            }
        }
        (grad, hess)
    }

    fn center(&self, x: &mut [f64], tau: f64) -> bool {
        for _ in 0..200 {
            let (grad, hess) = self.newton_system(x, tau);
            let Some(dx) = solve_spd(hess, &grad) else { return false };
            let decrement = -grad.dot(&dx);
            let phi = self.barrier(x, tau);
            // Below this the barrier value cannot resolve further progress.
            if decrement <= 2e-12 + 1e-14 * phi.abs() {
                return true;
            }
            let mut s = 1.0;
            let mut trial = x.to_vec();
            loop {
                for i in 0..self.n {
                    trial[i] = x[i] + s * dx[i];
                }
                let phi_t = self.barrier(&trial, tau);
                if phi_t.is_finite() && phi_t <= phi - 0.25 * s * decrement + 1e-13 * phi.abs() {
                    break;
                }
                s *= 0.5;
                if s < 1e-14 {
                    // Rounding dominates the barrier value: accept the point as centered.
                    return true;
                }
            }
            x.copy_from_slice(&trial);
        }
        false
    }
}

fn solve_spd(mut hess: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = hess.nrows();
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        if let Some(ch) = hess.clone().cholesky() {
            return Some(-ch.solve(grad));
        }
        let bump = if reg == 0.0 { 1e-14 * scale } else { 9.0 * reg };
        for i in 0..n {
            hess[(i, i)] += bump;
        }
        reg += bump;
    }
    None
}

/// Barrier path following from the strictly feasible `x0` until the
/// duality-gap bound `m / tau` falls below `gap`.
pub(crate) fn solve(program: &Program, x0: Vec<f64>, gap: f64) -> BarrierOutcome {
    debug_assert!(program.strictly_feasible(&x0));
    let m = program.constraints.len().max(1) as f64;
    let mut x = x0;
    let mut tau = 1.0;
    let mut converged = true;
    loop {
        converged &= program.center(&mut x, tau);
        if m / tau < gap {
            break;
        }
        tau *= 10.0;
    }
    BarrierOutcome { x, converged }
}
