//! Projected gradient descent with Barzilai-Borwein trial steps and
//! Armijo backtracking along the projection arc.

use super::SolverOptions;

pub(crate) struct PgdOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Number of consecutive small relative decreases that ends the descent.
const PATIENCE: usize = 5;

pub(crate) fn minimize<F, G, P>(x0: &[f64], f: F, grad: G, project: P, opts: &SolverOptions) -> PgdOutcome
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = project(x0);
    let mut fx = f(&x);
    let mut g = vec![0.0; n];
    grad(&x, &mut g);
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut step = 0.1 / gmax.max(1.0);

    let mut small = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut g_new = vec![0.0; n];
    let mut trial = vec![0.0; n];

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut t = step;
        let accepted = loop {
            for i in 0..n {
                trial[i] = x[i] - t * g[i];
            }
            let xn = project(&trial);
            let mut moved = 0.0f64;
            let mut slope = 0.0;
            for i in 0..n {
                moved = moved.max((xn[i] - x[i]).abs());
                slope += g[i] * (xn[i] - x[i]);
            }
            if moved == 0.0 {
                break None;
            }
            let fn_ = f(&xn);
            if fn_ <= fx + opts.armijo * slope {
                break Some((xn, fn_));
            }
            t *= 0.5;
            if t < 1e-300 {
                break None;
            }
        };
        let Some((xn, fn_)) = accepted else {
            // No descent direction survives the projection: stationary.
            converged = true;
            break;
        };

        grad(&xn, &mut g_new);
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..n {
            let s = xn[i] - x[i];
            sy += s * (g_new[i] - g[i]);
            ss += s * s;
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (2.0 * t).min(1e12) };

        let decrease = fx - fn_;
        if decrease <= opts.tolerance * fx.abs().max(1e-3) {
            small += 1;
        } else {
            small = 0;
        }
        x = xn;
        fx = fn_;
        std::mem::swap(&mut g, &mut g_new);
        if small >= PATIENCE {
            converged = true;
            break;
        }
    }

    PgdOutcome { x, value: fx, iterations, converged }
}
