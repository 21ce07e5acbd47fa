//! wasm-bindgen bindings for a two-hypothesis demo page.
//!
//! Every export returns a flat `Float64Array`; the layout is given on each
//! function. The `*_rows` functions hold the logic and run natively.

use seqadv::divopt::SolverOptions;
use seqadv::equilibrium::{solve_aware_equilibrium, GameSpec};
use seqadv::error::Result;
use seqadv::prob::{DistortionMeasure, Distribution};
use seqadv::seqtest::Verdict;
use seqadv::sim::{alpha_sweep, Scenario, ScenarioConfig};
use wasm_bindgen::prelude::*;

const FLOOR: f64 = 1e-9;
const CAP: u64 = 1_000_000;

fn binary_spec(p0: f64, p1: f64, delta: f64, measure: &str) -> Result<GameSpec> {
    let measure: DistortionMeasure = measure.parse()?;
    let h = |p: f64| Distribution::new(vec![p, 1.0 - p]);
    GameSpec::new(vec![h(p0)?, h(p1)?], delta, measure, vec![1.0, 1.0], FLOOR)
}

/// `[q0*, q1*, E0, E1, payoff]`, where `qi*` is the first coordinate of the
/// worst-case output under hypothesis `i`.
pub fn equilibrium_rows(p0: f64, p1: f64, delta: f64, measure: &str) -> Result<Vec<f64>> {
    let sol = solve_aware_equilibrium(
        &binary_spec(p0, p1, delta, measure)?,
        &SolverOptions::default(),
    )?;
    Ok(vec![
        sol.q_star[0].probs()[0],
        sol.q_star[1].probs()[0],
        sol.exponents[0],
        sol.exponents[1],
        sol.payoff,
    ])
}

/// One run under the equilibrium adversary: rows of `[n, gamma_n, Z_0, Z_1]`
/// followed by a final `[T, decision, 0, 0]` row (`decision` is -1 on timeout).
pub fn trajectory_rows(
    p0: f64,
    p1: f64,
    delta: f64,
    measure: &str,
    alpha: f64,
    truth: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut config =
        ScenarioConfig::new(binary_spec(p0, p1, delta, measure)?, vec![alpha], 1, seed);
    config.cap = CAP;
    let scenario = Scenario::prepare(config)?;
    let out = scenario.trace_replication(0, truth, 0)?;
    let mut flat = Vec::new();
    for row in out.trajectory.map(|t| t.rows).unwrap_or_default() {
        flat.extend([row.n as f64, row.gamma]);
        flat.extend(&row.statistics[..2]);
    }
    let decision = match out.verdict {
        Verdict::Decided(d) => d as f64,
        Verdict::TimedOut => -1.0,
    };
    flat.extend([out.stopping_time as f64, decision, 0.0, 0.0]);
    Ok(flat)
}

/// Monte Carlo payoff against `log(1/α)`: rows of
/// `[L, payoff_0, payoff_1, E_0, E_1, error_rate_0, error_rate_1]`.
pub fn sweep_rows(
    p0: f64,
    p1: f64,
    delta: f64,
    measure: &str,
    log_inv_alphas: &[f64],
    reps: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let alphas = log_inv_alphas.iter().map(|l| (-l).exp()).collect();
    let mut config = ScenarioConfig::new(binary_spec(p0, p1, delta, measure)?, alphas, reps, seed);
    config.cap = CAP;
    let report = alpha_sweep(config)?;
    let mut flat = Vec::new();
    for pair in report.rows.chunks(2) {
        flat.push(pair[0].log_inv_alpha);
        flat.extend(pair.iter().map(|r| r.payoff_estimate));
        flat.extend(pair.iter().map(|r| r.theoretical_exponent));
        flat.extend(pair.iter().map(|r| r.error_rate));
    }
    Ok(flat)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn equilibrium(p0: f64, p1: f64, delta: f64, measure: &str) -> std::result::Result<Vec<f64>, JsError> {
    js(equilibrium_rows(p0, p1, delta, measure))
}

#[wasm_bindgen]
pub fn trajectory(p0: f64, p1: f64, delta: f64, measure: &str, alpha: f64, truth: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    js(trajectory_rows(p0, p1, delta, measure, alpha, truth, seed.into()))
}

#[wasm_bindgen]
pub fn payoff_sweep(
    p0: f64,
    p1: f64,
    delta: f64,
    measure: &str,
    log_inv_alphas: &[f64],
    reps: u32,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsError> {
    js(sweep_rows(p0, p1, delta, measure, log_inv_alphas, reps.into(), seed.into()))
}
