//! Exhaustive grid oracles. They are deliberately naive: tests compare the
//! solvers against them, so they share no code with the solvers.

use crate::error::{Error, Result};
use crate::prob::Channel;

/// Largest number of points an oracle will enumerate.
pub const MAX_GRID_POINTS: u64 = 50_000_000;

/// Best point found by an oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMin<T> {
    pub value: f64,
    pub point: T,
}

fn check_step(step: f64) -> Result<u64> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Domain(format!("grid step must lie in (0, 1], got {step}")));
    }
    Ok((1.0 / step).round() as u64)
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All points of the simplex in `K` dimensions whose coordinates are
/// multiples of `step` (with `1/step` rounded to an integer).
pub fn simplex_grid(k: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::Shape("empty alphabet".into()));
    }
    let m = check_step(step)?;
    let count = binomial(m + k as u64 - 1, k as u64 - 1);
    if count > MAX_GRID_POINTS as f64 {
        return Err(Error::Resource(format!("simplex grid would hold {count:.3e} points")));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut ticks = vec![0u64; k];
    fill(&mut out, &mut ticks, 0, m, m);
    Ok(out)
}

fn fill(out: &mut Vec<Vec<f64>>, ticks: &mut [u64], pos: usize, remaining: u64, m: u64) {
    if pos + 1 == ticks.len() {
        ticks[pos] = remaining;
        out.push(ticks.iter().map(|&t| t as f64 / m as f64).collect());
        return;
    }
    for t in 0..=remaining {
        ticks[pos] = t;
        fill(out, ticks, pos + 1, remaining - t, m);
    }
}

/// Minimum of `objective` over `points`; `None` when `points` is empty.
pub fn grid_oracle_min<T: Clone>(points: &[T], objective: impl Fn(&T) -> f64) -> Option<GridMin<T>> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in points.iter().enumerate() {
        let v = objective(p);
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, i));
        }
    }
    best.map(|(value, i)| GridMin { value, point: points[i].clone() })
}

/// Minimum of `objective` over pairs drawn from two point sets.
pub fn grid_oracle_pair_min<T: Clone>(
    left: &[T],
    right: &[T],
    objective: impl Fn(&T, &T) -> f64,
) -> Result<Option<GridMin<(T, T)>>> {
    let pairs = left.len() as u64 * right.len() as u64;
    if pairs > 20 * MAX_GRID_POINTS {
        return Err(Error::Resource(format!("{pairs} grid pairs")));
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            let v = objective(a, b);
            if best.is_none_or(|(bv, _, _)| v < bv) {
                best = Some((v, i, j));
            }
        }
    }
    Ok(best.map(|(value, i, j)| GridMin { value, point: (left[i].clone(), right[j].clone()) }))
}

/// Every binary channel `[[a, 1-a], [1-b, b]]` with `a, b` on a grid of the
/// given step.
pub fn channel_grid2(step: f64) -> Result<impl Iterator<Item = Channel>> {
    let m = check_step(step)?;
    if (m + 1) * (m + 1) > MAX_GRID_POINTS {
        return Err(Error::Resource(format!("{} binary channels", (m + 1) * (m + 1))));
    }
    Ok((0..=m).flat_map(move |i| {
        (0..=m).map(move |j| {
            let a = i as f64 / m as f64;
            let b = j as f64 / m as f64;
            Channel::new(2, vec![a, 1.0 - a, 1.0 - b, b]).expect("rows sum to one")
        })
    }))
}
