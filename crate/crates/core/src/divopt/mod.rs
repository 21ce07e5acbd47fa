//! Convex minimization of KL divergences over distortion balls.
//!
//! Every hypothesis distribution has full support, so the outputs `P A` of
//! the channels allowed under a hypothesis sweep exactly the ball
//! `B = {q : d(P, q) <= Δ}`. The aware-case problems are therefore solved
//! over output distributions in `K` variables. The non-aware problems
//! couple two hypotheses through one channel and stay in channel space
//! (see [`channel`]).

mod barrier;
pub mod channel;
pub mod grid;
mod pgd;
pub mod project;

use crate::error::{Error, Result};
use crate::prob::{bhattacharyya_slices, kl_slices, Channel, DistortionMeasure, Distribution};

pub use channel::{ChannelMin, ChannelSet, FEASIBILITY_SLACK};

/// Tolerance used when testing ball membership.
pub const CONTAINS_TOLERANCE: f64 = 1e-12;

/// Solver knobs shared by the projected-gradient and barrier routines.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative objective decrease below which an iteration counts as stalled.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant of the Armijo backtracking rule.
    pub armijo: f64,
    /// Solve two-symbol problems on the interval they reduce to.
    pub exact_two_symbol: bool,
    /// Target duality-gap bound for the barrier method.
    pub barrier_gap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 10_000, armijo: 1e-4, exact_two_symbol: true, barrier_gap: 1e-10 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || !(self.barrier_gap > 0.0) {
            return Err(Error::Domain("solver tolerance and gap must be > 0 and max_iterations >= 1".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::Domain("Armijo constant must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Same options with the two-symbol shortcut disabled.
    pub fn general(&self) -> Self {
        Self { exact_two_symbol: false, ..self.clone() }
    }
}

/// `{q on the simplex : d(center, q) <= radius, q >= floor}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionBall {
    center: Distribution,
    radius: f64,
    measure: DistortionMeasure,
    floor: f64,
    /// Range of the first coordinate when `K = 2`.
    interval: Option<(f64, f64)>,
}

impl DistortionBall {
    /// Fails with `Infeasible` when the center lies below the support floor.
    pub fn new(center: Distribution, radius: f64, measure: DistortionMeasure, floor: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("radius must be finite and >= 0, got {radius}")));
        }
        if !(floor >= 0.0) || floor * center.len() as f64 >= 1.0 {
            return Err(Error::Domain(format!("support floor {floor} is not usable")));
        }
        if !center.has_full_support(floor) {
            return Err(Error::Infeasible(format!("ball center {center} lies below the support floor {floor}")));
        }
        let interval = (center.len() == 2).then(|| two_symbol_interval(center[0], radius, measure, floor));
        Ok(Self { center, radius, measure, floor, interval })
    }

    pub fn center(&self) -> &Distribution {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn measure(&self) -> DistortionMeasure {
        self.measure
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// For two symbols, the closed range of `q[0]` over the ball.
    pub fn interval(&self) -> Option<(f64, f64)> {
        self.interval
    }

    pub fn distortion(&self, q: &[f64]) -> f64 {
        self.measure.evaluate(self.center.probs(), q)
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.len() == self.dim()
            && q.iter().all(|&v| v >= self.floor)
            && self.distortion(q) <= self.radius + CONTAINS_TOLERANCE
    }

    /// Euclidean projection onto the ball.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        project::project_to_ball(y, self.center.probs(), self.radius, self.measure, self.floor)
    }
}

fn two_symbol_interval(c: f64, radius: f64, measure: DistortionMeasure, floor: f64) -> (f64, f64) {
    let (lo_lim, hi_lim) = (floor, 1.0 - floor);
    match measure {
        DistortionMeasure::TvL1 => ((c - radius / 2.0).max(lo_lim), (c + radius / 2.0).min(hi_lim)),
        DistortionMeasure::Kl => {
            let excess = |x: f64| kl_slices(&[c, 1.0 - c], &[x, 1.0 - x]) - radius;
            // `excess` decreases on [lo_lim, c] and increases on [c, hi_lim].
            let edge = |inside: f64, outside: f64| -> f64 {
                if excess(outside) <= 0.0 {
                    return outside;
                }
                let (mut a, mut b) = (inside, outside);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if mid == a || mid == b {
                        break;
                    }
                    if excess(mid) <= 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                a
            };
            (edge(c, lo_lim), edge(c, hi_lim))
        }
    }
}

/// Builds the rank-one channel whose every row is `q`, so that
/// `apply_channel(p, channel_from_output(p, q)) == q`.
pub fn channel_from_output(p: &Distribution, q: &Distribution) -> Channel {
    debug_assert_eq!(p.len(), q.len());
    Channel::rank_one(q)
}

/// Minimizer of a divergence over one ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallMin {
    pub value: f64,
    pub argmin: Distribution,
    pub converged: bool,
    pub iterations: usize,
}

/// Joint minimizer over a pair of balls.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMin {
    pub value: f64,
    pub q_i: Distribution,
    pub q_j: Distribution,
    pub converged: bool,
    pub iterations: usize,
}

fn exact(value: f64, argmin: Vec<f64>) -> BallMin {
    BallMin { value, argmin: Distribution::from_solver(argmin), converged: true, iterations: 0 }
}

/// `min_{q in ball} D(qhat || q)` with its minimizer.
pub fn min_divergence_to_ball(qhat: &Distribution, ball: &DistortionBall, opts: &SolverOptions) -> Result<BallMin> {
    if qhat.len() != ball.dim() {
        return Err(Error::Shape(format!("distribution has {} symbols, ball has {}", qhat.len(), ball.dim())));
    }
    if ball.contains(qhat.probs()) {
        return Ok(exact(0.0, qhat.probs().to_vec()));
    }
    if ball.radius == 0.0 {
        return Ok(exact(kl_slices(qhat.probs(), ball.center.probs()), ball.center.probs().to_vec()));
    }
    if let (true, Some((lo, hi))) = (opts.exact_two_symbol, ball.interval) {
        // D(qhat || (x, 1-x)) is convex in x with its minimum at qhat[0].
        let x = qhat[0].clamp(lo, hi);
        let q = vec![x, 1.0 - x];
        return Ok(exact(kl_slices(qhat.probs(), &q), q));
    }
    let p = qhat.probs();
    let out = pgd::minimize(
        ball.center.probs(),
        |q| kl_slices(p, q),
        |q, g| {
            for ((gi, &pi), &qi) in g.iter_mut().zip(p).zip(q) {
                *gi = -pi / qi;
            }
        },
        |y| ball.project(y),
        opts,
    );
    Ok(BallMin {
        value: out.value,
        argmin: Distribution::from_solver(out.x),
        converged: out.converged,
        iterations: out.iterations,
    })
}

fn check_pair(a: &DistortionBall, b: &DistortionBall) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape("balls live on different alphabets".into()));
    }
    Ok(())
}

/// Which joint objective a pair problem minimizes.
#[derive(Clone, Copy)]
enum PairObjective {
    /// `D(q_i || q_j)`.
    Kl,
    /// Bhattacharyya distance `B(q_i, q_j)`.
    Bhattacharyya,
}

impl PairObjective {
    fn eval(self, qi: &[f64], qj: &[f64]) -> f64 {
        match self {
            PairObjective::Kl => kl_slices(qi, qj),
            PairObjective::Bhattacharyya => bhattacharyya_slices(qi, qj),
        }
    }
}

fn pair_min(ball_i: &DistortionBall, ball_j: &DistortionBall, objective: PairObjective, opts: &SolverOptions) -> Result<PairMin> {
    check_pair(ball_i, ball_j)?;
    let k = ball_i.dim();
    let done = |qi: Vec<f64>, qj: Vec<f64>| {
        let value = objective.eval(&qi, &qj);
        PairMin { value, q_i: Distribution::from_solver(qi), q_j: Distribution::from_solver(qj), converged: true, iterations: 0 }
    };
    if ball_j.contains(ball_i.center.probs()) {
        let c = ball_i.center.probs().to_vec();
        return Ok(done(c.clone(), c));
    }
    if ball_i.radius == 0.0 && ball_j.radius == 0.0 {
        return Ok(done(ball_i.center.probs().to_vec(), ball_j.center.probs().to_vec()));
    }
    if let (true, Some((lo_i, hi_i)), Some((lo_j, hi_j))) = (opts.exact_two_symbol, ball_i.interval, ball_j.interval) {
        // Both objectives grow as the two Bernoulli parameters separate.
        let (x, y) = if hi_i < lo_j {
            (hi_i, lo_j)
        } else if hi_j < lo_i {
            (lo_i, hi_j)
        } else {
            let x = ball_i.center[0].clamp(lo_i.max(lo_j), hi_i.min(hi_j));
            (x, x)
        };
        return Ok(done(vec![x, 1.0 - x], vec![y, 1.0 - y]));
    }

    let x0: Vec<f64> = ball_i.center.probs().iter().chain(ball_j.center.probs()).copied().collect();
    let out = pgd::minimize(
        &x0,
        |x| objective.eval(&x[..k], &x[k..]),
        |x, g| {
            let (qi, qj) = x.split_at(k);
            match objective {
                PairObjective::Kl => {
                    for m in 0..k {
                        g[m] = (qi[m] / qj[m]).ln() + 1.0;
                        g[k + m] = -qi[m] / qj[m];
                    }
                }
                PairObjective::Bhattacharyya => {
                    let bc: f64 = qi.iter().zip(qj).map(|(a, b)| (a * b).sqrt()).sum();
                    for m in 0..k {
                        g[m] = -0.5 * (qj[m] / qi[m]).sqrt() / bc;
                        g[k + m] = -0.5 * (qi[m] / qj[m]).sqrt() / bc;
                    }
                }
            }
        },
        |y| {
            let mut z = ball_i.project(&y[..k]);
            z.extend(ball_j.project(&y[k..]));
            z
        },
        opts,
    );
    let (qi, qj) = out.x.split_at(k);
    Ok(PairMin {
        value: out.value,
        q_i: Distribution::from_solver(qi.to_vec()),
        q_j: Distribution::from_solver(qj.to_vec()),
        converged: out.converged,
        iterations: out.iterations,
    })
}

/// `min_{q_i in B_i, q_j in B_j} D(q_i || q_j)`, jointly convex. Ties are
/// resolved by starting the descent at the ball centers.
pub fn pairwise_min_divergence(ball_i: &DistortionBall, ball_j: &DistortionBall, opts: &SolverOptions) -> Result<PairMin> {
    pair_min(ball_i, ball_j, PairObjective::Kl, opts)
}

/// `min_{q_i in B_i, q_j in B_j} B(q_i, q_j)` for the Bhattacharyya distance.
pub fn pairwise_min_bhattacharyya(ball_i: &DistortionBall, ball_j: &DistortionBall, opts: &SolverOptions) -> Result<PairMin> {
    pair_min(ball_i, ball_j, PairObjective::Bhattacharyya, opts)
}

/// `min_P [D(P || q0) + D(P || q1)]` over the floored simplex.
pub fn min_sum_divergence(q0: &Distribution, q1: &Distribution, floor: f64, opts: &SolverOptions) -> Result<BallMin> {
    if q0.len() != q1.len() {
        return Err(Error::Shape("distributions differ in alphabet size".into()));
    }
    let k = q0.len();
    let (a, b) = (q0.probs(), q1.probs());
    let start = Distribution::uniform(k)?;
    let out = pgd::minimize(
        start.probs(),
        |p| kl_slices(p, a) + kl_slices(p, b),
        |p, g| {
            for m in 0..k {
                g[m] = (p[m] / a[m]).ln() + (p[m] / b[m]).ln() + 2.0;
            }
        },
        |y| project::project_to_simplex(y, floor),
        opts,
    );
    Ok(BallMin { value: out.value, argmin: Distribution::from_solver(out.x), converged: out.converged, iterations: out.iterations })
}

/// `min_A max{D(qhat || P0 A), D(qhat || P1 A)}` over channels with
/// `d(P0, P0 A) <= Δ` and `d(P1, P1 A) <= Δ`.
pub fn min_max_divergence_over_channel(
    qhat: &Distribution,
    p0: &Distribution,
    p1: &Distribution,
    delta: f64,
    measure: DistortionMeasure,
    opts: &SolverOptions,
) -> Result<ChannelMin> {
    ChannelSet::common(p0.clone(), p1.clone(), delta, measure, crate::prob::DEFAULT_SUPPORT_FLOOR)?.min_max_divergence(qhat, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{apply_channel, binary_kl, kl_divergence};

    fn dist(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    fn tv_ball(c: &[f64], r: f64) -> DistortionBall {
        DistortionBall::new(dist(c), r, DistortionMeasure::TvL1, 1e-9).unwrap()
    }

    #[test]
    fn ball_rejects_center_below_floor() {
        let r = DistortionBall::new(dist(&[1.0, 0.0]), 0.1, DistortionMeasure::TvL1, 1e-9);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn two_symbol_intervals() {
        assert_eq!(tv_ball(&[0.5, 0.5], 0.05).interval(), Some((0.475, 0.525)));
        let kl = DistortionBall::new(dist(&[0.9, 0.1]), 0.001, DistortionMeasure::Kl, 1e-9).unwrap();
        let (lo, hi) = kl.interval().unwrap();
        for x in [lo, hi] {
            assert!((kl_slices(&[0.9, 0.1], &[x, 1.0 - x]) - 0.001).abs() < 1e-15);
        }
        assert!(lo < 0.9 && hi > 0.9);
    }

    #[test]
    fn channel_from_output_maps_any_input_to_q() {
        let p = dist(&[0.38, 0.62]);
        let q = dist(&[0.405, 0.595]);
        let a = channel_from_output(&p, &q);
        assert_eq!(a.row(0), q.probs());
        assert_eq!(a.row(1), q.probs());
        assert_eq!(apply_channel(&p, &a).unwrap(), q);
        assert_eq!(apply_channel(&p, &channel_from_output(&p, &p)).unwrap(), p);
    }

    #[test]
    fn min_divergence_examples() {
        let opts = SolverOptions::default();
        let ball = tv_ball(&[0.5, 0.5], 0.05);
        let inside = dist(&[0.49, 0.51]);
        let r = min_divergence_to_ball(&inside, &ball, &opts).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmin, inside);

        let qhat = dist(&[0.405, 0.595]);
        for o in [opts.clone(), opts.general()] {
            let r = min_divergence_to_ball(&qhat, &ball, &o).unwrap();
            assert!((r.argmin[0] - 0.475).abs() < 1e-6, "{}", r.argmin);
            assert!((r.value - binary_kl(0.405, 0.475).unwrap()).abs() < 1e-9);
        }

        let singleton = tv_ball(&[0.5, 0.5], 0.0);
        let r = min_divergence_to_ball(&qhat, &singleton, &opts).unwrap();
        assert_eq!(r.value, kl_divergence(&qhat, &dist(&[0.5, 0.5])));
    }

    #[test]
    fn pairwise_examples() {
        let opts = SolverOptions::default();
        let b0 = tv_ball(&[0.38, 0.62], 0.05);
        let b1 = tv_ball(&[0.5, 0.5], 0.05);
        for o in [opts.clone(), opts.general()] {
            let r = pairwise_min_divergence(&b0, &b1, &o).unwrap();
            assert!((r.q_i[0] - 0.405).abs() < 1e-5, "{}", r.q_i);
            assert!((r.q_j[0] - 0.475).abs() < 1e-5, "{}", r.q_j);
            assert!((r.value - binary_kl(0.405, 0.475).unwrap()).abs() < 1e-9);
        }
        let same = pairwise_min_divergence(&b0, &tv_ball(&[0.38, 0.62], 0.02), &opts).unwrap();
        assert_eq!(same.value, 0.0);
        assert_eq!(same.q_i, same.q_j);
        let points = pairwise_min_divergence(&tv_ball(&[0.38, 0.62], 0.0), &tv_ball(&[0.5, 0.5], 0.0), &opts).unwrap();
        assert_eq!(points.value, binary_kl(0.38, 0.5).unwrap());
    }

    #[test]
    fn general_solver_matches_interval_solver_for_kl_balls() {
        let opts = SolverOptions::default();
        let b1 = DistortionBall::new(Distribution::normalize(&[0.9061, 0.09395]).unwrap(), 0.001, DistortionMeasure::Kl, 1e-9).unwrap();
        let b4 = DistortionBall::new(dist(&[0.8481, 0.1519]), 0.001, DistortionMeasure::Kl, 1e-9).unwrap();
        let fast = pairwise_min_divergence(&b1, &b4, &opts).unwrap();
        let slow = pairwise_min_divergence(&b1, &b4, &opts.general()).unwrap();
        assert!((fast.value - slow.value).abs() < 1e-9, "{} vs {}", fast.value, slow.value);
        let bf = pairwise_min_bhattacharyya(&b1, &b4, &opts).unwrap();
        let bs = pairwise_min_bhattacharyya(&b1, &b4, &opts.general()).unwrap();
        assert!((bf.value - bs.value).abs() < 1e-9);
    }

    #[test]
    fn sum_divergence_minimum_is_twice_bhattacharyya() {
        let q0 = dist(&[0.5, 0.5]);
        let q1 = dist(&[0.405, 0.595]);
        let m = min_sum_divergence(&q0, &q1, 1e-12, &SolverOptions::default()).unwrap();
        let b = crate::prob::bhattacharyya(&q0, &q1).unwrap();
        assert!((m.value - 2.0 * b).abs() < 1e-10);
    }
}
