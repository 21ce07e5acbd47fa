//! Adversary-side quantities: the aware-case equilibrium, the constant
//! `B*`, and the non-aware achievable and converse bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divopt::{
    channel_from_output, min_divergence_to_ball, pairwise_min_bhattacharyya, pairwise_min_divergence, ChannelSet,
    DistortionBall, SolverOptions,
};
use crate::error::{Error, Result};
use crate::prob::{apply_channel, kl_divergence, Channel, DistortionMeasure, Distribution};

/// Smallest pairwise divergence between balls accepted by [`GameSpec::new`].
pub const MIN_SEPARATION: f64 = 1e-9;
/// Hypotheses closer than this in max-abs difference count as equal.
pub const DISTINCTNESS: f64 = 1e-9;

/// Hypotheses, distortion budget and payoff weights of an `M`-ary game.
#[derive(Debug, Clone)]
pub struct GameSpec {
    hypotheses: Vec<Distribution>,
    delta: f64,
    measure: DistortionMeasure,
    weights: Vec<f64>,
    floor: f64,
    balls: Vec<DistortionBall>,
}

impl GameSpec {
    /// Validates the game with default solver options.
    pub fn new(
        hypotheses: Vec<Distribution>,
        delta: f64,
        measure: DistortionMeasure,
        weights: Vec<f64>,
        floor: f64,
    ) -> Result<Self> {
        Self::with_options(hypotheses, delta, measure, weights, floor, &SolverOptions::default())
    }

    pub fn with_options(
        hypotheses: Vec<Distribution>,
        delta: f64,
        measure: DistortionMeasure,
        weights: Vec<f64>,
        floor: f64,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let m = hypotheses.len();
        if m < 2 {
            return Err(Error::Shape(format!("a game needs at least two hypotheses, got {m}")));
        }
        let k = hypotheses[0].len();
        if hypotheses.iter().any(|p| p.len() != k) {
            return Err(Error::Shape("hypotheses differ in alphabet size".into()));
        }
        check_weights(&weights, m)?;
        for i in 0..m {
            for j in i + 1..m {
                if hypotheses[i].max_abs_diff(&hypotheses[j]) <= DISTINCTNESS {
                    return Err(Error::DegenerateGame(format!("hypotheses {i} and {j} coincide")));
                }
            }
        }
        let balls = hypotheses
            .iter()
            .map(|p| DistortionBall::new(p.clone(), delta, measure, floor))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..m {
            for j in i + 1..m {
                let sep = pairwise_min_divergence(&balls[i], &balls[j], opts)?.value;
                if sep < MIN_SEPARATION {
                    return Err(Error::DegenerateGame(format!(
                        "perturbation sets of hypotheses {i} and {j} overlap (separation {sep:.3e})"
                    )));
                }
            }
        }
        Ok(Self { hypotheses, delta, measure, weights, floor, balls })
    }

    pub fn hypotheses(&self) -> &[Distribution] {
        &self.hypotheses
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn measure(&self) -> DistortionMeasure {
        self.measure
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn balls(&self) -> &[DistortionBall] {
        &self.balls
    }

    pub fn num_hypotheses(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn alphabet_size(&self) -> usize {
        self.hypotheses[0].len()
    }
}

fn check_weights(weights: &[f64], m: usize) -> Result<()> {
    if weights.len() != m {
        return Err(Error::Shape(format!("expected {m} weights, got {}", weights.len())));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Domain(format!("weights must be positive, got {weights:?}")));
    }
    Ok(())
}

/// Worst-case outputs of an aware adversary and the resulting exponents.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    /// `q_star[i] = P_i A_i*`.
    pub q_star: Vec<Distribution>,
    /// Entry `(i, j)` is `min_{q in B_j} D(q_star[i] || q)`; the diagonal is zero.
    pub divergence_matrix: Vec<Vec<f64>>,
    /// `E_i = min_{j != i} divergence_matrix[i][j]`.
    pub exponents: Vec<f64>,
    pub payoff: f64,
    /// Rank-one channels realizing each `q_star[i]`.
    pub witnesses: Vec<Channel>,
    pub converged: bool,
}

/// Solves every ordered pair problem, keeps for each `i` the best partner,
/// then re-solves the inner minimizations at the fixed `q_star[i]`.
pub fn solve_aware_equilibrium(spec: &GameSpec, opts: &SolverOptions) -> Result<EquilibriumSolution> {
    opts.validate()?;
    let m = spec.num_hypotheses();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let solve = |&(i, j): &(usize, usize)| pairwise_min_divergence(&spec.balls[i], &spec.balls[j], opts);
    #[cfg(feature = "parallel")]
    let solved: Vec<_> = {
        use rayon::prelude::*;
        pairs.par_iter().map(solve).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let solved: Vec<_> = pairs.iter().map(solve).collect::<Result<_>>()?;

    let mut converged = true;
    let mut q_star = Vec::with_capacity(m);
    for i in 0..m {
        let mut best: Option<&crate::divopt::PairMin> = None;
        for (pair, sol) in pairs.iter().zip(&solved) {
            converged &= sol.converged;
            if pair.0 == i && best.is_none_or(|b| sol.value < b.value) {
                best = Some(sol);
            }
        }
        q_star.push(best.expect("m >= 2").q_i.clone());
    }

    let mut divergence_matrix = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let r = min_divergence_to_ball(&q_star[i], &spec.balls[j], opts)?;
                converged &= r.converged;
                divergence_matrix[i][j] = r.value;
            }
        }
    }
    let exponents: Vec<f64> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i).map(|j| divergence_matrix[i][j]).fold(f64::INFINITY, f64::min))
        .collect();
    let payoff = exponents.iter().zip(&spec.weights).map(|(e, w)| e * w).sum();
    let witnesses = spec.hypotheses.iter().zip(&q_star).map(|(p, q)| channel_from_output(p, q)).collect();
    Ok(EquilibriumSolution { q_star, divergence_matrix, exponents, payoff, witnesses, converged })
}

/// `sum_i weights[i] * E_i`.
pub fn equilibrium_payoff(solution: &EquilibriumSolution, weights: &[f64]) -> Result<f64> {
    check_weights(weights, solution.exponents.len())?;
    Ok(solution.exponents.iter().zip(weights).map(|(e, w)| e * w).sum())
}

/// `B* = min_{i != j} min_{q_i in B_i, q_j in B_j} B(q_i, q_j)`.
pub fn compute_b_star(spec: &GameSpec, opts: &SolverOptions) -> Result<f64> {
    let m = spec.num_hypotheses();
    let mut best = f64::INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            best = best.min(pairwise_min_bhattacharyya(&spec.balls[i], &spec.balls[j], opts)?.value);
        }
    }
    Ok(best)
}

/// Achievable and converse exponents of the non-aware test at one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonAwareBounds {
    pub achievable: f64,
    pub converse: f64,
}

impl NonAwareBounds {
    pub fn evaluate(set: &ChannelSet, a_tilde: &Channel, lambda: f64, opts: &SolverOptions) -> Result<Self> {
        let (p0, p1) = pair(set)?;
        Ok(Self {
            achievable: achievable_in(set, a_tilde, lambda, opts)?,
            converse: nonaware_converse(p0, p1, a_tilde, lambda)?,
        })
    }
}

fn pair(set: &ChannelSet) -> Result<(&Distribution, &Distribution)> {
    match set.inputs() {
        [p0, p1] => Ok((p0, p1)),
        other => Err(Error::Shape(format!("non-aware bounds need two hypotheses, got {}", other.len()))),
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("weight must be positive, got {lambda}")));
    }
    Ok(())
}

fn achievable_in(set: &ChannelSet, a_tilde: &Channel, lambda: f64, opts: &SolverOptions) -> Result<f64> {
    check_lambda(lambda)?;
    if !set.contains(a_tilde) {
        return Err(Error::Infeasible("channel violates the common distortion budget".into()));
    }
    Ok(achievable_unchecked(set, a_tilde, lambda, opts)?.0)
}

/// Returns the achievable value and whether both inner solves converged.
fn achievable_unchecked(set: &ChannelSet, a_tilde: &Channel, lambda: f64, opts: &SolverOptions) -> Result<(f64, bool)> {
    let (p0, p1) = pair(set)?;
    let inner0 = set.min_max_divergence(&apply_channel(p0, a_tilde)?, opts)?;
    let inner1 = set.min_max_divergence(&apply_channel(p1, a_tilde)?, opts)?;
    Ok((inner0.value + lambda * inner1.value, inner0.converged && inner1.converged))
}

/// `min_A max{D(P0 Ã || P1 A), D(P0 Ã || P0 A)} + λ min_A max{D(P1 Ã || P0 A), D(P1 Ã || P1 A)}`
/// with `A` ranging over the common-channel set.
#[allow(clippy::too_many_arguments)]
pub fn nonaware_achievable(
    p0: &Distribution,
    p1: &Distribution,
    a_tilde: &Channel,
    delta: f64,
    measure: DistortionMeasure,
    lambda: f64,
    floor: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let set = ChannelSet::common(p0.clone(), p1.clone(), delta, measure, floor)?;
    achievable_in(&set, a_tilde, lambda, opts)
}

/// `D(P0 Ã || P1 Ã) + λ D(P1 Ã || P0 Ã)`.
pub fn nonaware_converse(p0: &Distribution, p1: &Distribution, a_tilde: &Channel, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let q0 = apply_channel(p0, a_tilde)?;
    let q1 = apply_channel(p1, a_tilde)?;
    Ok(kl_divergence(&q0, &q1) + lambda * kl_divergence(&q1, &q0))
}

/// Best common channel found by [`solve_nonaware_adversary`].
#[derive(Debug, Clone)]
pub struct NonAwareAdversary {
    pub channel: Channel,
    pub achievable: f64,
    /// Always true: the search is local and carries no optimality certificate.
    pub heuristic: bool,
    pub starts: usize,
}

/// Number of starting channels of the multistart search.
pub const MULTISTARTS: usize = 32;
const SEARCH_SEED: u64 = 0x5eed_a11e;
const STEP_START: f64 = 0.05;
const STEP_END: f64 = 1e-6;

/// Multistart pattern search for the common channel minimizing the
/// achievable exponent. Starts are the identity, shifts toward each output
/// symbol and random channels, each pulled as far as the budget allows.
pub fn solve_nonaware_adversary(
    p0: &Distribution,
    p1: &Distribution,
    delta: f64,
    measure: DistortionMeasure,
    lambda: f64,
    floor: f64,
    opts: &SolverOptions,
) -> Result<NonAwareAdversary> {
    opts.validate()?;
    check_lambda(lambda)?;
    let set = ChannelSet::common(p0.clone(), p1.clone(), delta, measure, floor)?;
    let k = set.alphabet_size();
    let identity = Channel::identity(k);
    let at_identity = achievable_unchecked(&set, &identity, lambda, opts)?.0;
    if delta == 0.0 {
        return Ok(NonAwareAdversary { channel: identity, achievable: at_identity, heuristic: true, starts: 1 });
    }

    let mut starts = vec![identity.clone()];
    for s in 0..k {
        let mut e = vec![0.0; k];
        e[s] = 1.0;
        let target = Channel::rank_one(&Distribution::new(e)?);
        starts.push(furthest_feasible(&set, &identity, &target));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEARCH_SEED);
    while starts.len() < MULTISTARTS {
        let rows: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
                let total: f64 = w.iter().sum();
                w.into_iter().map(|v| v / total).collect()
            })
            .collect();
        let target = Channel::from_rows(&rows)?;
        starts.push(furthest_feasible(&set, &identity, &target));
    }

    let objective = |x: &[f64]| -> f64 {
        match channel_from_free(k, x) {
            Some(a) if set.contains(&a) => achievable_unchecked(&set, &a, lambda, opts).map_or(f64::INFINITY, |v| v.0),
            _ => f64::INFINITY,
        }
    };
    let mut best = (at_identity, identity);
    for start in &starts {
        let x0 = free_entries(start);
        let (x, value) = pattern_search(&x0, &objective);
        if value < best.0 {
            best = (value, channel_from_free(k, &x).expect("search keeps valid channels"));
        }
    }
    Ok(NonAwareAdversary { channel: best.1, achievable: best.0, heuristic: true, starts: starts.len() })
}

/// `(1 - η) from + η to` with the largest feasible `η` on a dyadic grid.
fn furthest_feasible(set: &ChannelSet, from: &Channel, to: &Channel) -> Channel {
    if set.contains(to) {
        return to.clone();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if set.contains(&from.mix(to, mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    from.mix(to, lo)
}

fn free_entries(a: &Channel) -> Vec<f64> {
    let k = a.size();
    (0..k).flat_map(|l| a.row(l)[..k - 1].to_vec()).collect()
}

fn channel_from_free(k: usize, x: &[f64]) -> Option<Channel> {
    let mut data = Vec::with_capacity(k * k);
    for l in 0..k {
        let free = &x[l * (k - 1)..(l + 1) * (k - 1)];
        if free.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return None;
        }
        let last = 1.0 - free.iter().sum::<f64>();
        if last < 0.0 {
            return None;
        }
        data.extend_from_slice(free);
        data.push(last);
    }
    Channel::new(k, data).ok()
}

/// Compass search over coordinate and pairwise-diagonal directions,
/// halving the step whenever no direction improves.
fn pattern_search(x0: &[f64], f: &impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut dirs: Vec<Vec<(usize, f64)>> = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            dirs.push(vec![(i, s)]);
        }
        for j in i + 1..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                dirs.push(vec![(i, si), (j, sj)]);
            }
        }
    }
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut h = STEP_START;
    let mut trial = x.clone();
    while h >= STEP_END {
        let mut improved = false;
        for d in &dirs {
            trial.copy_from_slice(&x);
            for &(i, s) in d {
                trial[i] += s * h;
            }
            let ft = f(&trial);
            if ft < fx {
                x.copy_from_slice(&trial);
                fx = ft;
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx)
}
