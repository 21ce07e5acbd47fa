//! Optimization over explicit channels `A` constrained by `d(P, P A) <= Δ`
//! for one or several input distributions `P`.
//!
//! The free variables are the first `K - 1` columns of every row; the last
//! column is implied by the row sums. Every output coordinate `(P A)_j` is
//! then affine in the variables, so divergences to channel outputs are
//! sums of `-ln(affine)` terms and the barrier solver applies directly.

use super::barrier::{self, ConvexExpr, LogTerm, Program};
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::prob::{apply_channel, kl_divergence, Channel, DistortionMeasure, Distribution};

/// Slack allowed when checking a channel against its distortion budget.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// Channels `A` with `d(P_k, P_k A) <= Δ` and `(P_k A)(x) >= floor` for every
/// listed `P_k`. With two inputs this is the common-perturbation set of a
/// non-aware adversary.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    inputs: Vec<Distribution>,
    delta: f64,
    measure: DistortionMeasure,
    floor: f64,
}

/// Result of a channel-space minimization.
#[derive(Debug, Clone)]
pub struct ChannelMin {
    pub value: f64,
    pub channel: Channel,
    pub converged: bool,
}

impl ChannelSet {
    pub fn new(inputs: Vec<Distribution>, delta: f64, measure: DistortionMeasure, floor: f64) -> Result<Self> {
        let k = inputs.first().map(Distribution::len).ok_or_else(|| Error::Shape("no input distributions".into()))?;
        if inputs.iter().any(|p| p.len() != k) {
            return Err(Error::Shape("input distributions differ in alphabet size".into()));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("distortion budget must be finite and >= 0, got {delta}")));
        }
        if inputs.iter().any(|p| !p.has_full_support(floor)) {
            return Err(Error::Infeasible("an input distribution lies below the support floor".into()));
        }
        Ok(Self { inputs, delta, measure, floor })
    }

    /// Channels feasible for a single hypothesis.
    pub fn single(p: Distribution, delta: f64, measure: DistortionMeasure, floor: f64) -> Result<Self> {
        Self::new(vec![p], delta, measure, floor)
    }

    /// The common-channel set `{A : d(P0, P0 A) <= Δ, d(P1, P1 A) <= Δ}`.
    pub fn common(p0: Distribution, p1: Distribution, delta: f64, measure: DistortionMeasure, floor: f64) -> Result<Self> {
        Self::new(vec![p0, p1], delta, measure, floor)
    }

    pub fn inputs(&self) -> &[Distribution] {
        &self.inputs
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn measure(&self) -> DistortionMeasure {
        self.measure
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn alphabet_size(&self) -> usize {
        self.inputs[0].len()
    }

    /// Largest distortion `max_k d(P_k, P_k A)`.
    pub fn distortion(&self, a: &Channel) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in &self.inputs {
            let out = apply_channel(p, a)?;
            worst = worst.max(self.measure.evaluate(p.probs(), out.probs()));
        }
        Ok(worst)
    }

    pub fn contains(&self, a: &Channel) -> bool {
        if a.size() != self.alphabet_size() {
            return false;
        }
        self.inputs.iter().all(|p| {
            let out = apply_channel(p, a).expect("sizes checked");
            out.min_prob() >= self.floor * (1.0 - 1e-9)
                && self.measure.evaluate(p.probs(), out.probs()) <= self.delta + FEASIBILITY_SLACK
        })
    }

    /// `min_A D(qhat || P_target A)` over the set.
    pub fn min_divergence(&self, qhat: &Distribution, target: usize, opts: &SolverOptions) -> Result<ChannelMin> {
        self.check_qhat(qhat)?;
        let p_target = self
            .inputs
            .get(target)
            .ok_or_else(|| Error::Shape(format!("no input distribution {target}")))?;
        let eval = |a: &Channel| -> f64 { kl_divergence(qhat, &apply_channel(p_target, a).expect("sizes checked")) };
        if self.delta == 0.0 {
            return Ok(self.at_identity(eval));
        }
        let builder = Builder::new(self, false);
        let objective = builder.kl_to_output(qhat, p_target);
        let Some((program, x0)) = builder.finish(objective) else {
            return Ok(self.at_identity(eval));
        };
        Ok(self.run(&program, x0, opts, eval))
    }

    /// `min_A max_k D(qhat || P_k A)` over the set, through the epigraph form.
    pub fn min_max_divergence(&self, qhat: &Distribution, opts: &SolverOptions) -> Result<ChannelMin> {
        self.check_qhat(qhat)?;
        let eval = |a: &Channel| -> f64 {
            self.inputs
                .iter()
                .map(|p| kl_divergence(qhat, &apply_channel(p, a).expect("sizes checked")))
                .fold(0.0, f64::max)
        };
        if self.delta == 0.0 {
            return Ok(self.at_identity(eval));
        }
        let mut builder = Builder::new(self, true);
        let t = builder.epigraph_index().expect("epigraph requested");
        for p in &self.inputs {
            let mut c = builder.kl_to_output(qhat, p);
            c.linear[t] -= 1.0;
            builder.constraints.push(c);
        }
        let mut objective = ConvexExpr::zero(builder.n);
        objective.linear[t] = 1.0;
        let Some((program, x0)) = builder.finish(objective) else {
            return Ok(self.at_identity(eval));
        };
        Ok(self.run(&program, x0, opts, eval))
    }

    fn check_qhat(&self, qhat: &Distribution) -> Result<()> {
        if qhat.len() != self.alphabet_size() {
            return Err(Error::Shape("empirical distribution and channel set differ in size".into()));
        }
        Ok(())
    }

    fn at_identity(&self, eval: impl Fn(&Channel) -> f64) -> ChannelMin {
        let channel = Channel::identity(self.alphabet_size());
        ChannelMin { value: eval(&channel), channel, converged: true }
    }

    fn run(&self, program: &Program, x0: Vec<f64>, opts: &SolverOptions, eval: impl Fn(&Channel) -> f64) -> ChannelMin {
        let out = barrier::solve(program, x0, opts.barrier_gap);
        let channel = channel_from_variables(self.alphabet_size(), &out.x);
        ChannelMin { value: eval(&channel), channel, converged: out.converged }
    }
}

/// Rebuilds the full channel from the free variables.
fn channel_from_variables(k: usize, x: &[f64]) -> Channel {
    let mut data = Vec::with_capacity(k * k);
    for l in 0..k {
        let free = &x[l * (k - 1)..(l + 1) * (k - 1)];
        data.extend_from_slice(free);
        data.push(1.0 - free.iter().sum::<f64>());
    }
    Channel::from_solver(k, data)
}

/// Assembles the barrier program: variables are the free channel entries,
/// an optional epigraph variable, then one slack block per input for the
/// L1 distortion constraint.
struct Builder<'a> {
    set: &'a ChannelSet,
    k: usize,
    n: usize,
    epigraph: Option<usize>,
    slack_base: usize,
    constraints: Vec<ConvexExpr>,
}

impl<'a> Builder<'a> {
    fn new(set: &'a ChannelSet, epigraph: bool) -> Self {
        let k = set.alphabet_size();
        let n_free = k * (k - 1);
        let epigraph_idx = epigraph.then_some(n_free);
        let slack_base = n_free + usize::from(epigraph);
        let n_slack = match set.measure {
            DistortionMeasure::TvL1 => k * set.inputs.len(),
            DistortionMeasure::Kl => 0,
        };
        let n = slack_base + n_slack;
        let mut b = Self { set, k, n, epigraph: epigraph_idx, slack_base, constraints: Vec::new() };
        b.add_structural();
        b
    }

    fn epigraph_index(&self) -> Option<usize> {
        self.epigraph
    }

    /// Coefficients and offset of the affine map `x -> (P A)_j`.
    fn output_affine(&self, p: &Distribution, j: usize) -> (Vec<f64>, f64) {
        let k = self.k;
        let mut coeffs = vec![0.0; self.n];
        if j + 1 < k {
            for l in 0..k {
                coeffs[l * (k - 1) + j] = p[l];
            }
            (coeffs, 0.0)
        } else {
            for l in 0..k {
                for jj in 0..k - 1 {
                    coeffs[l * (k - 1) + jj] = -p[l];
                }
            }
            (coeffs, 1.0)
        }
    }

    /// `D(qhat || P A)` as an expression in the variables.
    fn kl_to_output(&self, qhat: &Distribution, p: &Distribution) -> ConvexExpr {
        let mut e = ConvexExpr::zero(self.n);
        for (j, &qj) in qhat.probs().iter().enumerate() {
            if qj > 0.0 {
                e.constant += qj * qj.ln();
                let (coeffs, offset) = self.output_affine(p, j);
                e.logs.push(LogTerm { weight: qj, coeffs, offset });
            }
        }
        e
    }

    fn linear(&self, pairs: &[(usize, f64)], constant: f64) -> ConvexExpr {
        let mut e = ConvexExpr::zero(self.n);
        for &(i, c) in pairs {
            e.linear[i] += c;
        }
        e.constant = constant;
        e
    }

    fn add_structural(&mut self) {
        let k = self.k;
        // Nonnegative channel entries, including the implied last column.
        for l in 0..k {
            for j in 0..k - 1 {
                let c = self.linear(&[(l * (k - 1) + j, -1.0)], 0.0);
                self.constraints.push(c);
            }
            let row: Vec<(usize, f64)> = (0..k - 1).map(|j| (l * (k - 1) + j, 1.0)).collect();
            let c = self.linear(&row, -1.0);
            self.constraints.push(c);
        }
        for (idx, p) in self.set.inputs.iter().enumerate() {
            // Support floor on every output coordinate.
            for j in 0..k {
                let (coeffs, offset) = self.output_affine(p, j);
                let mut c = ConvexExpr::zero(self.n);
                for (ci, v) in c.linear.iter_mut().zip(&coeffs) {
                    *ci = -v;
                }
                c.constant = self.set.floor - offset;
                self.constraints.push(c);
            }
            match self.set.measure {
                DistortionMeasure::TvL1 => {
                    let base = self.slack_base + idx * k;
                    for j in 0..k {
                        let (coeffs, offset) = self.output_affine(p, j);
                        // (P A)_j - P_j <= s_j and P_j - (P A)_j <= s_j.
                        let mut up = ConvexExpr::zero(self.n);
                        up.linear.copy_from_slice(&coeffs);
                        up.linear[base + j] -= 1.0;
                        up.constant = offset - p[j];
                        let mut down = ConvexExpr::zero(self.n);
                        for (ci, v) in down.linear.iter_mut().zip(&coeffs) {
                            *ci = -v;
                        }
                        down.linear[base + j] -= 1.0;
                        down.constant = p[j] - offset;
                        self.constraints.push(up);
                        self.constraints.push(down);
                    }
                    let budget: Vec<(usize, f64)> = (0..k).map(|j| (base + j, 1.0)).collect();
                    let c = self.linear(&budget, -self.set.delta);
                    self.constraints.push(c);
                }
                DistortionMeasure::Kl => {
                    let mut c = self.kl_to_output(p, p);
                    c.constant -= self.set.delta;
                    self.constraints.push(c);
                }
            }
        }
    }

    /// Strictly feasible start: a mixture of the identity with the uniform
    /// channel, shrunk until every distortion uses at most half the budget.
    fn finish(self, objective: ConvexExpr) -> Option<(Program, Vec<f64>)> {
        let k = self.k;
        let uniform = Channel::rank_one(&Distribution::uniform(k).ok()?);
        let identity = Channel::identity(k);
        let mut eta = 0.5;
        let a0 = loop {
            let a = identity.mix(&uniform, eta);
            let ok = self.set.inputs.iter().all(|p| {
                let out = apply_channel(p, &a).expect("sizes checked");
                self.set.measure.evaluate(p.probs(), out.probs()) < 0.5 * self.set.delta
                    && out.min_prob() > self.set.floor
            });
            if ok {
                break a;
            }
            eta *= 0.5;
            if eta < 1e-14 {
                return None;
            }
        };
        let mut x0 = vec![0.0; self.n];
        for l in 0..k {
            for j in 0..k - 1 {
                x0[l * (k - 1) + j] = a0.get(l, j);
            }
        }
        if self.set.measure == DistortionMeasure::TvL1 {
            for (idx, p) in self.set.inputs.iter().enumerate() {
                let out = apply_channel(p, &a0).expect("sizes checked");
                let used = self.set.measure.evaluate(p.probs(), out.probs());
                let pad = (self.set.delta - used) / (2.0 * k as f64);
                for j in 0..k {
                    x0[self.slack_base + idx * k + j] = (out[j] - p[j]).abs() + pad;
                }
            }
        }
        if let Some(t) = self.epigraph {
            let mut highest = 0.0f64;
            for c in &self.constraints {
                if c.linear[t] != 0.0 {
                    let mut probe = x0.clone();
                    probe[t] = 0.0;
                    highest = highest.max(c.value(&probe));
                }
            }
            x0[t] = highest + 1.0;
        }
        let program = Program { n: self.n, objective, constraints: self.constraints };
        program.strictly_feasible(&x0).then_some((program, x0))
    }
}
