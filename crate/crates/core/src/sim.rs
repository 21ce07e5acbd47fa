//! Monte Carlo harness: perturbed sample streams, replicated sequential
//! tests and per-α summaries.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divopt::{min_divergence_to_ball, ChannelSet, SolverOptions, FEASIBILITY_SLACK};
use crate::equilibrium::{solve_aware_equilibrium, solve_nonaware_adversary, GameSpec};
use crate::error::{Error, Result};
use crate::prob::{apply_channel, Channel, Distribution};
use crate::seqtest::{
    compute_constant_c, fmt_real, run_aware, run_nonaware, RunOptions, TestOutcome, ThresholdSchedule, Verdict,
    CONSTANT_TOLERANCE, DEFAULT_CAP, DEFAULT_ZETA,
};

/// Draws `X ~ P`, then `Y` from row `X` of a channel.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    input: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

impl ChannelSampler {
    pub fn new(p: &Distribution, a: &Channel) -> Result<Self> {
        if p.len() != a.size() {
            return Err(Error::Shape(format!("distribution has {} symbols, channel is {}x{1}", p.len(), a.size())));
        }
        let weighted = |w: &[f64]| WeightedIndex::new(w.iter().copied()).map_err(|e| Error::Construction(e.to_string()));
        let input = weighted(p.probs())?;
        let rows = (0..a.size()).map(|l| weighted(a.row(l))).collect::<Result<_>>()?;
        Ok(Self { input, rows })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x = self.input.sample(rng);
        self.rows[x].sample(rng)
    }
}

/// One perturbed sample `Y`; see [`ChannelSampler`] for repeated draws.
pub fn sample_through_channel<R: Rng + ?Sized>(p: &Distribution, a: &Channel, rng: &mut R) -> Result<usize> {
    Ok(ChannelSampler::new(p, a)?.sample(rng))
}

/// Random stream for one replication, keyed by its coordinates so that
/// results do not depend on execution order.
pub fn substream(seed: u64, alpha_index: u64, hypothesis: u64, replication: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, v) in key.chunks_exact_mut(8).zip([seed, alpha_index, hypothesis, replication]) {
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// How the adversary perturbs the samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Adversary {
    /// Rank-one channels onto the aware equilibrium outputs.
    Equilibrium,
    /// One channel per hypothesis.
    PerHypothesis(Vec<Channel>),
    /// One channel applied under every hypothesis.
    Common(Channel),
    /// The common channel found by the non-aware adversary search.
    NonAwareOptimal,
}

/// Which sequential test the decision maker runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Aware,
    NonAware,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub spec: GameSpec,
    /// Hypotheses simulated as the truth, each with its own rows in the report.
    pub true_hypotheses: Vec<usize>,
    pub adversary: Adversary,
    pub test: TestKind,
    pub alpha_grid: Vec<f64>,
    pub replications: u64,
    pub seed: u64,
    pub cap: u64,
    pub stride: u64,
    pub zeta: f64,
    pub solver: SolverOptions,
}

impl ScenarioConfig {
    /// Aware test against the equilibrium adversary under every hypothesis.
    pub fn new(spec: GameSpec, alpha_grid: Vec<f64>, replications: u64, seed: u64) -> Self {
        let m = spec.num_hypotheses();
        Self {
            spec,
            true_hypotheses: (0..m).collect(),
            adversary: Adversary::Equilibrium,
            test: TestKind::Aware,
            alpha_grid,
            replications,
            seed,
            cap: DEFAULT_CAP,
            stride: 1,
            zeta: DEFAULT_ZETA,
            solver: SolverOptions::default(),
        }
    }
}

/// A validated scenario with its adversary channels and limiting exponents
/// resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    channels: Vec<Channel>,
    samplers: Vec<ChannelSampler>,
    exponents: Vec<f64>,
    schedules: Vec<ThresholdSchedule>,
    common: Option<ChannelSet>,
}

impl Scenario {
    pub fn prepare(config: ScenarioConfig) -> Result<Self> {
        let spec = &config.spec;
        let m = spec.num_hypotheses();
        let k = spec.alphabet_size();
        if config.replications == 0 || config.cap == 0 || config.stride == 0 {
            return Err(Error::Domain("replications, cap and stride must be >= 1".into()));
        }
        if config.alpha_grid.is_empty() {
            return Err(Error::Domain("alpha grid is empty".into()));
        }
        if config.true_hypotheses.is_empty() || config.true_hypotheses.iter().any(|&h| h >= m) {
            return Err(Error::Domain(format!("true hypotheses must be a nonempty subset of 0..{m}")));
        }
        config.solver.validate()?;
        let binary = || -> Result<ChannelSet> {
            if m != 2 {
                return Err(Error::Shape(format!("a common-channel adversary needs two hypotheses, got {m}")));
            }
            let h = spec.hypotheses();
            ChannelSet::common(h[0].clone(), h[1].clone(), spec.delta(), spec.measure(), spec.floor())
        };

        let common = match (&config.adversary, config.test) {
            (Adversary::Common(_) | Adversary::NonAwareOptimal, _) | (_, TestKind::NonAware) => Some(binary()?),
            _ => None,
        };
        let channels: Vec<Channel> = match &config.adversary {
            Adversary::Equilibrium => {
                if config.test == TestKind::NonAware {
                    return Err(Error::Domain("the non-aware test needs a common-channel adversary".into()));
                }
                solve_aware_equilibrium(spec, &config.solver)?.witnesses
            }
            Adversary::PerHypothesis(chs) => {
                if config.test == TestKind::NonAware {
                    return Err(Error::Domain("the non-aware test needs a common-channel adversary".into()));
                }
                if chs.len() != m {
                    return Err(Error::Shape(format!("expected {m} adversary channels, got {}", chs.len())));
                }
                for (i, (a, p)) in chs.iter().zip(spec.hypotheses()).enumerate() {
                    if a.size() != k {
                        return Err(Error::Shape(format!("adversary channel {i} has the wrong size")));
                    }
                    let out = apply_channel(p, a)?;
                    if spec.measure().evaluate(p.probs(), out.probs()) > spec.delta() + FEASIBILITY_SLACK {
                        return Err(Error::Infeasible(format!("adversary channel {i} exceeds the distortion budget")));
                    }
                }
                chs.clone()
            }
            Adversary::Common(a) => {
                if !common.as_ref().expect("binary set built").contains(a) {
                    return Err(Error::Infeasible("common adversary channel exceeds the distortion budget".into()));
                }
                vec![a.clone(); m]
            }
            Adversary::NonAwareOptimal => {
                let h = spec.hypotheses();
                let lambda = spec.weights()[1] / spec.weights()[0];
                let best = solve_nonaware_adversary(&h[0], &h[1], spec.delta(), spec.measure(), lambda, spec.floor(), &config.solver)?;
                vec![best.channel; m]
            }
        };

        let outputs = spec.hypotheses().iter().zip(&channels).map(|(p, a)| apply_channel(p, a)).collect::<Result<Vec<_>>>()?;
        let exponents = match config.test {
            TestKind::Aware => {
                let mut e = Vec::with_capacity(m);
                for (i, q) in outputs.iter().enumerate() {
                    let mut best = f64::INFINITY;
                    for (j, ball) in spec.balls().iter().enumerate() {
                        if j != i {
                            best = best.min(min_divergence_to_ball(q, ball, &config.solver)?.value);
                        }
                    }
                    e.push(best);
                }
                e
            }
            TestKind::NonAware => {
                let set = common.as_ref().expect("binary set built");
                outputs.iter().map(|q| set.min_max_divergence(q, &config.solver).map(|r| r.value)).collect::<Result<_>>()?
            }
        };
        let samplers =
            spec.hypotheses().iter().zip(&channels).map(|(p, a)| ChannelSampler::new(p, a)).collect::<Result<_>>()?;
        let c = compute_constant_c(config.zeta, CONSTANT_TOLERANCE)?;
        let schedules = config
            .alpha_grid
            .iter()
            .map(|&a| ThresholdSchedule::with_constant(a, config.zeta, c, k, m))
            .collect::<Result<_>>()?;
        Ok(Self { config, channels, samplers, exponents, schedules, common })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Adversary channel applied under each hypothesis.
    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Limiting value of `log(1/α) / E_i[T]` under each hypothesis.
    pub fn theoretical_exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn schedule(&self, alpha_index: usize) -> &ThresholdSchedule {
        &self.schedules[alpha_index]
    }

    fn run_options(&self, record_trajectory: bool) -> RunOptions {
        RunOptions { cap: self.config.cap, stride: self.config.stride, record_trajectory, solver: self.config.solver.clone() }
    }

    /// One sequential run, fully determined by its coordinates and the seed.
    pub fn run_replication(&self, alpha_index: usize, hypothesis: usize, replication: u64) -> Result<TestOutcome> {
        self.run_with(alpha_index, hypothesis, replication, false)
    }

    /// Like [`Scenario::run_replication`] with the statistics logged at every evaluation.
    pub fn trace_replication(&self, alpha_index: usize, hypothesis: usize, replication: u64) -> Result<TestOutcome> {
        self.run_with(alpha_index, hypothesis, replication, true)
    }

    fn run_with(&self, alpha_index: usize, hypothesis: usize, replication: u64, record: bool) -> Result<TestOutcome> {
        let schedule = self
            .schedules
            .get(alpha_index)
            .ok_or_else(|| Error::Domain(format!("alpha index {alpha_index} outside the grid")))?;
        let sampler = self
            .samplers
            .get(hypothesis)
            .ok_or_else(|| Error::Domain(format!("hypothesis {hypothesis} does not exist")))?;
        let mut rng = substream(self.config.seed, alpha_index as u64, hypothesis as u64, replication);
        let stream = std::iter::repeat_with(move || sampler.sample(&mut rng));
        let opts = self.run_options(record);
        match self.config.test {
            TestKind::Aware => run_aware(stream, &self.config.spec, schedule, &opts),
            TestKind::NonAware => run_nonaware(stream, self.common.as_ref().expect("binary set built"), schedule, &opts),
        }
    }

    fn replicate(&self, alpha_index: usize, hypothesis: usize) -> Result<Vec<TestOutcome>> {
        let reps = 0..self.config.replications;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            reps.into_par_iter().map(|r| self.run_replication(alpha_index, hypothesis, r)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            reps.map(|r| self.run_replication(alpha_index, hypothesis, r)).collect()
        }
    }

    /// Runs every replication for every `(α, hypothesis)` pair.
    pub fn monte_carlo(&self) -> Result<SimulationReport> {
        let mut rows = Vec::new();
        for (ai, &alpha) in self.config.alpha_grid.iter().enumerate() {
            for &h in &self.config.true_hypotheses {
                let outcomes = self.replicate(ai, h)?;
                rows.push(ReportRow::aggregate(alpha, h, self.exponents[h], &outcomes));
            }
        }
        Ok(SimulationReport { rows })
    }
}

/// Summary of the replications at one `(α, hypothesis)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub alpha: f64,
    pub log_inv_alpha: f64,
    pub hypothesis: usize,
    /// Mean stopping time over runs that decided.
    pub mean_t: f64,
    /// Sample standard deviation of those stopping times.
    pub std_t: f64,
    pub stderr_t: f64,
    /// `log(1/α) / mean_t`.
    pub payoff_estimate: f64,
    pub theoretical_exponent: f64,
    /// Fraction of all replications that decided a wrong hypothesis.
    pub error_rate: f64,
    pub timeouts: u64,
    pub replications: u64,
}

impl ReportRow {
    pub fn aggregate(alpha: f64, hypothesis: usize, theoretical_exponent: f64, outcomes: &[TestOutcome]) -> Self {
        let mut times = Vec::with_capacity(outcomes.len());
        let mut errors = 0u64;
        let mut timeouts = 0u64;
        for o in outcomes {
            match o.verdict {
                Verdict::Decided(d) => {
                    times.push(o.stopping_time as f64);
                    errors += u64::from(d != hypothesis);
                }
                Verdict::TimedOut => timeouts += 1,
            }
        }
        let count = times.len() as f64;
        let mean_t = times.iter().sum::<f64>() / count;
        let std_t = if times.len() > 1 {
            (times.iter().map(|t| (t - mean_t).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
        } else {
            0.0
        };
        let log_inv_alpha = -alpha.ln();
        let replications = outcomes.len() as u64;
        Self {
            alpha,
            log_inv_alpha,
            hypothesis,
            mean_t,
            std_t,
            stderr_t: std_t / count.sqrt(),
            payoff_estimate: log_inv_alpha / mean_t,
            theoretical_exponent,
            error_rate: errors as f64 / replications as f64,
            timeouts,
            replications,
        }
    }

    /// Standard error of `payoff_estimate` by the delta method.
    pub fn payoff_stderr(&self) -> f64 {
        self.payoff_estimate * self.stderr_t / self.mean_t
    }
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "alpha",
    "log_inv_alpha",
    "hypothesis",
    "mean_T",
    "std_T",
    "stderr_T",
    "payoff_estimate",
    "theoretical_exponent",
    "error_rate",
    "timeouts",
    "replications",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub rows: Vec<ReportRow>,
}

impl SimulationReport {
    pub fn to_csv(&self) -> String {
        let mut out = REPORT_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_real(r.alpha),
                fmt_real(r.log_inv_alpha),
                r.hypothesis,
                fmt_real(r.mean_t),
                fmt_real(r.std_t),
                fmt_real(r.stderr_t),
                fmt_real(r.payoff_estimate),
                fmt_real(r.theoretical_exponent),
                fmt_real(r.error_rate),
                r.timeouts,
                r.replications
            );
        }
        out
    }

    /// Rows for one true hypothesis, in grid order.
    pub fn for_hypothesis(&self, hypothesis: usize) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.hypothesis == hypothesis)
    }
}

/// Runs the scenario over its whole α grid.
pub fn alpha_sweep(config: ScenarioConfig) -> Result<SimulationReport> {
    Scenario::prepare(config)?.monte_carlo()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::DistortionMeasure;

    fn dist(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    fn bernoulli_config(alphas: Vec<f64>, reps: u64) -> ScenarioConfig {
        let spec =
            GameSpec::new(vec![dist(&[0.38, 0.62]), dist(&[0.5, 0.5])], 0.05, DistortionMeasure::TvL1, vec![1.0, 1.0], 1e-9).unwrap();
        ScenarioConfig::new(spec, alphas, reps, 7)
    }

    #[test]
    fn rank_one_channel_ignores_input() {
        let q = dist(&[0.2, 0.3, 0.5]);
        let s = ChannelSampler::new(&dist(&[1.0, 0.0, 0.0]), &Channel::rank_one(&q)).unwrap();
        let mut rng = substream(1, 0, 0, 0);
        let mut counts = [0u32; 3];
        for _ in 0..30_000 {
            counts[s.sample(&mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(q.probs()) {
            let f = *c as f64 / 30_000.0;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / 30_000.0).sqrt());
        }
    }

    #[test]
    fn replications_are_reproducible() {
        let sc = Scenario::prepare(bernoulli_config(vec![0.1], 1)).unwrap();
        let a = sc.run_replication(0, 1, 42).unwrap();
        let b = sc.run_replication(0, 1, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(substream(1, 0, 0, 0).random::<u64>(), substream(1, 0, 0, 1).random::<u64>());
    }

    #[test]
    fn single_replication_report_matches_run() {
        let sc = Scenario::prepare(bernoulli_config(vec![0.1], 1)).unwrap();
        let report = sc.monte_carlo().unwrap();
        assert_eq!(report.rows.len(), 2);
        let run = sc.run_replication(0, 0, 0).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.mean_t, run.stopping_time as f64);
        assert_eq!(row.std_t, 0.0);
        assert_eq!(row.replications, 1);
        assert!(report.to_csv().starts_with(
            "alpha,log_inv_alpha,hypothesis,mean_T,std_T,stderr_T,payoff_estimate,theoretical_exponent,error_rate,timeouts,replications\n"
        ));
    }

    #[test]
    fn cap_of_one_times_out() {
        let mut cfg = bernoulli_config(vec![0.1], 3);
        cfg.cap = 1;
        let report = Scenario::prepare(cfg).unwrap().monte_carlo().unwrap();
        assert!(report.rows.iter().all(|r| r.timeouts == 3));
    }

    #[test]
    fn rejects_infeasible_adversary() {
        let mut cfg = bernoulli_config(vec![0.1], 1);
        cfg.adversary = Adversary::Common(Channel::rank_one(&dist(&[0.9, 0.1])));
        assert!(matches!(Scenario::prepare(cfg), Err(Error::Infeasible(_))));
    }
}
