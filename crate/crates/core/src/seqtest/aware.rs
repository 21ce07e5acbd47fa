use super::{drive, RunOptions, Step, TestOutcome, ThresholdSchedule, Trajectory, TrajectoryRow};
use crate::divopt::{min_divergence_to_ball, SolverOptions};
use crate::equilibrium::GameSpec;
use crate::error::{Error, Result};
use crate::prob::{kl_slices, Distribution, TypeCounts};

/// `D_j = min_{q in B_j} D(qhat || q)` for every hypothesis `j`.
fn ball_divergences(qhat: &Distribution, spec: &GameSpec, opts: &SolverOptions) -> Result<Vec<f64>> {
    spec.balls().iter().map(|b| min_divergence_to_ball(qhat, b, opts).map(|r| r.value)).collect()
}

/// `Z_i = min_{j != i} D_j`.
fn exclude_self(per_ball: &[f64]) -> Vec<f64> {
    (0..per_ball.len())
        .map(|i| {
            per_ball
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// The statistics `Z_i = min_{j != i} min_{q in B_j} D(Q̂ || q)` of the
/// sample type in `counts`.
pub fn z_statistics(counts: &TypeCounts, spec: &GameSpec, opts: &SolverOptions) -> Result<Vec<f64>> {
    if counts.alphabet_size() != spec.alphabet_size() {
        return Err(Error::Shape("counts and game differ in alphabet size".into()));
    }
    let qhat = counts.distribution()?;
    Ok(exclude_self(&ball_divergences(&qhat, spec, opts)?))
}

/// Incremental state of the adversary-aware test: stop at the first `n`
/// with some `Z_i >= γ_n` and decide the smallest such `i`.
#[derive(Debug, Clone)]
pub struct AwareTest<'a> {
    spec: &'a GameSpec,
    schedule: ThresholdSchedule,
    opts: RunOptions,
    counts: TypeCounts,
    stopped: Option<(u64, usize)>,
    trajectory: Option<Trajectory>,
}

impl<'a> AwareTest<'a> {
    pub fn new(spec: &'a GameSpec, schedule: ThresholdSchedule, opts: RunOptions) -> Result<Self> {
        opts.validate()?;
        if schedule.alphabet_size() != spec.alphabet_size() || schedule.num_hypotheses() != spec.num_hypotheses() {
            return Err(Error::Shape("threshold schedule does not match the game".into()));
        }
        let m = spec.num_hypotheses();
        let trajectory = opts.record_trajectory.then(|| Trajectory::new((0..m).map(|i| format!("z_{i}")).collect()));
        Ok(Self { counts: TypeCounts::new(spec.alphabet_size()), spec, schedule, opts, stopped: None, trajectory })
    }

    pub fn samples(&self) -> u64 {
        self.counts.total()
    }

    pub fn counts(&self) -> &TypeCounts {
        &self.counts
    }

    /// `(T, decision)` once stopped.
    pub fn stopped(&self) -> Option<(u64, usize)> {
        self.stopped
    }

    /// Current statistics, recomputed from the counts.
    pub fn statistics(&self) -> Result<Vec<f64>> {
        z_statistics(&self.counts, self.spec, &self.opts.solver)
    }

    pub fn step(&mut self, y: usize) -> Result<Step> {
        if self.stopped.is_some() {
            return Err(Error::AlreadyStopped);
        }
        self.counts.push(y)?;
        let n = self.counts.total();
        if !n.is_multiple_of(self.opts.stride) {
            return Ok(Step::Continue);
        }
        let gamma = self.schedule.gamma(n)?;
        let qhat = self.counts.distribution()?;
        if self.trajectory.is_none() {
            // Each ball contains its center, so D(Q̂ || P_j) bounds D_j from above.
            let upper: Vec<f64> = self.spec.hypotheses().iter().map(|p| kl_slices(qhat.probs(), p.probs())).collect();
            if exclude_self(&upper).iter().all(|&z| z < gamma) {
                return Ok(Step::Continue);
            }
        }
        let z = exclude_self(&ball_divergences(&qhat, self.spec, &self.opts.solver)?);
        let decision = z.iter().position(|&v| v >= gamma);
        if let Some(t) = &mut self.trajectory {
            t.rows.push(TrajectoryRow { n, gamma, statistics: z, stopped: decision.is_some(), decision });
        }
        Ok(match decision {
            Some(i) => {
                self.stopped = Some((n, i));
                Step::Stop(i)
            }
            None => Step::Continue,
        })
    }

    pub fn into_trajectory(self) -> Option<Trajectory> {
        self.trajectory
    }
}

/// Runs the aware test over `stream`. Hitting `opts.cap` yields a timed-out
/// outcome; running out of symbols first is an error.
pub fn run_aware<I>(stream: I, spec: &GameSpec, schedule: &ThresholdSchedule, opts: &RunOptions) -> Result<TestOutcome>
where
    I: IntoIterator<Item = usize>,
{
    let mut test = AwareTest::new(spec, schedule.clone(), opts.clone())?;
    let (stopping_time, verdict) = drive(stream, opts.cap, |y| test.step(y))?;
    Ok(TestOutcome { stopping_time, verdict, trajectory: test.into_trajectory() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{binary_kl, DistortionMeasure};
    use crate::seqtest::Verdict;

    fn dist(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    fn bernoulli() -> GameSpec {
        GameSpec::new(vec![dist(&[0.38, 0.62]), dist(&[0.5, 0.5])], 0.05, DistortionMeasure::TvL1, vec![1.0, 1.0], 1e-9).unwrap()
    }

    fn schedule(alpha: f64) -> ThresholdSchedule {
        ThresholdSchedule::with_constant(alpha, 0.85, 2593.33, 2, 2).unwrap()
    }

    #[test]
    fn z_at_worst_case_type() {
        let spec = bernoulli();
        let seq: Vec<usize> = (0..1000).map(|i| usize::from(i >= 405)).collect();
        let counts = TypeCounts::from_sequence(2, &seq).unwrap();
        let z = z_statistics(&counts, &spec, &SolverOptions::default()).unwrap();
        assert!((z[0] - binary_kl(0.405, 0.475).unwrap()).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!(matches!(z_statistics(&TypeCounts::new(2), &spec, &SolverOptions::default()), Err(Error::EmptySequence)));
    }

    #[test]
    fn first_sample_never_stops() {
        let spec = bernoulli();
        for y in 0..2 {
            let mut t = AwareTest::new(&spec, schedule(0.05), RunOptions::default()).unwrap();
            assert_eq!(t.step(y).unwrap(), Step::Continue);
        }
    }

    #[test]
    fn cap_times_out_and_stopped_state_rejects_input() {
        let spec = bernoulli();
        let opts = RunOptions { cap: 5, ..RunOptions::default() };
        let out = run_aware(std::iter::repeat(0), &spec, &schedule(1e-12), &opts).unwrap();
        assert_eq!(out.verdict, Verdict::TimedOut);
        assert_eq!(out.stopping_time, 5);
        let short = run_aware([0, 1, 0], &spec, &schedule(0.05), &RunOptions::default());
        assert!(matches!(short, Err(Error::StreamExhausted(3))));

        let mut t = AwareTest::new(&spec, schedule(0.05), RunOptions::default()).unwrap();
        // Symbol 1 is likelier under hypothesis 0.
        let decided = std::iter::repeat_n(1, 10_000).find_map(|y| match t.step(y).unwrap() {
            Step::Stop(i) => Some(i),
            Step::Continue => None,
        });
        assert_eq!(decided, Some(0));
        assert!(matches!(t.step(0), Err(Error::AlreadyStopped)));
    }

    #[test]
    fn pruned_and_recorded_runs_agree() {
        let spec = bernoulli();
        // A periodic stream with frequencies (0.4, 0.6).
        let stream: Vec<usize> = (0..200_000).map(|i| usize::from(i % 5 >= 2)).collect();
        let plain = run_aware(stream.iter().copied(), &spec, &schedule(0.01), &RunOptions::default()).unwrap();
        let opts = RunOptions { record_trajectory: true, ..RunOptions::default() };
        let logged = run_aware(stream.iter().copied(), &spec, &schedule(0.01), &opts).unwrap();
        assert_eq!(plain.stopping_time, logged.stopping_time);
        assert_eq!(plain.verdict, Verdict::Decided(0));
        let rows = logged.trajectory.unwrap().rows;
        assert_eq!(rows.len() as u64, logged.stopping_time);
        let last = rows.last().unwrap();
        assert!(last.stopped && last.statistics[0] >= last.gamma);
        assert!(rows[..rows.len() - 1].iter().all(|r| r.statistics.iter().all(|&z| z < r.gamma)));
    }
}
