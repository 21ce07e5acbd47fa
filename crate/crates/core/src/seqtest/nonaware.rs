use super::{drive, RunOptions, Step, TestOutcome, ThresholdSchedule, Trajectory, TrajectoryRow};
use crate::divopt::{min_divergence_to_ball, ChannelSet, DistortionBall};
use crate::error::{Error, Result};
use crate::prob::{kl_slices, Distribution, TypeCounts};

/// Statistics of the non-aware test at one sample type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonAwareStatistics {
    /// `S_n = min_A max{D(Q̂ || P0 A), D(Q̂ || P1 A)}`.
    pub combined: f64,
    /// `w[0] = min_A D(Q̂ || P1 A)` supports hypothesis 0, `w[1] = min_A D(Q̂ || P0 A)`
    /// supports hypothesis 1.
    pub support: [f64; 2],
}

impl NonAwareStatistics {
    /// The hypothesis with the larger support statistic, hypothesis 0 on ties.
    pub fn decision(&self) -> usize {
        usize::from(self.support[1] > self.support[0])
    }
}

/// Incremental state of the binary test against an adversary that applies
/// one channel to both hypotheses.
#[derive(Debug, Clone)]
pub struct NonAwareTest {
    set: ChannelSet,
    balls: [DistortionBall; 2],
    schedule: ThresholdSchedule,
    opts: RunOptions,
    counts: TypeCounts,
    stopped: Option<(u64, usize)>,
    trajectory: Option<Trajectory>,
}

impl NonAwareTest {
    pub fn new(set: ChannelSet, schedule: ThresholdSchedule, opts: RunOptions) -> Result<Self> {
        opts.validate()?;
        let [p0, p1] = set.inputs() else {
            return Err(Error::Shape(format!("the non-aware test is binary, got {} hypotheses", set.inputs().len())));
        };
        if schedule.num_hypotheses() != 2 || schedule.alphabet_size() != set.alphabet_size() {
            return Err(Error::Shape("threshold schedule does not match the test".into()));
        }
        let ball = |p: &Distribution| DistortionBall::new(p.clone(), set.delta(), set.measure(), set.floor());
        let balls = [ball(p0)?, ball(p1)?];
        let trajectory = opts.record_trajectory.then(|| Trajectory::new(vec!["s_n".into(), "w_0".into(), "w_1".into()]));
        let counts = TypeCounts::new(set.alphabet_size());
        Ok(Self { set, balls, schedule, opts, counts, stopped: None, trajectory })
    }

    pub fn samples(&self) -> u64 {
        self.counts.total()
    }

    pub fn stopped(&self) -> Option<(u64, usize)> {
        self.stopped
    }

    /// All three statistics at the current sample type.
    pub fn statistics(&self) -> Result<NonAwareStatistics> {
        self.evaluate(&self.counts.distribution()?)
    }

    fn evaluate(&self, qhat: &Distribution) -> Result<NonAwareStatistics> {
        let solver = &self.opts.solver;
        let combined = self.set.min_max_divergence(qhat, solver)?.value;
        let w0 = self.set.min_divergence(qhat, 1, solver)?.value;
        let w1 = self.set.min_divergence(qhat, 0, solver)?.value;
        Ok(NonAwareStatistics { combined, support: [w0, w1] })
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

        if self.trajectory.is_some() {
            let stats = self.evaluate(&qhat)?;
            let stop = stats.combined >= gamma;
            let decision = stop.then(|| stats.decision());
            let row = TrajectoryRow {
                n,
                gamma,
                statistics: vec![stats.combined, stats.support[0], stats.support[1]],
                stopped: stop,
                decision,
            };
            self.trajectory.as_mut().expect("trajectory is recorded").rows.push(row);
            return Ok(self.finish(n, decision));
        }

        // The identity channel is feasible, so S_n <= max_k D(Q̂ || P_k).
        let upper = self.set.inputs().iter().map(|p| kl_slices(qhat.probs(), p.probs())).fold(0.0, f64::max);
        if upper < gamma {
            return Ok(Step::Continue);
        }
        // Every P_k A lies in the ball around P_k, so S_n >= max_k min_{q in B_k} D(Q̂ || q).
        let mut lower = 0.0f64;
        for b in &self.balls {
            lower = lower.max(min_divergence_to_ball(&qhat, b, &self.opts.solver)?.value);
        }
        let stop = lower >= gamma || self.set.min_max_divergence(&qhat, &self.opts.solver)?.value >= gamma;
        if !stop {
            return Ok(Step::Continue);
        }
        let stats = self.evaluate(&qhat)?;
        Ok(self.finish(n, Some(stats.decision())))
    }

    fn finish(&mut self, n: u64, decision: Option<usize>) -> Step {
        match decision {
            Some(d) => {
                self.stopped = Some((n, d));
                Step::Stop(d)
            }
            None => Step::Continue,
        }
    }

    pub fn into_trajectory(self) -> Option<Trajectory> {
        self.trajectory
    }
}

/// Runs the non-aware test over `stream`: stop at the first `n` with
/// `S_n >= γ_n` and decide by the larger support statistic.
pub fn run_nonaware<I>(stream: I, set: &ChannelSet, schedule: &ThresholdSchedule, opts: &RunOptions) -> Result<TestOutcome>
where
    I: IntoIterator<Item = usize>,
{
    let mut test = NonAwareTest::new(set.clone(), schedule.clone(), opts.clone())?;
    let (stopping_time, verdict) = drive(stream, opts.cap, |y| test.step(y))?;
    Ok(TestOutcome { stopping_time, verdict, trajectory: test.into_trajectory() })
}
