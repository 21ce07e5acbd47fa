use super::{drive, Step, TestOutcome};
use crate::error::{Error, Result};
use crate::prob::{symbol_llr, Distribution};

/// Boundaries `B_ij` of the matrix sequential probability ratio test.
#[derive(Debug, Clone, PartialEq)]
pub struct MsprtConfig {
    boundaries: Vec<Vec<f64>>,
}

impl MsprtConfig {
    /// `boundaries` must be square with a zero diagonal and positive
    /// off-diagonal entries.
    pub fn new(boundaries: Vec<Vec<f64>>) -> Result<Self> {
        let m = boundaries.len();
        if m < 2 || boundaries.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("boundary matrix must be square with at least two rows".into()));
        }
        for (i, row) in boundaries.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                let ok = if i == j { b == 0.0 } else { b > 0.0 && b.is_finite() };
                if !ok {
                    return Err(Error::Domain(format!("invalid boundary B[{i}][{j}] = {b}")));
                }
            }
        }
        Ok(Self { boundaries })
    }

    /// Every off-diagonal boundary equal to `b`.
    pub fn uniform(m: usize, b: f64) -> Result<Self> {
        Self::new((0..m).map(|i| (0..m).map(|j| if i == j { 0.0 } else { b }).collect()).collect())
    }

    /// Wald's boundaries `log((1 - α)/α)`.
    pub fn wald(m: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::Domain(format!("alpha must lie in (0, 0.5), got {alpha}")));
        }
        Self::uniform(m, ((1.0 - alpha) / alpha).ln())
    }

    pub fn boundaries(&self) -> &[Vec<f64>] {
        &self.boundaries
    }
}

/// Running log-likelihood ratios `S_ij(n) = sum_t ln(P_i(y_t) / P_j(y_t))`.
#[derive(Debug, Clone)]
pub struct MsprtTest<'a> {
    hypotheses: &'a [Distribution],
    config: &'a MsprtConfig,
    llr: Vec<Vec<f64>>,
    n: u64,
    stopped: Option<(u64, usize)>,
}

impl<'a> MsprtTest<'a> {
    pub fn new(hypotheses: &'a [Distribution], config: &'a MsprtConfig) -> Result<Self> {
        let m = hypotheses.len();
        if config.boundaries.len() != m {
            return Err(Error::Shape(format!("{m} hypotheses but a {0}x{0} boundary matrix", config.boundaries.len())));
        }
        if hypotheses.iter().any(|p| p.len() != hypotheses[0].len()) {
            return Err(Error::Shape("hypotheses differ in alphabet size".into()));
        }
        Ok(Self { hypotheses, config, llr: vec![vec![0.0; m]; m], n: 0, stopped: None })
    }

    pub fn log_likelihood_ratios(&self) -> &[Vec<f64>] {
        &self.llr
    }

    pub fn samples(&self) -> u64 {
        self.n
    }

    /// Stops once some `i` has `S_ij >= B_ij` for every `j != i`; the
    /// smallest such `i` is decided.
    pub fn step(&mut self, y: usize) -> Result<Step> {
        if self.stopped.is_some() {
            return Err(Error::AlreadyStopped);
        }
        let k = self.hypotheses[0].len();
        if y >= k {
            return Err(Error::Domain(format!("symbol {y} outside alphabet of size {k}")));
        }
        self.n += 1;
        let m = self.hypotheses.len();
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    self.llr[i][j] += symbol_llr(self.hypotheses[i][y], self.hypotheses[j][y]);
                }
            }
        }
        let b = &self.config.boundaries;
        let winner = (0..m).find(|&i| (0..m).all(|j| j == i || self.llr[i][j] >= b[i][j]));
        Ok(match winner {
            Some(i) => {
                self.stopped = Some((self.n, i));
                Step::Stop(i)
            }
            None => Step::Continue,
        })
    }
}

/// Runs the MSPRT over `stream` with a hard cap.
pub fn run_msprt<I>(stream: I, hypotheses: &[Distribution], config: &MsprtConfig, cap: u64) -> Result<TestOutcome>
where
    I: IntoIterator<Item = usize>,
{
    let mut test = MsprtTest::new(hypotheses, config)?;
    let (stopping_time, verdict) = drive(stream, cap, |y| test.step(y))?;
    Ok(TestOutcome { stopping_time, verdict, trajectory: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqtest::Verdict;

    fn dist(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(MsprtConfig::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]]).is_err());
        assert!(MsprtConfig::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(MsprtConfig::new(vec![vec![0.0, 1.0]]).is_err());
        let w = MsprtConfig::wald(2, 0.05).unwrap();
        assert!((w.boundaries()[0][1] - 19f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_hypotheses_follow_wald_boundaries() {
        // Each symbol 0 adds ln(0.8/0.2) to S_01.
        let h = [dist(&[0.8, 0.2]), dist(&[0.2, 0.8])];
        let cfg = MsprtConfig::wald(2, 0.01).unwrap();
        let step = 4f64.ln();
        let needed = (99f64.ln() / step).ceil() as u64;
        let out = run_msprt(std::iter::repeat(0), &h, &cfg, 1000).unwrap();
        assert_eq!(out.verdict, Verdict::Decided(0));
        assert_eq!(out.stopping_time, needed);
        let out = run_msprt(std::iter::repeat(1), &h, &cfg, 1000).unwrap();
        assert_eq!(out.verdict, Verdict::Decided(1));
    }

    #[test]
    fn impossible_symbol_settles_immediately() {
        let h = [dist(&[1.0, 0.0]), dist(&[0.5, 0.5])];
        let cfg = MsprtConfig::uniform(2, 3.0).unwrap();
        let out = run_msprt([1], &h, &cfg, 10).unwrap();
        assert_eq!(out.verdict, Verdict::Decided(1));
    }
}
