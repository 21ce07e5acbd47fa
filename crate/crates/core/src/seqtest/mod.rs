//! Sequential tests run by the decision maker.

mod aware;
mod msprt;
mod nonaware;
mod threshold;

use std::fmt::Write as _;

use crate::divopt::SolverOptions;
use crate::error::{Error, Result};

pub use aware::{run_aware, z_statistics, AwareTest};
pub use msprt::{run_msprt, MsprtConfig, MsprtTest};
pub use nonaware::{run_nonaware, NonAwareStatistics, NonAwareTest};
pub use threshold::{compute_constant_c, ThresholdSchedule, CONSTANT_TOLERANCE, DEFAULT_ZETA};

/// Default hard cap on the number of samples one test may consume.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Result of feeding one symbol to a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    Stop(usize),
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decided(usize),
    TimedOut,
}

impl Verdict {
    pub fn decision(self) -> Option<usize> {
        match self {
            Verdict::Decided(i) => Some(i),
            Verdict::TimedOut => None,
        }
    }
}

/// One evaluation of the stopping rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub n: u64,
    pub gamma: f64,
    pub statistics: Vec<f64>,
    pub stopped: bool,
    pub decision: Option<usize>,
}

/// Log of stopping-rule evaluations with named statistic columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub columns: Vec<String>,
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    /// CSV with header `n,gamma_n,<columns>,stopped,decision`; the decision
    /// cell is empty while the test runs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,gamma_n");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",stopped,decision\n");
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.n, fmt_real(r.gamma));
            for v in &r.statistics {
                let _ = write!(out, ",{}", fmt_real(*v));
            }
            let _ = write!(out, ",{},", u8::from(r.stopped));
            if let Some(d) = r.decision {
                let _ = write!(out, "{d}");
            }
            out.push('\n');
        }
        out
    }
}

/// Formats a real rounded to 12 significant digits, in shortest form.
pub fn fmt_real(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Outcome of one sequential run.
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    /// Samples consumed when the test stopped or hit the cap.
    pub stopping_time: u64,
    pub verdict: Verdict,
    pub trajectory: Option<Trajectory>,
}

/// Options shared by all runners.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub cap: u64,
    /// Evaluate the stopping rule every `stride` samples.
    pub stride: u64,
    pub record_trajectory: bool,
    pub solver: SolverOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_CAP, stride: 1, record_trajectory: false, solver: SolverOptions::default() }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<()> {
        if self.cap == 0 || self.stride == 0 {
            return Err(Error::Domain("cap and stride must be >= 1".into()));
        }
        self.solver.validate()
    }
}

/// `(n + 1)^K e^{-n ε}`, the type-class bound on `P(D(Q̂_n || Q) >= ε)`.
pub fn concentration_bound(n: u64, k: usize, eps: f64) -> f64 {
    let nf = n as f64;
    (k as f64 * (nf + 1.0).ln() - nf * eps).exp()
}

/// `(1/α) e^{-2(n-1)B*} (M-1) n^{2K} e^{(n-1)^ζ}`, the bound on `P(T >= n)`.
pub fn stopping_tail_bound(n: u64, alpha: f64, b_star: f64, m: usize, k: usize, zeta: f64) -> f64 {
    let nf = n as f64;
    let log = -alpha.ln() - 2.0 * (nf - 1.0) * b_star + ((m - 1) as f64).ln() + 2.0 * k as f64 * nf.ln()
        + (nf - 1.0).powf(zeta);
    log.exp()
}

/// Drives `step` over `stream` until it stops, the cap is reached or the
/// stream runs dry.
fn drive<I, F>(stream: I, cap: u64, mut step: F) -> Result<(u64, Verdict)>
where
    I: IntoIterator<Item = usize>,
    F: FnMut(usize) -> Result<Step>,
{
    let mut it = stream.into_iter();
    let mut n = 0u64;
    while n < cap {
        let Some(y) = it.next() else { return Err(Error::StreamExhausted(n)) };
        n += 1;
        if let Step::Stop(d) = step(y)? {
            return Ok((n, Verdict::Decided(d)));
        }
    }
    Ok((n, Verdict::TimedOut))
}
