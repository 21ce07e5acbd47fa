use statrs::function::gamma::gamma_ui;

use crate::error::{Error, Result};

/// Default exponent of the `n^{-ζ}` term.
pub const DEFAULT_ZETA: f64 = 0.85;
/// Accuracy used when a schedule computes its own constant.
pub const CONSTANT_TOLERANCE: f64 = 1e-9;
const MAX_TERMS: u64 = 1 << 31;

/// `C(ζ) = sum_{n >= 1} exp(-n^{1-ζ})` to absolute accuracy `abs_tol`.
///
/// Sums the first `N - 1` terms exactly and the remainder by the
/// Euler-Maclaurin formula `f(N)/2 + ∫_N^∞ f - f'(N)/12`, doubling `N` until
/// the remainder bound is below `abs_tol / 2`. The integral is
/// `Γ(1/s, N^s) / s` with `s = 1 - ζ`.
pub fn compute_constant_c(zeta: f64, abs_tol: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::Domain(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    if !(abs_tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be > 0, got {abs_tol}")));
    }
    let s = 1.0 - zeta;
    let f = |x: f64| (-x.powf(s)).exp();
    let df = |x: f64| -s * x.powf(s - 1.0) * f(x);
    let d2f = |x: f64| f(x) * (s * s * x.powf(2.0 * s - 2.0) + s * (1.0 - s) * x.powf(s - 2.0));

    // The remainder after the f' term is at most 2ζ(3)/(2π)^3 |f''(N)| < |f''(N)|/12.
    let mut n = 64u64;
    while d2f(n as f64) / 12.0 > abs_tol / 2.0 {
        n *= 2;
        if n > MAX_TERMS {
            return Err(Error::Resource(format!("constant for zeta = {zeta} needs more than {MAX_TERMS} terms")));
        }
    }

    let mut head = 0.0f64;
    let mut carry = 0.0f64;
    for i in 1..n {
        // Neumaier summation keeps millions of terms accurate.
        let v = f(i as f64);
        let t = head + v;
        carry += if head.abs() >= v.abs() { (head - t) + v } else { (v - t) + head };
        head = t;
    }
    let x = n as f64;
    let integral = gamma_ui(1.0 / s, x.powf(s)) / s;
    let total = head + carry + 0.5 * f(x) + integral - df(x) / 12.0;
    if !total.is_finite() {
        return Err(Error::Resource(format!("constant for zeta = {zeta} overflows")));
    }
    Ok(total)
}

/// `γ_n = log(C/α)/n + n^{-ζ} + (K log(n+1) + log(M-1))/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    alpha: f64,
    zeta: f64,
    c: f64,
    k: usize,
    m: usize,
}

impl ThresholdSchedule {
    pub fn new(alpha: f64, zeta: f64, k: usize, m: usize) -> Result<Self> {
        let c = compute_constant_c(zeta, CONSTANT_TOLERANCE)?;
        Self::with_constant(alpha, zeta, c, k, m)
    }

    /// Uses a precomputed `C`, avoiding the summation when many schedules
    /// share one `ζ`.
    pub fn with_constant(alpha: f64, zeta: f64, c: f64, k: usize, m: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::Domain(format!("zeta must lie in (0, 1), got {zeta}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Domain(format!("constant must be positive and finite, got {c}")));
        }
        if k < 2 || m < 2 {
            return Err(Error::Shape(format!("need K >= 2 and M >= 2, got K = {k}, M = {m}")));
        }
        Ok(Self { alpha, zeta, c, k, m })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    pub fn num_hypotheses(&self) -> usize {
        self.m
    }

    pub fn gamma(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("threshold is defined for n >= 1".into()));
        }
        let nf = n as f64;
        let fixed = (self.c / self.alpha).ln();
        let growth = self.k as f64 * (nf + 1.0).ln() + ((self.m - 1) as f64).ln();
        Ok(fixed / nf + nf.powf(-self.zeta) + growth / nf)
    }
}
