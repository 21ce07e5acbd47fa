//! Finite-alphabet probability primitives: distributions, channels,
//! divergences, empirical types and log-likelihood ratios.
//!
//! All logarithms are natural, so divergences are in nats. The convention
//! `0 * ln(0 / q) = 0` holds everywhere; a divergence that is infinite
//! because of an absolute-continuity violation is returned as
//! `f64::INFINITY` rather than as an error.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on `sum(p) == 1` for a constructed distribution.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Default lower bound on every entry of a "full support" distribution.
pub const DEFAULT_SUPPORT_FLOOR: f64 = 1e-9;

/// A probability vector over the alphabet `{0, .., K-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates `probs` without rescaling it.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Construction("empty probability vector".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Construction(format!("invalid entry {bad}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Construction(format!("entries sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Divides nonnegative weights by their sum.
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Construction("empty weight vector".into()));
        }
        if let Some(bad) = raw.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Construction(format!("invalid weight {bad}")));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Construction("all weights are zero".into()));
        }
        let mut probs: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        absorb_rounding(&mut probs);
        Ok(Self { probs })
    }

    /// Uniform distribution over `k` symbols.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::normalize(&vec![1.0; k])
    }

    /// Builds a distribution from an output of a numerical routine whose sum
    /// is already 1 up to rounding.
    pub(crate) fn from_solver(mut probs: Vec<f64>) -> Self {
        absorb_rounding(&mut probs);
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Smallest entry.
    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when every entry is at least `floor`.
    pub fn has_full_support(&self, floor: f64) -> bool {
        self.probs.iter().all(|&p| p >= floor)
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.probs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p:.6}")?;
        }
        write!(f, ")")
    }
}

/// Pushes the rounding residual of a near-normalized vector onto its
/// largest entry so that the sum is 1 to machine precision.
fn absorb_rounding(probs: &mut [f64]) {
    let sum: f64 = probs.iter().sum();
    let residual = 1.0 - sum;
    if residual != 0.0 {
        let (imax, _) = probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        probs[imax] = (probs[imax] + residual).max(0.0);
    }
}

/// A `K x K` row-stochastic matrix; entry `(l, j)` is `Pr(Y = j | X = l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    k: usize,
    data: Vec<f64>,
}

impl Channel {
    /// Builds a channel from row-major entries.
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || data.len() != k * k {
            return Err(Error::Shape(format!(
                "channel needs {} entries for K = {k}, got {}",
                k * k,
                data.len()
            )));
        }
        for l in 0..k {
            let row = &data[l * k..(l + 1) * k];
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Construction(format!("row {l} has an invalid entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::Construction(format!("row {l} sums to {s}")));
            }
        }
        Ok(Self { k, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("channel rows must all have length K".into()));
        }
        Self::new(k, rows.concat())
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for l in 0..k {
            data[l * k + l] = 1.0;
        }
        Self { k, data }
    }

    /// Channel whose every row equals `q`; it maps any input onto `q`.
    pub fn rank_one(q: &Distribution) -> Self {
        let k = q.len();
        let mut data = Vec::with_capacity(k * k);
        for _ in 0..k {
            data.extend_from_slice(q.probs());
        }
        Self { k, data }
    }

    /// Renormalizes rows produced by a numerical routine.
    pub(crate) fn from_solver(k: usize, mut data: Vec<f64>) -> Self {
        for row in data.chunks_mut(k) {
            for v in row.iter_mut() {
                *v = v.max(0.0);
            }
            let s: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= s;
            }
            absorb_rounding(row);
        }
        Self { k, data }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, l: usize, j: usize) -> f64 {
        self.data[l * self.k + j]
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.data[l * self.k..(l + 1) * self.k]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    /// Convex combination `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &Channel, t: f64) -> Channel {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        Channel::from_solver(self.k, data)
    }
}

/// Output distribution `P A` of the channel `A` driven by `P`.
pub fn apply_channel(p: &Distribution, a: &Channel) -> Result<Distribution> {
    if p.len() != a.size() {
        return Err(Error::Shape(format!(
            "distribution has {} symbols, channel has {}",
            p.len(),
            a.size()
        )));
    }
    let k = a.size();
    let mut out = vec![0.0; k];
    for (l, pl) in p.probs().iter().enumerate() {
        for (o, alj) in out.iter_mut().zip(a.row(l)) {
            *o += pl * alj;
        }
    }
    Ok(Distribution::from_solver(out))
}

/// Distortion measure `d(P, Q)` constraining the adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistortionMeasure {
    /// Unhalved L1 distance `sum |P(x) - Q(x)|`.
    TvL1,
    /// `D(P || Q)`, with the unperturbed distribution as first argument.
    Kl,
}

impl DistortionMeasure {
    pub fn evaluate(&self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            DistortionMeasure::TvL1 => tv_l1(p, q),
            DistortionMeasure::Kl => kl_slices(p, q),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistortionMeasure::TvL1 => "tv_l1",
            DistortionMeasure::Kl => "kl",
        }
    }
}

impl std::str::FromStr for DistortionMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tv_l1" | "tv" | "l1" => Ok(DistortionMeasure::TvL1),
            "kl" => Ok(DistortionMeasure::Kl),
            other => Err(Error::Domain(format!("unsupported distortion measure '{other}'"))),
        }
    }
}

impl fmt::Display for DistortionMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unhalved L1 distance.
pub fn tv_l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            total += pi * (pi / qi).ln();
        }
    }
    // Rounding can push a zero divergence a hair below zero.
    total.max(0.0)
}

/// `D(P || Q)` in nats; `+inf` when `P` is not absolutely continuous w.r.t. `Q`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> f64 {
    kl_slices(p.probs(), q.probs())
}

/// Binary divergence `D_b(a || b)` between Bernoulli parameters in `(0, 1)`.
pub fn binary_kl(a: f64, b: f64) -> Result<f64> {
    for (name, v) in [("a", a), ("b", b)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Domain(format!("binary divergence needs {name} in (0,1), got {v}")));
        }
    }
    Ok((a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()).max(0.0))
}

/// Bhattacharyya distance `-ln sum sqrt(Q0 Q1)` between fully supported distributions.
pub fn bhattacharyya(q0: &Distribution, q1: &Distribution) -> Result<f64> {
    if q0.len() != q1.len() {
        return Err(Error::Shape("Bhattacharyya distance of different alphabets".into()));
    }
    if q0.min_prob() <= 0.0 || q1.min_prob() <= 0.0 {
        return Err(Error::Domain("Bhattacharyya distance needs full support".into()));
    }
    Ok(bhattacharyya_slices(q0.probs(), q1.probs()))
}

pub(crate) fn bhattacharyya_slices(q0: &[f64], q1: &[f64]) -> f64 {
    let bc: f64 = q0.iter().zip(q1).map(|(a, b)| (a * b).sqrt()).sum();
    (-bc.ln()).max(0.0)
}

/// Running symbol tallies of an observed sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeCounts {
    counts: Vec<u64>,
    n: u64,
}

impl TypeCounts {
    pub fn new(k: usize) -> Self {
        Self { counts: vec![0; k], n: 0 }
    }

    pub fn from_sequence(k: usize, seq: &[usize]) -> Result<Self> {
        let mut t = Self::new(k);
        for &y in seq {
            t.push(y)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, symbol: usize) -> Result<()> {
        let k = self.counts.len();
        let slot = self
            .counts
            .get_mut(symbol)
            .ok_or_else(|| Error::Domain(format!("symbol {symbol} outside alphabet of size {k}")))?;
        *slot += 1;
        self.n += 1;
        Ok(())
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    /// Empirical distribution (type) of the sequence seen so far.
    pub fn distribution(&self) -> Result<Distribution> {
        empirical_distribution(&self.counts, self.n)
    }
}

/// Type of a sequence with per-symbol counts `counts` and length `n`.
pub fn empirical_distribution(counts: &[u64], n: u64) -> Result<Distribution> {
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let total: u64 = counts.iter().sum();
    if total != n {
        return Err(Error::Shape(format!("counts sum to {total}, expected {n}")));
    }
    let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(Distribution::from_solver(probs))
}

/// Per-symbol log-likelihood ratio `ln(P_i(a) / P_j(a))`, with symbols
/// impossible under both hypotheses contributing nothing.
pub(crate) fn symbol_llr(pi: f64, pj: f64) -> f64 {
    match (pi > 0.0, pj > 0.0) {
        (true, true) => (pi / pj).ln(),
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => 0.0,
    }
}

/// `S_ij = sum_a counts(a) ln(P_i(a) / P_j(a))`; signed infinities are values.
pub fn log_likelihood_ratio(counts: &[u64], pi: &Distribution, pj: &Distribution) -> Result<f64> {
    if counts.len() != pi.len() || counts.len() != pj.len() {
        return Err(Error::Shape("counts and distributions differ in alphabet size".into()));
    }
    let mut s = 0.0;
    for (a, &c) in counts.iter().enumerate() {
        if c > 0 {
            s += c as f64 * symbol_llr(pi[a], pj[a]);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(Distribution::normalize(&[2.0, 2.0]).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(Distribution::normalize(&[1.0, 0.0, 0.0]).unwrap().probs(), &[1.0, 0.0, 0.0]);
        // I_1 as printed sums to 1.00005.
        let d = Distribution::normalize(&[0.9061, 0.09395]).unwrap();
        assert!((d[0] - 0.9061 / 1.00005).abs() < 1e-15);
        assert!((d[0] - 0.9060547).abs() < 1e-7);
        assert!((d[1] - 0.0939453).abs() < 1e-7);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert!(matches!(Distribution::normalize(&[0.0, 0.0]), Err(Error::Construction(_))));
        assert!(matches!(Distribution::normalize(&[1.0, -0.1]), Err(Error::Construction(_))));
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn apply_channel_examples() {
        let a1 = Channel::from_rows(&[vec![0.15, 0.85], vec![0.80, 0.20]]).unwrap();
        let out = apply_channel(&dist(&[0.5, 0.5]), &a1).unwrap();
        assert!((out[0] - 0.475).abs() < 1e-15 && (out[1] - 0.525).abs() < 1e-15);

        let a0 = Channel::from_rows(&[vec![0.5, 0.5], vec![0.3419, 0.6581]]).unwrap();
        let out = apply_channel(&dist(&[0.38, 0.62]), &a0).unwrap();
        // 0.38 * 0.5 + 0.62 * 0.3419
        assert!((out[0] - 0.401978).abs() < 1e-12);
        assert!((out[1] - 0.598022).abs() < 1e-12);

        let p = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(apply_channel(&p, &Channel::identity(3)).unwrap(), p);
        assert!(matches!(apply_channel(&p, &Channel::identity(2)), Err(Error::Shape(_))));
    }

    #[test]
    fn divergence_examples() {
        let p = dist(&[0.475, 0.525]);
        let q = dist(&[0.405, 0.595]);
        assert_eq!(kl_divergence(&p, &p), 0.0);
        let direct = 0.475 * (0.475f64 / 0.405).ln() + 0.525 * (0.525f64 / 0.595).ln();
        assert!((kl_divergence(&p, &q) - direct).abs() < 1e-15);
        assert!((kl_divergence(&p, &q) - 0.0100175).abs() < 1e-6);
        assert_eq!(kl_divergence(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])), f64::INFINITY);
        assert_eq!(kl_divergence(&dist(&[0.0, 1.0]), &dist(&[0.5, 0.5])), 2f64.ln());
    }

    #[test]
    fn binary_kl_examples() {
        assert_eq!(binary_kl(0.3, 0.3).unwrap(), 0.0);
        let v = binary_kl(0.405, 0.475).unwrap();
        assert!((v - kl_divergence(&dist(&[0.405, 0.595]), &dist(&[0.475, 0.525]))).abs() < 1e-15);
        assert!((v - 0.0099038).abs() < 1e-6);
        assert!((binary_kl(0.475, 0.405).unwrap() - 0.0100175).abs() < 1e-6);
        assert!(matches!(binary_kl(0.0, 0.5), Err(Error::Domain(_))));
        assert!(matches!(binary_kl(0.5, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn bhattacharyya_examples() {
        let q = dist(&[0.3, 0.7]);
        assert_eq!(bhattacharyya(&q, &q).unwrap(), 0.0);
        let b = bhattacharyya(&dist(&[0.5, 0.5]), &dist(&[0.405, 0.595])).unwrap();
        let expect = -((0.2025f64).sqrt() + (0.2975f64).sqrt()).ln();
        assert!((b - expect).abs() < 1e-15);
        assert!(matches!(
            bhattacharyya(&dist(&[1.0, 0.0]), &q),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn empirical_examples() {
        let t = TypeCounts::from_sequence(2, &[0, 0, 1, 1]).unwrap();
        assert_eq!(t.distribution().unwrap().probs(), &[0.5, 0.5]);
        let t = TypeCounts::from_sequence(2, &[0, 0, 0]).unwrap();
        assert_eq!(t.distribution().unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(empirical_distribution(&[0, 0], 0), Err(Error::EmptySequence));
        assert!(TypeCounts::new(2).push(2).is_err());
    }

    #[test]
    fn llr_examples() {
        let pi = dist(&[0.6, 0.4]);
        let pj = dist(&[0.4, 0.6]);
        assert_eq!(log_likelihood_ratio(&[5, 7], &pi, &pi).unwrap(), 0.0);
        let s = log_likelihood_ratio(&[2, 1], &pi, &pj).unwrap();
        assert!((s - (2.0 * 1.5f64.ln() + (2.0f64 / 3.0).ln())).abs() < 1e-15);
        let z = dist(&[1.0, 0.0]);
        assert_eq!(log_likelihood_ratio(&[0, 1], &pi, &z).unwrap(), f64::INFINITY);
        assert_eq!(log_likelihood_ratio(&[0, 1], &z, &pi).unwrap(), f64::NEG_INFINITY);
    }

    fn full_support(k: usize) -> impl Strategy<Value = Distribution> {
        prop::collection::vec(0.01f64..1.0, k).prop_map(|w| Distribution::normalize(&w).unwrap())
    }

    fn pair_of(kmax: usize) -> impl Strategy<Value = (Distribution, Distribution)> {
        (2..=kmax).prop_flat_map(|k| (full_support(k), full_support(k)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn pinsker_and_gibbs((p, q) in pair_of(6)) {
            let d = kl_divergence(&p, &q);
            prop_assert!(d >= 0.0);
            prop_assert!(tv_l1(p.probs(), q.probs()) / 2.0 <= (d / 2.0).sqrt() + 1e-12);
            if p.max_abs_diff(&q) > 1e-6 {
                prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn binary_kl_matches_vector_kl(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            let v = kl_divergence(&dist(&[a, 1.0 - a]), &dist(&[b, 1.0 - b]));
            prop_assert!((binary_kl(a, b).unwrap() - v).abs() <= 1e-14);
        }

        #[test]
        fn channel_output_stays_on_simplex(
            p in full_support(4),
            rows in prop::collection::vec(full_support(4), 4),
        ) {
            let a = Channel::from_rows(&rows.into_iter().map(Distribution::into_vec).collect::<Vec<_>>()).unwrap();
            let out = apply_channel(&p, &a).unwrap();
            prop_assert!(out.probs().iter().all(|&v| v >= 0.0));
            prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn incremental_type_matches_batch(seq in prop::collection::vec(0usize..4, 1..200)) {
            let mut t = TypeCounts::new(4);
            for (i, &y) in seq.iter().enumerate() {
                t.push(y).unwrap();
                let batch = TypeCounts::from_sequence(4, &seq[..=i]).unwrap();
                prop_assert_eq!(&t, &batch);
            }
        }

        #[test]
        fn llr_is_antisymmetric(
            counts in prop::collection::vec(0u64..50, 3),
            (p, q) in (full_support(3), full_support(3)),
        ) {
            let sij = log_likelihood_ratio(&counts, &p, &q).unwrap();
            let sji = log_likelihood_ratio(&counts, &q, &p).unwrap();
            prop_assert!((sij + sji).abs() <= 1e-12 * (1.0 + sij.abs()));
        }
    }
}
