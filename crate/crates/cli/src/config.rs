//! Flat `key = value` run configuration.
//!
//! ```text
//! # Bernoulli pair
//! hypothesis_0 = 0.38, 0.62
//! hypothesis_1 = 0.5, 0.5
//! delta = 0.05
//! log_inv_alpha_grid = 4, 8, 12
//! replications = 500
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use seqadv::divopt::SolverOptions;
use seqadv::equilibrium::GameSpec;
use seqadv::prob::{Channel, Distribution, DistortionMeasure, DEFAULT_SUPPORT_FLOOR};
use seqadv::seqtest::{DEFAULT_CAP, DEFAULT_ZETA};
use seqadv::sim::{Adversary, ScenarioConfig, TestKind};

use crate::error::{CliError, CliResult};

/// How the significance levels were given.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSource {
    Single(f64),
    Grid(Vec<f64>),
    /// Values of `log(1/α)`.
    LogInverse(Vec<f64>),
}

impl AlphaSource {
    pub fn alphas(&self) -> Vec<f64> {
        match self {
            AlphaSource::Single(a) => vec![*a],
            AlphaSource::Grid(g) => g.clone(),
            AlphaSource::LogInverse(l) => l.iter().map(|v| (-v).exp()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryKind {
    Equilibrium,
    Channels,
    Common,
    NonAwareOptimal,
}

impl AdversaryKind {
    fn name(self) -> &'static str {
        match self {
            AdversaryKind::Equilibrium => "equilibrium",
            AdversaryKind::Channels => "channels",
            AdversaryKind::Common => "common",
            AdversaryKind::NonAwareOptimal => "nonaware_optimal",
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "equilibrium" => Ok(AdversaryKind::Equilibrium),
            "channels" => Ok(AdversaryKind::Channels),
            "common" => Ok(AdversaryKind::Common),
            "nonaware_optimal" => Ok(AdversaryKind::NonAwareOptimal),
            other => Err(format!("unknown adversary '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hypotheses: Vec<Vec<f64>>,
    /// Rescale each hypothesis to sum to one instead of rejecting it.
    pub renormalize: bool,
    pub delta: f64,
    pub measure: DistortionMeasure,
    pub weights: Option<Vec<f64>>,
    pub support_floor: f64,
    pub zeta: f64,
    pub alpha: Option<AlphaSource>,
    pub replications: u64,
    pub seed: u64,
    pub cap: u64,
    pub stride: u64,
    pub true_hypotheses: Option<Vec<usize>>,
    pub test: TestKind,
    pub adversary: AdversaryKind,
    /// Row-major `K x K` entries keyed by hypothesis.
    pub adversary_channels: BTreeMap<usize, Vec<f64>>,
    pub common_channel: Option<Vec<f64>>,
    pub solver_tolerance: Option<f64>,
    pub solver_max_iterations: Option<usize>,
}

impl RunConfig {
    fn empty() -> Self {
        Self {
            hypotheses: Vec::new(),
            renormalize: false,
            delta: f64::NAN,
            measure: DistortionMeasure::TvL1,
            weights: None,
            support_floor: DEFAULT_SUPPORT_FLOOR,
            zeta: DEFAULT_ZETA,
            alpha: None,
            replications: 1000,
            seed: 0,
            cap: DEFAULT_CAP,
            stride: 1,
            true_hypotheses: None,
            test: TestKind::Aware,
            adversary: AdversaryKind::Equilibrium,
            adversary_channels: BTreeMap::new(),
            common_channel: None,
            solver_tolerance: None,
            solver_max_iterations: None,
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::empty();
        let mut hyps: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut have_delta = false;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| CliError::ConfigLine { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(err(format!("expected 'key = value', got '{content}'")));
            };
            let (key, value) = (key.trim(), value.trim());
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(err(format!("'{key}' already set on line {first}")));
            }
            let alpha_clash = |cfg: &RunConfig| {
                if cfg.alpha.is_some() {
                    Err(err("only one of alpha, alpha_grid, log_inv_alpha_grid may be set".into()))
                } else {
                    Ok(())
                }
            };
            match key {
                "renormalize" => cfg.renormalize = scalar(value).map_err(err)?,
                "delta" => {
                    cfg.delta = scalar(value).map_err(err)?;
                    have_delta = true;
                }
                "measure" => cfg.measure = value.parse().map_err(|e: seqadv::error::Error| err(e.to_string()))?,
                "weights" => cfg.weights = Some(list(value).map_err(err)?),
                "support_floor" => cfg.support_floor = scalar(value).map_err(err)?,
                "zeta" => cfg.zeta = scalar(value).map_err(err)?,
                "alpha" => {
                    alpha_clash(&cfg)?;
                    cfg.alpha = Some(AlphaSource::Single(scalar(value).map_err(err)?));
                }
                "alpha_grid" => {
                    alpha_clash(&cfg)?;
                    cfg.alpha = Some(AlphaSource::Grid(list(value).map_err(err)?));
                }
                "log_inv_alpha_grid" => {
                    alpha_clash(&cfg)?;
                    cfg.alpha = Some(AlphaSource::LogInverse(list(value).map_err(err)?));
                }
                "replications" => cfg.replications = scalar(value).map_err(err)?,
                "seed" => cfg.seed = scalar(value).map_err(err)?,
                "cap" => cfg.cap = scalar(value).map_err(err)?,
                "stride" => cfg.stride = scalar(value).map_err(err)?,
                "true_hypotheses" => cfg.true_hypotheses = Some(list(value).map_err(err)?),
                "test" => {
                    cfg.test = match value {
                        "aware" => TestKind::Aware,
                        "nonaware" => TestKind::NonAware,
                        other => return Err(err(format!("unknown test '{other}'"))),
                    }
                }
                "adversary" => cfg.adversary = value.parse().map_err(err)?,
                "common_channel" => cfg.common_channel = Some(list(value).map_err(err)?),
                "solver_tolerance" => cfg.solver_tolerance = Some(scalar(value).map_err(err)?),
                "solver_max_iterations" => cfg.solver_max_iterations = Some(scalar(value).map_err(err)?),
                _ => {
                    if let Some(i) = indexed(key, "hypothesis_") {
                        hyps.insert(i, list(value).map_err(err)?);
                    } else if let Some(i) = indexed(key, "adversary_channel_") {
                        cfg.adversary_channels.insert(i, list(value).map_err(err)?);
                    } else {
                        return Err(err(format!("unknown key '{key}'")));
                    }
                }
            }
        }

        if hyps.len() < 2 {
            return Err(CliError::Config("at least hypothesis_0 and hypothesis_1 are required".into()));
        }
        if let Some((_, &i)) = hyps.keys().enumerate().find(|&(pos, &i)| pos != i) {
            return Err(CliError::Config(format!("hypothesis indices must run 0..{}, found hypothesis_{i}", hyps.len())));
        }
        if !have_delta {
            return Err(CliError::Config("missing required key 'delta'".into()));
        }
        cfg.hypotheses = hyps.into_values().collect();
        Ok(cfg)
    }

    /// Text that [`RunConfig::parse`] maps back to `self`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, h) in self.hypotheses.iter().enumerate() {
            let _ = writeln!(out, "hypothesis_{i} = {}", join(h));
        }
        if self.renormalize {
            out.push_str("renormalize = true\n");
        }
        let _ = writeln!(out, "delta = {}", self.delta);
        let _ = writeln!(out, "measure = {}", self.measure.name());
        if let Some(w) = &self.weights {
            let _ = writeln!(out, "weights = {}", join(w));
        }
        let _ = writeln!(out, "support_floor = {}", self.support_floor);
        let _ = writeln!(out, "zeta = {}", self.zeta);
        match &self.alpha {
            Some(AlphaSource::Single(a)) => {
                let _ = writeln!(out, "alpha = {a}");
            }
            Some(AlphaSource::Grid(g)) => {
                let _ = writeln!(out, "alpha_grid = {}", join(g));
            }
            Some(AlphaSource::LogInverse(l)) => {
                let _ = writeln!(out, "log_inv_alpha_grid = {}", join(l));
            }
            None => {}
        }
        let _ = writeln!(out, "replications = {}", self.replications);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "cap = {}", self.cap);
        let _ = writeln!(out, "stride = {}", self.stride);
        if let Some(t) = &self.true_hypotheses {
            let _ = writeln!(out, "true_hypotheses = {}", join(t));
        }
        let test = match self.test {
            TestKind::Aware => "aware",
            TestKind::NonAware => "nonaware",
        };
        let _ = writeln!(out, "test = {test}");
        let _ = writeln!(out, "adversary = {}", self.adversary.name());
        for (i, c) in &self.adversary_channels {
            let _ = writeln!(out, "adversary_channel_{i} = {}", join(c));
        }
        if let Some(c) = &self.common_channel {
            let _ = writeln!(out, "common_channel = {}", join(c));
        }
        if let Some(t) = self.solver_tolerance {
            let _ = writeln!(out, "solver_tolerance = {t}");
        }
        if let Some(n) = self.solver_max_iterations {
            let _ = writeln!(out, "solver_max_iterations = {n}");
        }
        out
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut opts = SolverOptions::default();
        if let Some(t) = self.solver_tolerance {
            opts.tolerance = t;
        }
        if let Some(n) = self.solver_max_iterations {
            opts.max_iterations = n;
        }
        opts
    }

    pub fn distributions(&self) -> CliResult<Vec<Distribution>> {
        let build = |h: &Vec<f64>| if self.renormalize { Distribution::normalize(h) } else { Distribution::new(h.clone()) };
        Ok(self.hypotheses.iter().map(build).collect::<seqadv::error::Result<_>>()?)
    }

    pub fn game_spec(&self) -> CliResult<GameSpec> {
        let hyps = self.distributions()?;
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; hyps.len()]);
        Ok(GameSpec::with_options(hyps, self.delta, self.measure, weights, self.support_floor, &self.solver_options())?)
    }

    fn channel(&self, entries: &[f64], what: &str) -> CliResult<Channel> {
        let k = self.hypotheses[0].len();
        if entries.len() != k * k {
            return Err(CliError::Config(format!("{what} needs {} entries, got {}", k * k, entries.len())));
        }
        Ok(Channel::new(k, entries.to_vec())?)
    }

    pub fn scenario(&self) -> CliResult<ScenarioConfig> {
        let alpha = self.alpha.as_ref().ok_or_else(|| CliError::Config("one of alpha, alpha_grid, log_inv_alpha_grid is required".into()))?;
        let spec = self.game_spec()?;
        let m = spec.num_hypotheses();
        let adversary = match self.adversary {
            AdversaryKind::Equilibrium => Adversary::Equilibrium,
            AdversaryKind::NonAwareOptimal => Adversary::NonAwareOptimal,
            AdversaryKind::Common => {
                let c = self.common_channel.as_ref().ok_or_else(|| CliError::Config("adversary = common needs common_channel".into()))?;
                Adversary::Common(self.channel(c, "common_channel")?)
            }
            AdversaryKind::Channels => {
                let chs = (0..m)
                    .map(|i| {
                        let c = self
                            .adversary_channels
                            .get(&i)
                            .ok_or_else(|| CliError::Config(format!("adversary = channels needs adversary_channel_{i}")))?;
                        self.channel(c, &format!("adversary_channel_{i}"))
                    })
                    .collect::<CliResult<_>>()?;
                Adversary::PerHypothesis(chs)
            }
        };
        let mut sc = ScenarioConfig::new(spec, alpha.alphas(), self.replications, self.seed);
        if let Some(t) = &self.true_hypotheses {
            sc.true_hypotheses = t.clone();
        }
        sc.adversary = adversary;
        sc.test = self.test;
        sc.cap = self.cap;
        sc.stride = self.stride;
        sc.zeta = self.zeta;
        sc.solver = self.solver_options();
        Ok(sc)
    }
}

fn indexed(key: &str, prefix: &str) -> Option<usize> {
    let rest = key.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) || (rest.len() > 1 && rest.starts_with('0')) {
        return None;
    }
    rest.parse().ok()
}

fn scalar<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse '{value}'"))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    if value.is_empty() {
        return Err("empty list".into());
    }
    value.split(',').map(|v| scalar(v.trim())).collect()
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const BERNOULLI: &str = "\
# two coins
hypothesis_0 = 0.38, 0.62
hypothesis_1 = 0.5, 0.5   # fair
delta = 0.05
log_inv_alpha_grid = 4, 8
replications = 10
";

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::parse(BERNOULLI).unwrap();
        assert_eq!(c.hypotheses, vec![vec![0.38, 0.62], vec![0.5, 0.5]]);
        assert_eq!(c.measure, DistortionMeasure::TvL1);
        assert_eq!(c.replications, 10);
        assert_eq!(c.zeta, 0.85);
        let a = c.alpha.as_ref().unwrap().alphas();
        assert!((a[0] - (-4f64).exp()).abs() < 1e-18);
    }

    #[test]
    fn dump_round_trips() {
        let mut c = RunConfig::parse(BERNOULLI).unwrap();
        c.weights = Some(vec![1.0, 0.1 + 0.2]);
        c.common_channel = Some(vec![0.9, 0.1, 1.0 / 3.0, 2.0 / 3.0]);
        c.solver_tolerance = Some(1e-11);
        c.true_hypotheses = Some(vec![1]);
        assert_eq!(RunConfig::parse(&c.dump()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            format!("{BERNOULLI}colour = red\n"),
            format!("{BERNOULLI}delta = 0.1\n"),
            format!("{BERNOULLI}alpha = 0.1\n"),
            "hypothesis_0 = 0.5, 0.5\ndelta = 0.1\n".to_string(),
            "hypothesis_0 = 0.5, 0.5\nhypothesis_2 = 0.1, 0.9\ndelta = 0.1\n".to_string(),
            "hypothesis_0 = 0.5, 0.5\nhypothesis_1 = 0.1, 0.9\n".to_string(),
            format!("{BERNOULLI}stride\n"),
            format!("{BERNOULLI}seed = -1\n"),
        ];
        for text in &bad {
            let e = RunConfig::parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn renormalization_is_opt_in() {
        let text = "hypothesis_0 = 0.9061, 0.09395\nhypothesis_1 = 0.8481, 0.1519\ndelta = 0.001\nmeasure = kl\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.game_spec().unwrap_err().exit_code(), 2);
        let c = RunConfig::parse(&format!("{text}renormalize = true\n")).unwrap();
        let spec = c.game_spec().unwrap();
        assert!((spec.hypotheses()[0][0] - 0.9060547).abs() < 1e-7);
    }

    #[test]
    fn scenario_needs_alpha_and_channels() {
        let c = RunConfig::parse("hypothesis_0 = 0.38, 0.62\nhypothesis_1 = 0.5, 0.5\ndelta = 0.05\n").unwrap();
        assert!(matches!(c.scenario(), Err(CliError::Config(_))));
        let c = RunConfig::parse(&format!("{BERNOULLI}adversary = channels\nadversary_channel_0 = 1, 0, 0, 1\n")).unwrap();
        assert!(matches!(c.scenario(), Err(CliError::Config(_))));
        let c = RunConfig::parse(&format!("{BERNOULLI}adversary = common\ncommon_channel = 1, 0, 0, 1\n")).unwrap();
        assert!(matches!(c.scenario().unwrap().adversary, Adversary::Common(_)));
    }
}
