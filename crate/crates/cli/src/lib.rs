//! Library side of the `seqadv` command: configuration, dataset ingestion
//! and the subcommands.

pub mod config;
pub mod error;
pub mod ingest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use seqadv::divopt::ChannelSet;
use seqadv::equilibrium::{compute_b_star, solve_aware_equilibrium, solve_nonaware_adversary, EquilibriumSolution, NonAwareBounds};
use seqadv::prob::Channel;
use seqadv::seqtest::fmt_real;
use seqadv::sim::{alpha_sweep, Scenario};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "seqadv", version, about = "Sequential hypothesis testing against a distorting adversary")]
pub struct Cli {
    /// Override the seed from the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the worst-case perturbations and the limiting exponents.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also search for the best common channel (two hypotheses only).
        #[arg(long)]
        nonaware: bool,
    },
    /// Monte Carlo run at a single significance level.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Log the statistics of the first replication under the first simulated hypothesis.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Monte Carlo runs over the whole α grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Binarize pixel intensities and estimate the two-symbol distribution.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        threshold: u8,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn load_config(path: &Path, seed: Option<u64>) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs one invocation, returning text for stdout.
pub fn run(cli: Cli) -> CliResult<String> {
    let config_path = match &cli.command {
        Command::Solve { config, .. } | Command::Simulate { config, .. } | Command::Sweep { config, .. } => Some(config),
        Command::Ingest { .. } => None,
    };
    if cli.dump_config {
        let path = config_path.ok_or_else(|| CliError::Config("--dump-config needs a subcommand that reads --config".into()))?;
        return Ok(load_config(path, cli.seed)?.dump());
    }

    match cli.command {
        Command::Solve { config, out, nonaware } => {
            let cfg = load_config(&config, cli.seed)?;
            let (csv, summary) = solve(&cfg, nonaware)?;
            match out {
                Some(path) => {
                    write(&path, &csv)?;
                    Ok(summary)
                }
                None => {
                    eprint!("{summary}");
                    Ok(csv)
                }
            }
        }
        Command::Simulate { config, out, trajectory } => {
            let cfg = load_config(&config, cli.seed)?;
            let scenario = cfg.scenario()?;
            if scenario.alpha_grid.len() != 1 {
                return Err(CliError::Config(format!("simulate takes a single alpha, got {}", scenario.alpha_grid.len())));
            }
            let scenario = Scenario::prepare(scenario)?;
            let report = scenario.monte_carlo()?;
            write(&out, &report.to_csv())?;
            if let Some(path) = trajectory {
                let h = scenario.config().true_hypotheses[0];
                let trace = scenario.trace_replication(0, h, 0)?;
                write(&path, &trace.trajectory.expect("trace records a trajectory").to_csv())?;
            }
            Ok(String::new())
        }
        Command::Sweep { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let report = alpha_sweep(cfg.scenario()?)?;
            write(&out, &report.to_csv())?;
            Ok(String::new())
        }
        Command::Ingest { data, threshold, out } => {
            let d = ingest::ingest_histogram(&data, threshold)?;
            write(&out, &ingest::histogram_csv(&d))?;
            Ok(String::new())
        }
    }
}

fn channel_columns(prefix: &str, a: &Channel, header: &mut Vec<String>, values: &mut Vec<String>) {
    for l in 0..a.size() {
        for j in 0..a.size() {
            header.push(format!("{prefix}_{l}_{j}"));
            values.push(fmt_real(a.get(l, j)));
        }
    }
}

/// One-row CSV and a readable summary of the equilibrium.
pub fn solve(cfg: &RunConfig, nonaware: bool) -> CliResult<(String, String)> {
    let spec = cfg.game_spec()?;
    let opts = cfg.solver_options();
    let sol: EquilibriumSolution = solve_aware_equilibrium(&spec, &opts)?;
    let b_star = compute_b_star(&spec, &opts)?;

    let mut header = vec!["payoff".to_string()];
    let mut values = vec![fmt_real(sol.payoff)];
    for (i, e) in sol.exponents.iter().enumerate() {
        header.push(format!("exponent_{i}"));
        values.push(fmt_real(*e));
    }
    header.push("b_star".into());
    values.push(fmt_real(b_star));
    for (i, q) in sol.q_star.iter().enumerate() {
        for (s, v) in q.probs().iter().enumerate() {
            header.push(format!("q_star_{i}_{s}"));
            values.push(fmt_real(*v));
        }
    }
    for (i, w) in sol.witnesses.iter().enumerate() {
        channel_columns(&format!("witness_{i}"), w, &mut header, &mut values);
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "payoff {}", fmt_real(sol.payoff));
    for (i, (q, e)) in sol.q_star.iter().zip(&sol.exponents).enumerate() {
        let q: Vec<String> = q.probs().iter().map(|v| fmt_real(*v)).collect();
        let _ = writeln!(summary, "hypothesis {i}: worst-case output ({}), exponent {}", q.join(", "), fmt_real(*e));
    }
    let _ = writeln!(summary, "b_star {}", fmt_real(b_star));
    if !sol.converged {
        let _ = writeln!(summary, "warning: an inner solve hit the iteration limit");
    }

    if nonaware {
        let h = spec.hypotheses();
        if h.len() != 2 {
            return Err(CliError::Config("--nonaware needs exactly two hypotheses".into()));
        }
        let lambda = spec.weights()[1] / spec.weights()[0];
        let adv = solve_nonaware_adversary(&h[0], &h[1], spec.delta(), spec.measure(), lambda, spec.floor(), &opts)?;
        let set = ChannelSet::common(h[0].clone(), h[1].clone(), spec.delta(), spec.measure(), spec.floor())?;
        let bounds = NonAwareBounds::evaluate(&set, &adv.channel, lambda, &opts)?;
        header.push("nonaware_achievable".into());
        values.push(fmt_real(bounds.achievable));
        header.push("nonaware_converse".into());
        values.push(fmt_real(bounds.converse));
        channel_columns("nonaware_channel", &adv.channel, &mut header, &mut values);
        let _ = writeln!(
            summary,
            "common channel: achievable {}, converse {} ({} starts)",
            fmt_real(bounds.achievable),
            fmt_real(bounds.converse),
            adv.starts
        );
    }

    Ok((format!("{}\n{}\n", header.join(","), values.join(",")), summary))
}
