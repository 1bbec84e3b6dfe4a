//! Scenarios, sweeps and their outputs.

mod config;
mod output;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use config::{AgentParams, Algorithm, ScenarioConfig};
pub use output::{
    constellation, emit_cdf, emit_constellation, emit_csv, emit_sweep, empirical_cdf, mean_std, median,
    read_csv, Constellation, RECORD_HEADER,
};

use crate::agents::{make_agent, run_episode, Agent};
use crate::arise::{self, baseline_inverse, baseline_random};
use crate::env::{compute_eta, compute_eta_norm, sinr_db, RisConfiguration};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Episodes averaged over in sweeps use this many trailing records each.
pub const SWEEP_TAIL: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub episode: usize,
    /// DRL step, ARISE iteration (0 = starting configuration) or 0 for a
    /// baseline.
    pub step: usize,
    pub algorithm: Algorithm,
    pub eta: f64,
    pub eta_norm: f64,
    pub sinr_db: f64,
    /// Wall-clock seconds of the whole episode, when timing is on.
    pub wall_time_s: Option<f64>,
}

/// Runs every configured algorithm in turn and concatenates their records.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &alg in &cfg.algorithms {
        out.extend(run_algorithm(cfg, alg)?);
    }
    Ok(out)
}

/// Runs one algorithm for `cfg.episodes` episodes. Each episode after the
/// first moves the UE one walk step and draws new channels. Channel, walk
/// and baseline streams depend only on the seed, so every algorithm sees the
/// same coherence blocks, and ARISE starts from the random-phase baseline
/// of each block.
pub fn run_algorithm(cfg: &ScenarioConfig, alg: Algorithm) -> Result<Vec<RunRecord>> {
    Ok(run_algorithm_with_agent(cfg, alg)?.0)
}

/// [`run_algorithm`], also handing back the trained agent for agent
/// algorithms.
pub fn run_algorithm_with_agent(
    cfg: &ScenarioConfig,
    alg: Algorithm,
) -> Result<(Vec<RunRecord>, Option<Box<dyn Agent>>)> {
    cfg.validate()?;
    let mut env = cfg.environment()?;
    let mut baseline_rng = stream(cfg.seed, Stream::Baseline);
    let mut policy_rng = stream(cfg.seed, Stream::Policy);
    let mut agent = match alg.agent_kind() {
        Some(k) => Some(make_agent(
            k,
            env.state_dim(),
            env.action_dim(),
            cfg.agents.get(k).clone(),
            stream(cfg.seed, Stream::AgentInit),
        )?),
        None => None,
    };
    let mut out = Vec::new();
    for episode in 0..cfg.episodes {
        if episode > 0 {
            env.next_block()?;
        }
        let start = Instant::now();
        let first = out.len();
        let noise = env.noise_power();
        let record = |step, eta, eta_norm, sinr_db| RunRecord {
            episode,
            step,
            algorithm: alg,
            eta,
            eta_norm,
            sinr_db,
            wall_time_s: None,
        };
        match alg {
            Algorithm::RandomPhases | Algorithm::InversePhases => {
                let gamma = if alg == Algorithm::RandomPhases {
                    baseline_random(&mut baseline_rng, env.elements())
                } else {
                    baseline_inverse(&env.channel().h_bru)
                };
                let y = env.noiseless_pulse(&gamma)?.samples;
                out.push(record(0, compute_eta(&y)?, compute_eta_norm(&y)?, sinr_db(&y, noise)?));
            }
            Algorithm::Arise => {
                let init = baseline_random(&mut baseline_rng, env.elements());
                let (_, trace) = arise::run(env.channel(), &cfg.arise, init)?;
                for (i, r) in std::iter::once(&trace.initial).chain(&trace.iterations).enumerate() {
                    out.push(record(i, r.eta, r.eta_norm, r.sinr_db(noise)));
                }
            }
            Algorithm::Ddpg | Algorithm::Td3 | Algorithm::Sac => {
                let agent = agent.as_mut().expect("agent built for agent algorithms");
                let trace = run_episode(agent.as_mut(), &mut env, &cfg.episode, &mut policy_rng, true)?;
                for t in 0..trace.eta.len() {
                    out.push(record(t, trace.eta[t], trace.eta_norm[t], trace.sinr_db[t]));
                }
            }
        }
        if cfg.timing {
            let secs = start.elapsed().as_secs_f64();
            for r in &mut out[first..] {
                r.wall_time_s = Some(secs);
            }
        }
    }
    Ok((out, agent))
}

/// Final configuration reached by `alg` on the environment's current block;
/// used for constellations. Agent algorithms are not covered.
pub fn configuration_for(cfg: &ScenarioConfig, alg: Algorithm) -> Result<RisConfiguration> {
    let env = cfg.environment()?;
    let mut rng = stream(cfg.seed, Stream::Baseline);
    match alg {
        Algorithm::RandomPhases => Ok(baseline_random(&mut rng, env.elements())),
        Algorithm::InversePhases => Ok(baseline_inverse(&env.channel().h_bru)),
        Algorithm::Arise => {
            let init = baseline_random(&mut rng, env.elements());
            Ok(arise::run(env.channel(), &cfg.arise, init)?.0)
        }
        _ => Err(Error::config("algorithm", format!("{alg} has no closed-form configuration"))),
    }
}

/// Mean `eta_n` over the last `tail` records of each episode of `alg`, in
/// episode order.
pub fn episode_tail_means(records: &[RunRecord], alg: Algorithm, tail: usize) -> Vec<f64> {
    let mut per: Vec<Vec<f64>> = Vec::new();
    for r in records.iter().filter(|r| r.algorithm == alg) {
        if per.len() <= r.episode {
            per.resize(r.episode + 1, Vec::new());
        }
        per[r.episode].push(r.eta_norm);
    }
    per.into_iter()
        .filter(|v| !v.is_empty())
        .map(|v| {
            let t = &v[v.len().saturating_sub(tail.max(1))..];
            t.iter().sum::<f64>() / t.len() as f64
        })
        .collect()
}

/// Final `eta_n` of each episode of `alg`.
pub fn final_eta_norms(records: &[RunRecord], alg: Algorithm) -> Vec<f64> {
    episode_tail_means(records, alg, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Number of delayed paths `n_r`.
    DelayedPaths,
    /// Number of RIS elements `M`.
    Elements,
    /// Rician factor.
    Kappa,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::DelayedPaths => "n_r",
            SweepAxis::Elements => "M",
            SweepAxis::Kappa => "kappa",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<()> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::config(self.name(), format!("{value} is not a count")))
            }
        };
        match self {
            SweepAxis::DelayedPaths => cfg.fading.delayed_paths = count()?,
            SweepAxis::Elements => cfg.geometry.elements = count()?,
            SweepAxis::Kappa => cfg.fading.kappa = value,
        }
        Ok(())
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_r" | "nr" => Ok(SweepAxis::DelayedPaths),
            "M" | "m" => Ok(SweepAxis::Elements),
            "kappa" => Ok(SweepAxis::Kappa),
            _ => Err(Error::Parse(format!("unknown sweep axis {s:?} (n_r, M, kappa)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub algorithm: Algorithm,
    /// Mean over episodes of the last-[`SWEEP_TAIL`]-record mean of `eta_n`.
    pub mean: f64,
    pub std: f64,
    pub episodes: usize,
}

/// Aggregates a finished scenario the way a sweep does.
pub fn summarize(
    records: &[RunRecord],
    algorithms: &[Algorithm],
    axis: SweepAxis,
    value: f64,
) -> Result<Vec<SweepRow>> {
    algorithms
        .iter()
        .map(|&alg| {
            let scores = episode_tail_means(records, alg, SWEEP_TAIL);
            let (mean, std) = mean_std(&scores)?;
            Ok(SweepRow {
                axis,
                value,
                algorithm: alg,
                mean,
                std,
                episodes: scores.len(),
            })
        })
        .collect()
}

/// Runs the scenario once per value of `axis`; one row per value and
/// algorithm.
pub fn sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    let mut rows = Vec::new();
    for &v in values {
        let mut c = cfg.clone();
        axis.apply(&mut c, v)?;
        let records = run_scenario(&c)?;
        rows.extend(summarize(&records, &c.algorithms, axis, v)?);
    }
    Ok(rows)
}
