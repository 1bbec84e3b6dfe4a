//! Scenario configuration, stored as TOML.
//!
//! Every section is optional and missing keys take their defaults. Agent
//! sections (`[agents.ddpg]`, `[agents.td3]`, `[agents.sac]`) are merged onto
//! the defaults of their own algorithm.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, Hyperparams};
use crate::arise::AriseConfig;
use crate::channel::{ChannelModel, FadingParams, Geometry};
use crate::env::{EpisodeConfig, RisEnv};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Arise,
    Ddpg,
    Td3,
    Sac,
    RandomPhases,
    InversePhases,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Arise,
        Algorithm::Ddpg,
        Algorithm::Td3,
        Algorithm::Sac,
        Algorithm::RandomPhases,
        Algorithm::InversePhases,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Arise => "arise",
            Algorithm::Ddpg => "ddpg",
            Algorithm::Td3 => "td3",
            Algorithm::Sac => "sac",
            Algorithm::RandomPhases => "random-phases",
            Algorithm::InversePhases => "inverse-phases",
        }
    }

    pub fn agent_kind(self) -> Option<AgentKind> {
        match self {
            Algorithm::Ddpg => Some(AgentKind::Ddpg),
            Algorithm::Td3 => Some(AgentKind::Td3),
            Algorithm::Sac => Some(AgentKind::Sac),
            _ => None,
        }
    }
}

impl From<AgentKind> for Algorithm {
    fn from(k: AgentKind) -> Self {
        match k {
            AgentKind::Ddpg => Algorithm::Ddpg,
            AgentKind::Td3 => Algorithm::Td3,
            AgentKind::Sac => Algorithm::Sac,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    #[serde(default = "ddpg_defaults")]
    pub ddpg: Hyperparams,
    #[serde(default = "td3_defaults")]
    pub td3: Hyperparams,
    #[serde(default = "sac_defaults")]
    pub sac: Hyperparams,
}

fn ddpg_defaults() -> Hyperparams {
    Hyperparams::for_kind(AgentKind::Ddpg)
}

fn td3_defaults() -> Hyperparams {
    Hyperparams::for_kind(AgentKind::Td3)
}

fn sac_defaults() -> Hyperparams {
    Hyperparams::for_kind(AgentKind::Sac)
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            ddpg: ddpg_defaults(),
            td3: td3_defaults(),
            sac: sac_defaults(),
        }
    }
}

impl AgentParams {
    pub fn get(&self, kind: AgentKind) -> &Hyperparams {
        match kind {
            AgentKind::Ddpg => &self.ddpg,
            AgentKind::Td3 => &self.td3,
            AgentKind::Sac => &self.sac,
        }
    }

    pub fn get_mut(&mut self, kind: AgentKind) -> &mut Hyperparams {
        match kind {
            AgentKind::Ddpg => &mut self.ddpg,
            AgentKind::Td3 => &mut self.td3,
            AgentKind::Sac => &mut self.sac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Master seed for every random stream.
    pub seed: u64,
    pub episodes: usize,
    pub algorithms: Vec<Algorithm>,
    /// Receiver noise on or off.
    pub noise: bool,
    /// Record wall-clock seconds per episode. Off keeps outputs reproducible.
    pub timing: bool,
    pub geometry: Geometry,
    pub fading: FadingParams,
    pub episode: EpisodeConfig,
    pub arise: AriseConfig,
    pub agents: AgentParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            episodes: 10,
            algorithms: vec![Algorithm::Arise, Algorithm::RandomPhases, Algorithm::InversePhases],
            noise: true,
            timing: false,
            geometry: Geometry::default(),
            fading: FadingParams::default(),
            episode: EpisodeConfig::default(),
            arise: AriseConfig::default(),
            agents: AgentParams::default(),
        }
    }
}

fn in_section(section: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{section}.{field}"),
            message,
        },
        other => Error::Config {
            field: section.to_string(),
            message: other.to_string(),
        },
    })
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ScenarioConfig {
    /// Small-array defaults for agent runs on one core: `M = 16`,
    /// `n_r = 4`, 128-wide hidden layers.
    pub fn desk_scale() -> Self {
        let mut c = ScenarioConfig::default();
        c.geometry.elements = 16;
        c.fading.delayed_paths = 4;
        for k in AgentKind::ALL {
            c.agents.get_mut(k).hidden_width = 128;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "must name at least one algorithm"));
        }
        in_section("geometry", self.geometry.validate())?;
        in_section("fading", self.fading.validate())?;
        in_section("episode", self.episode.validate())?;
        in_section("arise", self.arise.validate())?;
        for k in AgentKind::ALL {
            in_section(&format!("agents.{}", k.name()), self.agents.get(k).validate())?;
        }
        if !self.episode.walk_bounds.contains(self.geometry.ue) {
            return Err(Error::config("geometry.ue", "start position outside episode.walk_bounds"));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        if let Some(toml::Value::Table(agents)) = table.get_mut("agents") {
            for k in AgentKind::ALL {
                if let Some(toml::Value::Table(given)) = agents.remove(k.name()) {
                    let mut base = toml::Table::try_from(Hyperparams::for_kind(k))
                        .map_err(|e| Error::Parse(e.to_string()))?;
                    merge(&mut base, given);
                    agents.insert(k.name().to_string(), toml::Value::Table(base));
                }
            }
        }
        let cfg: ScenarioConfig = table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn render(&self) -> Result<String> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed", "TOML integers hold at most 2^63 - 1"));
        }
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Environment for this scenario, seeded by the master seed.
    pub fn environment(&self) -> Result<RisEnv> {
        let model = ChannelModel::new(self.geometry.clone(), self.fading.clone())?;
        let mut env = RisEnv::new(model, self.episode.clone(), self.seed)?;
        if !self.noise {
            env.set_noise_power(0.0)?;
        }
        Ok(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_round_trip() {
        let c = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::parse(&c.render().unwrap()).unwrap(), c);
        let d = ScenarioConfig::desk_scale();
        assert_eq!(ScenarioConfig::parse(&d.render().unwrap()).unwrap(), d);
    }

    #[test]
    fn defaults_match_reference_scenario() {
        let c = ScenarioConfig::default();
        assert_eq!(c.geometry.bs, [0.0, 0.0]);
        assert_eq!(c.geometry.ris, [10.0, 0.0]);
        assert_eq!(c.geometry.ue, [-20.0, -20.0]);
        assert_eq!(c.geometry.elements, 100);
        assert_eq!(c.geometry.element_spacing, 0.02);
        assert_eq!(c.fading.gain_bru_db, -43.0);
        assert_eq!(c.fading.noise_dbm, -96.0);
        assert_eq!(c.episode.n_steps, 2000);
    }

    #[test]
    fn partial_sections_fill_in_defaults() {
        let c = ScenarioConfig::parse(
            "seed = 3\nalgorithms = [\"sac\"]\n[fading]\nkappa = 2.0\n[agents.sac]\nhidden_width = 64\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.algorithms, vec![Algorithm::Sac]);
        assert_eq!(c.fading.kappa, 2.0);
        assert_eq!(c.fading.delayed_paths, FadingParams::default().delayed_paths);
        assert_eq!(c.agents.sac.hidden_width, 64);
        assert_eq!(c.agents.sac.mu_a, Hyperparams::for_kind(AgentKind::Sac).mu_a);
        assert_eq!(c.agents.ddpg, Hyperparams::for_kind(AgentKind::Ddpg));
    }

    #[test]
    fn errors_name_the_field() {
        let e = ScenarioConfig::parse("[fading]\nkappa = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("fading.kappa"), "{e}");
        let e = ScenarioConfig::parse("[agents.td3]\nbatch_size = 0\n").unwrap_err();
        assert!(e.to_string().contains("agents.td3"), "{e}");
        assert!(ScenarioConfig::parse("[fading]\nkapa = 1.0\n").is_err());
        assert!(ScenarioConfig::parse("algorithms = [\"bogus\"]\n").is_err());
        assert!(ScenarioConfig::parse("episodes = 0\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn render_parse_identity(
            seed in 0u64..=i64::MAX as u64,
            episodes in 1usize..50,
            kappa in 0.0f64..100.0,
            n_r in 0usize..12,
            m in 1usize..200,
            alpha_s in 1e-3f64..2.0,
            width in 1usize..600,
            noise: bool,
            pick in proptest::collection::vec(0usize..6, 1..6),
        ) {
            let mut c = ScenarioConfig::default();
            c.seed = seed;
            c.episodes = episodes;
            c.fading.kappa = kappa;
            c.fading.delayed_paths = n_r;
            c.geometry.elements = m;
            c.arise.alpha_s = alpha_s;
            c.agents.td3.hidden_width = width;
            c.noise = noise;
            c.algorithms = pick.into_iter().map(|i| Algorithm::ALL[i]).collect();
            prop_assert_eq!(ScenarioConfig::parse(&c.render().unwrap()).unwrap(), c);
        }
    }
}
