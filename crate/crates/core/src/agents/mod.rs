//! Actor-critic agents that set the RIS from the observed pulse.
//!
//! Every agent maps the normalized pulse (the environment state) to a real
//! action of length `2M` in `[-1, 1]`, read as interleaved real and imaginary
//! parts of the reflection coefficients. Rewards are `eta_n`; they are
//! multiplied by the episode's reward scale when stored for training.

mod buffer;
mod checkpoint;
mod ddpg;
mod sac;
mod schedule;
mod td3;

pub use buffer::{Experience, ReplayBuffer};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use ddpg::Ddpg;
pub use sac::Sac;
pub use schedule::{adaptive_schedule, ScheduleParams, ScheduleState};
pub use td3::Td3;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::C64;
use crate::env::{action_to_gamma, sinr_db, EpisodeConfig, RisConfiguration, RisEnv};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Mlp};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Ddpg,
    Td3,
    Sac,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::Ddpg, AgentKind::Td3, AgentKind::Sac];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Ddpg => "ddpg",
            AgentKind::Td3 => "td3",
            AgentKind::Sac => "sac",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(AgentKind::Ddpg),
            "td3" => Ok(AgentKind::Td3),
            "sac" => Ok(AgentKind::Sac),
            other => Err(Error::Parse(format!("unknown agent {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    /// Training iterations per environment step at episode start.
    pub n_train: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Actor and target update period of TD3, in training iterations.
    pub td3_delay: usize,
    /// Exploration noise std at the first step of an episode.
    pub sigma_a: f64,
    /// Per-step geometric decay of the exploration noise.
    pub tau_d: f64,
    /// Variance of the TD3 target smoothing noise.
    pub sigma_t2: f64,
    /// Bound on the TD3 target smoothing noise.
    pub c_e: f64,
    pub mu_c: f64,
    pub mu_a: f64,
    pub mu_alpha: f64,
    pub tau: f64,
    pub gamma: f64,
    pub init_std: f64,
    /// SAC temperature at episode start.
    pub alpha_init: f64,
    /// Layer normalization after each hidden affine map.
    pub layer_norm: bool,
    pub schedule: ScheduleParams,
}

impl Hyperparams {
    pub fn for_kind(kind: AgentKind) -> Self {
        Hyperparams {
            hidden_width: 512,
            hidden_layers: 2,
            n_train: 4,
            batch_size: 4,
            buffer_capacity: 400,
            td3_delay: 2,
            sigma_a: 0.3,
            tau_d: 0.999,
            sigma_t2: 0.3,
            c_e: 0.5,
            mu_c: 1e-3,
            mu_a: if kind == AgentKind::Ddpg { 1e-3 } else { 2e-3 },
            mu_alpha: 1e-3,
            tau: 0.001,
            gamma: 0.99,
            init_std: 0.1,
            alpha_init: 1.0,
            layer_norm: kind == AgentKind::Ddpg,
            schedule: ScheduleParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive_counts = [
            ("hidden_width", self.hidden_width),
            ("hidden_layers", self.hidden_layers),
            ("n_train", self.n_train),
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("td3_delay", self.td3_delay),
            ("schedule.window", self.schedule.window),
            ("schedule.min_n_train", self.schedule.min_n_train),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                return Err(Error::config(name, "must be at least 1"));
            }
        }
        let positive = [
            ("sigma_t2", self.sigma_t2),
            ("c_e", self.c_e),
            ("mu_c", self.mu_c),
            ("mu_a", self.mu_a),
            ("mu_alpha", self.mu_alpha),
            ("init_std", self.init_std),
            ("alpha_init", self.alpha_init),
            ("tau_d", self.tau_d),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be positive and finite"));
            }
        }
        if !(self.sigma_a >= 0.0) {
            return Err(Error::config("sigma_a", "must be non-negative"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config("tau", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", "must lie in [0, 1]"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::config("buffer_capacity", "must hold at least one batch"));
        }
        Ok(())
    }

    fn hidden(&self) -> Vec<usize> {
        vec![self.hidden_width; self.hidden_layers]
    }
}

/// Exploration noise standard deviation at step `t` of an episode.
pub fn exploration_noise_scale(t: usize, sigma_a: f64, tau_d: f64) -> f64 {
    sigma_a * tau_d.powf(t as f64)
}

/// Losses of one training iteration; absent entries were not updated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Losses {
    pub critic: f64,
    pub actor: Option<f64>,
    pub alpha: Option<f64>,
}

pub trait Agent {
    fn kind(&self) -> AgentKind;

    fn hyperparams(&self) -> &Hyperparams;

    /// Per-episode reset (temperature, optimizer state or weights as the
    /// algorithm requires).
    fn begin_episode(&mut self) -> Result<()>;

    /// Action for `state` at step `t`; always inside `[-1, 1]`.
    fn act(&mut self, state: &[f64], t: usize, rng: &mut SimRng) -> Result<Vec<f64>>;

    /// One training iteration on `batch` with actor learning rate `mu_a`.
    fn train(&mut self, batch: &[&Experience], mu_a: f64, rng: &mut SimRng) -> Result<Losses>;

    /// Training iterations performed since construction.
    fn train_iterations(&self) -> u64;

    /// Networks in a fixed order, for checkpoints.
    fn networks(&self) -> Vec<&Mlp>;

    fn networks_mut(&mut self) -> Vec<&mut Mlp>;

    /// Extra scalar state (SAC log-temperature); empty for the others.
    fn scalars(&self) -> Vec<f64> {
        Vec::new()
    }

    fn set_scalars(&mut self, _values: &[f64]) -> Result<()> {
        Ok(())
    }

    fn set_train_iterations(&mut self, n: u64);

    fn all_finite(&self) -> bool {
        self.networks().iter().all(|n| n.all_finite())
            && self.scalars().iter().all(|v| v.is_finite())
    }
}

/// Builds the agent of `kind` for an environment with the given state and
/// action sizes. `init_rng` seeds (and, for DDPG, re-seeds) the weights.
pub fn make_agent(
    kind: AgentKind,
    state_dim: usize,
    action_dim: usize,
    hp: Hyperparams,
    init_rng: SimRng,
) -> Result<Box<dyn Agent>> {
    hp.validate()?;
    Ok(match kind {
        AgentKind::Ddpg => Box::new(Ddpg::new(state_dim, action_dim, hp, init_rng)?),
        AgentKind::Td3 => Box::new(Td3::new(state_dim, action_dim, hp, init_rng)?),
        AgentKind::Sac => Box::new(Sac::new(state_dim, action_dim, hp, init_rng)?),
    })
}

pub(crate) fn concat(s: &[f64], a: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(s.len() + a.len());
    v.extend_from_slice(s);
    v.extend_from_slice(a);
    v
}

pub(crate) fn new_actor(
    rng: &mut SimRng,
    state_dim: usize,
    out_dim: usize,
    hp: &Hyperparams,
    output: Activation,
) -> Result<Mlp> {
    let mut sizes = vec![state_dim];
    sizes.extend(hp.hidden());
    sizes.push(out_dim);
    Mlp::new(rng, &sizes, hp.layer_norm, output, hp.init_std)
}

pub(crate) fn new_critic(
    rng: &mut SimRng,
    state_dim: usize,
    action_dim: usize,
    hp: &Hyperparams,
) -> Result<Mlp> {
    let mut sizes = vec![state_dim + action_dim];
    sizes.extend(hp.hidden());
    sizes.push(1);
    Mlp::new(rng, &sizes, hp.layer_norm, Activation::Linear, hp.init_std)
}

/// One Adam step of `critic` on the mean squared error to `targets`.
pub(crate) fn fit_critic(
    critic: &mut Mlp,
    opt: &mut Adam,
    inputs: &[Vec<f64>],
    targets: &[f64],
    lr: f64,
) -> Result<f64> {
    let n = inputs.len() as f64;
    let mut grads = vec![0.0; critic.num_params()];
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(targets) {
        let cache = critic.forward(x)?;
        let diff = cache.output()[0] - y;
        loss += diff * diff / n;
        critic.backward(&cache, &[2.0 * diff / n], &mut grads)?;
    }
    opt.step(&mut critic.params, &grads, lr)?;
    Ok(loss)
}

/// One Adam step of a deterministic actor ascending `Q(s, actor(s))`.
pub(crate) fn fit_deterministic_actor(
    actor: &mut Mlp,
    opt: &mut Adam,
    critic: &Mlp,
    states: &[&[f64]],
    lr: f64,
) -> Result<f64> {
    let n = states.len() as f64;
    let sd = actor.input_dim();
    let mut grads = vec![0.0; actor.num_params()];
    let mut loss = 0.0;
    for s in states {
        let ac = actor.forward(s)?;
        let cc = critic.forward(&concat(s, ac.output()))?;
        loss -= cc.output()[0] / n;
        let gin = critic.input_gradient(&cc, &[-1.0 / n])?;
        actor.backward(&ac, &gin[sd..], &mut grads)?;
    }
    opt.step(&mut actor.params, &grads, lr)?;
    Ok(loss)
}

/// `clip(x + N(0, std^2), -1, 1)` elementwise.
pub(crate) fn noisy_clipped<R: Rng + ?Sized>(x: &[f64], std: f64, rng: &mut R) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let e: f64 = if std > 0.0 {
                std * rng.sample::<f64, _>(rand_distr::StandardNormal)
            } else {
                0.0
            };
            (v + e).clamp(-1.0, 1.0)
        })
        .collect()
}

/// Per-step record of one episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub eta: Vec<f64>,
    pub eta_norm: Vec<f64>,
    pub sinr_db: Vec<f64>,
    /// Reflection coefficients applied at the last step.
    pub final_gamma: Vec<C64>,
    pub train_iterations: u64,
    pub schedule_triggers: usize,
}

impl EpisodeTrace {
    /// Mean `eta_n` over the last `n` steps.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let k = n.min(self.eta_norm.len()).max(1);
        self.eta_norm[self.eta_norm.len().saturating_sub(k)..].iter().sum::<f64>() / k as f64
    }
}

/// Runs one episode on the environment's current coherence block.
///
/// The replay buffer and learning schedule start empty; the first state is
/// the pulse observed with all coefficients equal to one. With `train`
/// disabled the agent only acts.
pub fn run_episode(
    agent: &mut dyn Agent,
    env: &mut RisEnv,
    cfg: &EpisodeConfig,
    rng: &mut SimRng,
    train: bool,
) -> Result<EpisodeTrace> {
    cfg.validate()?;
    let hp = agent.hyperparams().clone();
    agent.begin_episode()?;
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity)?;
    let mut sched = ScheduleState::new(&hp.schedule, hp.n_train, hp.mu_a);
    let mut state = env.step(&RisConfiguration::ones(env.elements()))?.state;
    let mut trace = EpisodeTrace::default();
    let start_iters = agent.train_iterations();
    for t in 0..cfg.n_steps {
        let action = agent.act(state.as_slice(), t, rng)?;
        let gamma = action_to_gamma(&action)?;
        let out = env.step(&gamma)?;
        trace.eta.push(out.eta);
        trace.eta_norm.push(out.reward);
        trace.sinr_db.push(sinr_db(&out.pulse.samples, env.noise_power())?);
        if t + 1 == cfg.n_steps {
            trace.final_gamma = gamma.into_inner();
        }
        buffer.push(Experience {
            state: state.0,
            action,
            reward: cfg.reward_scale * out.reward,
            next_state: out.state.0.clone(),
        });
        if train && buffer.len() >= hp.batch_size {
            for _ in 0..sched.n_train {
                let batch = buffer.sample(rng, hp.batch_size)?;
                agent.train(&batch, sched.mu_a, rng)?;
            }
            adaptive_schedule(&mut sched, &hp.schedule, out.reward);
        }
        state = out.state;
    }
    trace.train_iterations = agent.train_iterations() - start_iters;
    trace.schedule_triggers = sched.triggers;
    Ok(trace)
}
