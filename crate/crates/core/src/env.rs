//! Episodic RIS environment: metrics, state encoding, action mapping and the
//! UE random walk.

use rand::Rng;

use crate::channel::{
    complex_gaussian, received_pulse, ChannelModel, ChannelRealization, PulseResponse, C64,
};
use crate::error::{Error, Result};
use crate::rng::{stream, SimRng, Stream};

/// Passive reflection coefficients, one per element, each of unit magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct RisConfiguration(Vec<C64>);

impl RisConfiguration {
    pub fn ones(elements: usize) -> Self {
        RisConfiguration(vec![C64::new(1.0, 0.0); elements])
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        RisConfiguration(phases.iter().map(|&p| C64::from_polar(1.0, p)).collect())
    }

    /// Projects arbitrary coefficients onto the unit circle. Zeros map to 1.
    pub fn normalized(gamma: Vec<C64>) -> Self {
        RisConfiguration(gamma.into_iter().map(unit).collect())
    }

    /// Wraps coefficients without normalizing. Intended for tests that need
    /// to bypass passivity (e.g. switching the RIS off with zeros).
    pub fn from_raw(gamma: Vec<C64>) -> Self {
        RisConfiguration(gamma)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn phases(&self) -> Vec<f64> {
        self.0.iter().map(|g| g.arg()).collect()
    }
}

fn unit(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 || !r.is_finite() {
        C64::new(1.0, 0.0)
    } else {
        z / r
    }
}

/// Observation fed to the agents: interleaved `Re/Im` of the pulse scaled to
/// `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState(pub Vec<f64>);

impl EnvState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Axis-aligned rectangle confining the UE.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkBounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for WalkBounds {
    fn default() -> Self {
        WalkBounds {
            min: [-100.0, -100.0],
            max: [-10.0, 100.0],
        }
    }
}

impl WalkBounds {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub n_steps: usize,
    pub walk_bounds: WalkBounds,
    pub walk_max_step: f64,
    pub reward_scale: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            n_steps: 2000,
            walk_bounds: WalkBounds::default(),
            walk_max_step: 20.0,
            reward_scale: 100.0,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::config("n_steps", "must be at least 1"));
        }
        let b = &self.walk_bounds;
        if !(b.min[0] < b.max[0] && b.min[1] < b.max[1]) {
            return Err(Error::config("walk_bounds", "min must be below max"));
        }
        if !(self.walk_max_step >= 0.0) {
            return Err(Error::config("walk_max_step", "must be non-negative"));
        }
        if !(self.reward_scale > 0.0) {
            return Err(Error::config("reward_scale", "must be positive"));
        }
        Ok(())
    }
}

fn check_nonempty(y: &[C64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Degenerate("empty pulse"));
    }
    Ok(())
}

/// `sgn(Re y0) (Re y0)^2 - sum_{k>=1} |y_k|^2`.
pub fn compute_eta(y: &[C64]) -> Result<f64> {
    check_nonempty(y)?;
    let r = y[0].re;
    let isi: f64 = y[1..].iter().map(|v| v.norm_sqr()).sum();
    Ok(r.signum() * r * r - isi)
}

/// `eta` divided by the pulse energy; always in `[-1, 1]`.
pub fn compute_eta_norm(y: &[C64]) -> Result<f64> {
    let eta = compute_eta(y)?;
    let energy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    if !(energy > 0.0) {
        return Err(Error::Degenerate("all-zero pulse"));
    }
    Ok((eta / energy).clamp(-1.0, 1.0))
}

pub fn state_from_pulse(y: &[C64]) -> Result<EnvState> {
    check_nonempty(y)?;
    let mut v: Vec<f64> = y.iter().flat_map(|c| [c.re, c.im]).collect();
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(peak > 0.0) {
        return Err(Error::Degenerate("all-zero pulse"));
    }
    v.iter_mut().for_each(|x| *x /= peak);
    Ok(EnvState(v))
}

/// Pairs `(a[2m], a[2m+1])` become the normalized coefficient `Gamma_m`.
pub fn action_to_gamma(a: &[f64]) -> Result<RisConfiguration> {
    if !a.len().is_multiple_of(2) {
        return Err(Error::Dimension {
            context: "action vector",
            expected: a.len() + 1,
            got: a.len(),
        });
    }
    Ok(RisConfiguration::normalized(
        a.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect(),
    ))
}

/// Main-tap power over ISI plus noise, in dB; `+inf` for a clean pulse.
pub fn sinr_db(y: &[C64], noise_power: f64) -> Result<f64> {
    check_nonempty(y)?;
    let signal = y[0].re * y[0].re;
    let denom: f64 = y[1..].iter().map(|v| v.norm_sqr()).sum::<f64>() + noise_power;
    if !(denom > 0.0) {
        if signal > 0.0 {
            return Ok(f64::INFINITY);
        }
        return Err(Error::Degenerate("zero signal and interference-plus-noise power"));
    }
    Ok(10.0 * (signal / denom).log10())
}

/// Unit-energy QPSK symbols `(+-1 +- j)/sqrt(2)`.
pub fn qpsk_symbol<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let bits: u8 = rng.random_range(0..4);
    C64::new(
        if bits & 1 == 0 { s } else { -s },
        if bits & 2 == 0 { s } else { -s },
    )
}

/// Symbol-rate receiver samples for a random QPSK stream sent through the
/// taps `y`. The first `L` outputs (partial convolution) are dropped, so
/// `n_symbols - L` samples are returned.
pub fn qpsk_constellation<R: Rng + ?Sized>(
    y: &[C64],
    n_symbols: usize,
    noise_power: f64,
    rng: &mut R,
) -> Result<Vec<C64>> {
    check_nonempty(y)?;
    let l = y.len() - 1;
    if n_symbols < y.len() {
        return Err(Error::InsufficientData {
            have: n_symbols,
            need: y.len(),
        });
    }
    if !(noise_power >= 0.0) {
        return Err(Error::Domain(format!("noise power {noise_power} is negative")));
    }
    let symbols: Vec<C64> = (0..n_symbols).map(|_| qpsk_symbol(rng)).collect();
    let mut out = Vec::with_capacity(n_symbols - l);
    for n in l..n_symbols {
        let mut r: C64 = (0..=l).map(|k| y[k] * symbols[n - k]).sum();
        if noise_power > 0.0 {
            r += complex_gaussian(rng, noise_power);
        }
        out.push(r);
    }
    Ok(out)
}

/// Moves `pos` by a uniform direction and a uniform distance in
/// `[0, max_step]`, redrawing until the result lies inside `bounds`.
pub fn random_walk_step<R: Rng + ?Sized>(
    rng: &mut R,
    pos: [f64; 2],
    bounds: &WalkBounds,
    max_step: f64,
) -> Result<[f64; 2]> {
    if !bounds.contains(pos) {
        return Err(Error::Domain(format!("UE position {pos:?} outside walk bounds")));
    }
    loop {
        let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let d = if max_step > 0.0 {
            rng.random_range(0.0..=max_step)
        } else {
            0.0
        };
        let next = [pos[0] + d * angle.cos(), pos[1] + d * angle.sin()];
        if bounds.contains(next) {
            return Ok(next);
        }
    }
}

/// One step of the environment.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: EnvState,
    /// Unscaled `eta_n`.
    pub reward: f64,
    pub eta: f64,
    pub pulse: PulseResponse,
}

/// Channel model plus the current coherence block, UE position and noise
/// stream. Each coherence block is drawn from the channel stream; receiver
/// noise and the random walk have their own streams.
#[derive(Debug, Clone)]
pub struct RisEnv {
    model: ChannelModel,
    episode: EpisodeConfig,
    channel: ChannelRealization,
    channel_rng: SimRng,
    noise_rng: SimRng,
    walk_rng: SimRng,
    noise_power: f64,
}

impl RisEnv {
    pub fn new(model: ChannelModel, episode: EpisodeConfig, seed: u64) -> Result<Self> {
        episode.validate()?;
        if !episode.walk_bounds.contains(model.geometry().ue) {
            return Err(Error::config("ue", "start position outside walk bounds"));
        }
        let mut channel_rng = stream(seed, Stream::Channel);
        let channel = model.sample(&mut channel_rng);
        let noise_power = model.fading().noise_power();
        Ok(RisEnv {
            model,
            episode,
            channel,
            channel_rng,
            noise_rng: stream(seed, Stream::Noise),
            walk_rng: stream(seed, Stream::Walk),
            noise_power,
        })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn episode_config(&self) -> &EpisodeConfig {
        &self.episode
    }

    pub fn channel(&self) -> &ChannelRealization {
        &self.channel
    }

    /// Replaces the active coherence block (e.g. a hand-built channel).
    pub fn set_channel(&mut self, ch: ChannelRealization) -> Result<()> {
        if ch.elements() != self.elements() {
            return Err(Error::Dimension {
                context: "channel elements",
                expected: self.elements(),
                got: ch.elements(),
            });
        }
        self.channel = ch;
        Ok(())
    }

    pub fn elements(&self) -> usize {
        self.model.geometry().elements
    }

    pub fn taps(&self) -> usize {
        self.model.fading().taps()
    }

    pub fn state_dim(&self) -> usize {
        2 * self.taps()
    }

    pub fn action_dim(&self) -> usize {
        2 * self.elements()
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Sets the receiver noise power; zero disables noise.
    pub fn set_noise_power(&mut self, p: f64) -> Result<()> {
        if !(p >= 0.0) {
            return Err(Error::Domain(format!("noise power {p} is negative")));
        }
        self.noise_power = p;
        Ok(())
    }

    pub fn ue(&self) -> [f64; 2] {
        self.model.geometry().ue
    }

    /// Moves the UE one random-walk step and draws a new coherence block.
    pub fn next_block(&mut self) -> Result<()> {
        let pos = self.ue();
        let ue = random_walk_step(
            &mut self.walk_rng,
            pos,
            &self.episode.walk_bounds,
            self.episode.walk_max_step,
        )?;
        self.model.set_ue(ue)?;
        self.resample();
        Ok(())
    }

    /// Draws a new coherence block at the current UE position.
    pub fn resample(&mut self) {
        self.channel = self.model.sample(&mut self.channel_rng);
    }

    pub fn noiseless_pulse(&self, gamma: &RisConfiguration) -> Result<PulseResponse> {
        Ok(PulseResponse::new(self.channel.noiseless_pulse(gamma.as_slice())?))
    }

    pub fn observe(&mut self, gamma: &RisConfiguration) -> Result<PulseResponse> {
        received_pulse(&self.channel, gamma, self.noise_power, &mut self.noise_rng)
    }

    /// Applies `gamma`, draws fresh noise and returns the next state and
    /// unscaled reward.
    pub fn step(&mut self, gamma: &RisConfiguration) -> Result<StepOutcome> {
        let pulse = self.observe(gamma)?;
        let state = state_from_pulse(&pulse.samples)?;
        let reward = compute_eta_norm(&pulse.samples)?;
        let eta = compute_eta(&pulse.samples)?;
        Ok(StepOutcome {
            state,
            reward,
            eta,
            pulse,
        })
    }
}
