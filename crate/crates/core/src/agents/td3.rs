use rand::Rng;

use super::{
    concat, exploration_noise_scale, fit_critic, fit_deterministic_actor, new_actor, new_critic,
    noisy_clipped, Agent, AgentKind, Experience, Hyperparams, Losses,
};
use crate::error::Result;
use crate::nn::{Activation, Adam, Mlp};
use crate::rng::SimRng;

/// Twin critics with clipped double-Q targets, target policy smoothing and
/// delayed actor/target updates.
#[derive(Debug, Clone)]
pub struct Td3 {
    hp: Hyperparams,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critics: [Mlp; 2],
    pub critic_targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    iterations: u64,
}

impl Td3 {
    pub fn new(state_dim: usize, action_dim: usize, hp: Hyperparams, mut init_rng: SimRng) -> Result<Self> {
        hp.validate()?;
        let actor = new_actor(&mut init_rng, state_dim, action_dim, &hp, Activation::Tanh)?;
        let c1 = new_critic(&mut init_rng, state_dim, action_dim, &hp)?;
        let c2 = new_critic(&mut init_rng, state_dim, action_dim, &hp)?;
        Ok(Td3 {
            actor_opt: Adam::new(actor.num_params()),
            critic_opts: [Adam::new(c1.num_params()), Adam::new(c2.num_params())],
            actor_target: actor.clone(),
            critic_targets: [c1.clone(), c2.clone()],
            critics: [c1, c2],
            actor,
            hp,
            iterations: 0,
        })
    }

    /// Smoothing noise `clip(N(0, sigma_t2), -c_e, c_e)`.
    pub fn smoothing_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = self.hp.sigma_t2.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
        e.clamp(-self.hp.c_e, self.hp.c_e)
    }

    /// Smoothed target action `clip(actor_targ(s') + noise, -1, 1)`.
    pub fn target_action<R: Rng + ?Sized>(&self, next_state: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let a = self.actor_target.predict(next_state)?;
        Ok(a.iter()
            .map(|&v| (v + self.smoothing_noise(rng)).clamp(-1.0, 1.0))
            .collect())
    }

    /// `r + gamma * min_i Q_targ,i(s', a')` for given target actions.
    pub fn critic_targets_for(&self, batch: &[&Experience], next_actions: &[Vec<f64>]) -> Result<Vec<f64>> {
        batch
            .iter()
            .zip(next_actions)
            .map(|(e, a2)| {
                let x = concat(&e.next_state, a2);
                let q1 = self.critic_targets[0].predict(&x)?[0];
                let q2 = self.critic_targets[1].predict(&x)?[0];
                Ok(e.reward + self.hp.gamma * q1.min(q2))
            })
            .collect()
    }

    /// Swaps the twin critics together with their targets and optimizers.
    pub fn swap_critics(&mut self) {
        self.critics.swap(0, 1);
        self.critic_targets.swap(0, 1);
        self.critic_opts.swap(0, 1);
    }
}

impl Agent for Td3 {
    fn kind(&self) -> AgentKind {
        AgentKind::Td3
    }

    fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    fn begin_episode(&mut self) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, state: &[f64], t: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        let a = self.actor_target.predict(state)?;
        let std = exploration_noise_scale(t, self.hp.sigma_a, self.hp.tau_d);
        Ok(noisy_clipped(&a, std, rng))
    }

    fn train(&mut self, batch: &[&Experience], mu_a: f64, rng: &mut SimRng) -> Result<Losses> {
        self.iterations += 1;
        let next: Vec<Vec<f64>> = batch
            .iter()
            .map(|e| self.target_action(&e.next_state, rng))
            .collect::<Result<_>>()?;
        let targets = self.critic_targets_for(batch, &next)?;
        let inputs: Vec<Vec<f64>> = batch.iter().map(|e| concat(&e.state, &e.action)).collect();
        let mut critic = 0.0;
        for (c, opt) in self.critics.iter_mut().zip(self.critic_opts.iter_mut()) {
            critic += fit_critic(c, opt, &inputs, &targets, self.hp.mu_c)? / 2.0;
        }
        let mut actor = None;
        if self.iterations.is_multiple_of(self.hp.td3_delay as u64) {
            let states: Vec<&[f64]> = batch.iter().map(|e| e.state.as_slice()).collect();
            actor = Some(fit_deterministic_actor(
                &mut self.actor,
                &mut self.actor_opt,
                &self.critics[0],
                &states,
                mu_a,
            )?);
            for (c, t) in self.critics.iter().zip(self.critic_targets.iter_mut()) {
                c.polyak_into(t, self.hp.tau)?;
            }
            self.actor.polyak_into(&mut self.actor_target, self.hp.tau)?;
        }
        Ok(Losses {
            critic,
            actor,
            alpha: None,
        })
    }

    fn train_iterations(&self) -> u64 {
        self.iterations
    }

    fn set_train_iterations(&mut self, n: u64) {
        self.iterations = n;
    }

    fn networks(&self) -> Vec<&Mlp> {
        vec![
            &self.actor,
            &self.actor_target,
            &self.critics[0],
            &self.critics[1],
            &self.critic_targets[0],
            &self.critic_targets[1],
        ]
    }

    fn networks_mut(&mut self) -> Vec<&mut Mlp> {
        let [c1, c2] = &mut self.critics;
        let [t1, t2] = &mut self.critic_targets;
        vec![&mut self.actor, &mut self.actor_target, c1, c2, t1, t2]
    }
}
