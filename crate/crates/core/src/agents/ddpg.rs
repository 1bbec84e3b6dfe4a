use super::{
    exploration_noise_scale, fit_critic, fit_deterministic_actor, new_actor, new_critic,
    noisy_clipped, concat, Agent, AgentKind, Experience, Hyperparams, Losses,
};
use crate::error::Result;
use crate::nn::{Activation, Adam, Mlp};
use crate::rng::SimRng;

/// Deterministic policy gradient with one critic. Actions are taken from the
/// target actor plus decaying Gaussian noise. Weights are redrawn at the
/// start of every episode.
#[derive(Debug, Clone)]
pub struct Ddpg {
    hp: Hyperparams,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic: Mlp,
    pub critic_target: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    init_rng: SimRng,
    iterations: u64,
}

impl Ddpg {
    pub fn new(state_dim: usize, action_dim: usize, hp: Hyperparams, mut init_rng: SimRng) -> Result<Self> {
        hp.validate()?;
        let actor = new_actor(&mut init_rng, state_dim, action_dim, &hp, Activation::Tanh)?;
        let critic = new_critic(&mut init_rng, state_dim, action_dim, &hp)?;
        Ok(Ddpg {
            actor_opt: Adam::new(actor.num_params()),
            critic_opt: Adam::new(critic.num_params()),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            hp,
            init_rng,
            iterations: 0,
        })
    }

    /// Bootstrap targets `r + gamma * Q_targ(s', actor_targ(s'))`.
    pub fn critic_targets(&self, batch: &[&Experience]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|e| {
                let a2 = self.actor_target.predict(&e.next_state)?;
                let q = self.critic_target.predict(&concat(&e.next_state, &a2))?[0];
                Ok(e.reward + self.hp.gamma * q)
            })
            .collect()
    }
}

impl Agent for Ddpg {
    fn kind(&self) -> AgentKind {
        AgentKind::Ddpg
    }

    fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    fn begin_episode(&mut self) -> Result<()> {
        self.actor.reinitialize(&mut self.init_rng, self.hp.init_std)?;
        self.critic.reinitialize(&mut self.init_rng, self.hp.init_std)?;
        self.actor_target = self.actor.clone();
        self.critic_target = self.critic.clone();
        self.actor_opt.reset();
        self.critic_opt.reset();
        Ok(())
    }

    fn act(&mut self, state: &[f64], t: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        let a = self.actor_target.predict(state)?;
        let std = exploration_noise_scale(t, self.hp.sigma_a, self.hp.tau_d);
        Ok(noisy_clipped(&a, std, rng))
    }

    fn train(&mut self, batch: &[&Experience], mu_a: f64, _rng: &mut SimRng) -> Result<Losses> {
        let targets = self.critic_targets(batch)?;
        let inputs: Vec<Vec<f64>> = batch.iter().map(|e| concat(&e.state, &e.action)).collect();
        let critic = fit_critic(&mut self.critic, &mut self.critic_opt, &inputs, &targets, self.hp.mu_c)?;
        let states: Vec<&[f64]> = batch.iter().map(|e| e.state.as_slice()).collect();
        let actor = fit_deterministic_actor(&mut self.actor, &mut self.actor_opt, &self.critic, &states, mu_a)?;
        self.critic.polyak_into(&mut self.critic_target, self.hp.tau)?;
        self.actor.polyak_into(&mut self.actor_target, self.hp.tau)?;
        self.iterations += 1;
        Ok(Losses {
            critic,
            actor: Some(actor),
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
        vec![&self.actor, &self.actor_target, &self.critic, &self.critic_target]
    }

    fn networks_mut(&mut self) -> Vec<&mut Mlp> {
        vec![
            &mut self.actor,
            &mut self.actor_target,
            &mut self.critic,
            &mut self.critic_target,
        ]
    }
}
