use super::{
    concat, fit_critic, new_actor, new_critic, Agent, AgentKind, Experience, Hyperparams, Losses,
};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, Mlp, PolicyHead};
use crate::rng::SimRng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Soft actor-critic: tanh-squashed Gaussian policy, twin critics and an
/// automatically tuned entropy temperature.
#[derive(Debug, Clone)]
pub struct Sac {
    hp: Hyperparams,
    /// Outputs `[mean | log_std]`, each of the action size.
    pub actor: Mlp,
    pub critics: [Mlp; 2],
    pub critic_targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    alpha_opt: Adam,
    pub log_alpha: f64,
    target_entropy: f64,
    iterations: u64,
}

impl Sac {
    pub fn new(state_dim: usize, action_dim: usize, hp: Hyperparams, mut init_rng: SimRng) -> Result<Self> {
        hp.validate()?;
        let actor = new_actor(&mut init_rng, state_dim, 2 * action_dim, &hp, Activation::Linear)?;
        let c1 = new_critic(&mut init_rng, state_dim, action_dim, &hp)?;
        let c2 = new_critic(&mut init_rng, state_dim, action_dim, &hp)?;
        Ok(Sac {
            actor_opt: Adam::new(actor.num_params()),
            critic_opts: [Adam::new(c1.num_params()), Adam::new(c2.num_params())],
            alpha_opt: Adam::new(1),
            critic_targets: [c1.clone(), c2.clone()],
            critics: [c1, c2],
            actor,
            log_alpha: hp.alpha_init.ln(),
            target_entropy: -(action_dim as f64),
            hp,
            iterations: 0,
        })
    }

    /// `-dim(A)`, i.e. `-2M`.
    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn policy(&self, state: &[f64]) -> Result<PolicyHead> {
        PolicyHead::from_raw(&self.actor.predict(state)?)
    }

    /// `r + gamma * (min_i Q_targ,i(s', a') - alpha * log pi(a'|s'))`.
    pub fn critic_targets_for(
        &self,
        batch: &[&Experience],
        next_actions: &[Vec<f64>],
        next_log_probs: &[f64],
        alpha: f64,
    ) -> Result<Vec<f64>> {
        batch
            .iter()
            .zip(next_actions.iter().zip(next_log_probs))
            .map(|(e, (a2, lp))| {
                let x = concat(&e.next_state, a2);
                let q1 = self.critic_targets[0].predict(&x)?[0];
                let q2 = self.critic_targets[1].predict(&x)?[0];
                Ok(e.reward + self.hp.gamma * (q1.min(q2) - alpha * lp))
            })
            .collect()
    }

    /// Reparameterized actor loss `mean(alpha * log pi(a|s) - min_i Q_i(s, a))`
    /// with `a` built from the noise `xis`, its gradient with respect to the
    /// actor parameters, and the per-sample log-probabilities.
    pub fn actor_objective(
        &self,
        states: &[&[f64]],
        xis: &[Vec<f64>],
        alpha: f64,
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let n = states.len() as f64;
        let sd = self.actor.input_dim();
        let mut grads = vec![0.0; self.actor.num_params()];
        let mut loss = 0.0;
        let mut log_probs = Vec::with_capacity(states.len());
        for (s, xi) in states.iter().zip(xis) {
            let cache = self.actor.forward(s)?;
            let head = PolicyHead::from_raw(cache.output())?;
            let sample = head.sample_with(xi.clone());
            let x = concat(s, &sample.action);
            let c1 = self.critics[0].forward(&x)?;
            let c2 = self.critics[1].forward(&x)?;
            let (q, critic_net, cc) = if c1.output()[0] <= c2.output()[0] {
                (c1.output()[0], &self.critics[0], &c1)
            } else {
                (c2.output()[0], &self.critics[1], &c2)
            };
            loss += (alpha * sample.log_prob - q) / n;
            let gin = critic_net.input_gradient(cc, &[-1.0 / n])?;
            let gh = head.backward(&sample, &gin[sd..], alpha / n);
            self.actor.backward(&cache, &gh, &mut grads)?;
            log_probs.push(sample.log_prob);
        }
        Ok((loss, grads, log_probs))
    }

    /// Derivative of `mean(-log_alpha * (log_pi - H))` with respect to
    /// `log_alpha`.
    pub fn temperature_gradient(&self, log_probs: &[f64]) -> Result<f64> {
        if log_probs.is_empty() {
            return Err(Error::InsufficientData { have: 0, need: 1 });
        }
        let n = log_probs.len() as f64;
        Ok(-log_probs.iter().map(|lp| lp - self.target_entropy).sum::<f64>() / n)
    }
}

impl Agent for Sac {
    fn kind(&self) -> AgentKind {
        AgentKind::Sac
    }

    fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    fn begin_episode(&mut self) -> Result<()> {
        self.log_alpha = self.hp.alpha_init.ln();
        self.alpha_opt.reset();
        Ok(())
    }

    fn act(&mut self, state: &[f64], _t: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        let s = self.policy(state)?.sample(rng);
        Ok(s.action.into_iter().map(|a| a.clamp(-1.0, 1.0)).collect())
    }

    fn train(&mut self, batch: &[&Experience], mu_a: f64, rng: &mut SimRng) -> Result<Losses> {
        let alpha = self.alpha();

        let mut next_actions = Vec::with_capacity(batch.len());
        let mut next_log_probs = Vec::with_capacity(batch.len());
        for e in batch {
            let s = self.policy(&e.next_state)?.sample(rng);
            next_actions.push(s.action);
            next_log_probs.push(s.log_prob);
        }
        let targets = self.critic_targets_for(batch, &next_actions, &next_log_probs, alpha)?;
        let inputs: Vec<Vec<f64>> = batch.iter().map(|e| concat(&e.state, &e.action)).collect();
        let mut critic = 0.0;
        for (c, opt) in self.critics.iter_mut().zip(self.critic_opts.iter_mut()) {
            critic += fit_critic(c, opt, &inputs, &targets, self.hp.mu_c)? / 2.0;
        }

        let states: Vec<&[f64]> = batch.iter().map(|e| e.state.as_slice()).collect();
        let xis: Vec<Vec<f64>> = (0..batch.len())
            .map(|_| (0..self.actor.output_dim() / 2).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let (actor, grads, log_probs) = self.actor_objective(&states, &xis, alpha)?;
        self.actor_opt.step(&mut self.actor.params, &grads, mu_a)?;

        let g = self.temperature_gradient(&log_probs)?;
        let alpha_loss = self.log_alpha * g;
        let mut la = [self.log_alpha];
        self.alpha_opt.step(&mut la, &[g], self.hp.mu_alpha)?;
        self.log_alpha = la[0];

        for (c, t) in self.critics.iter().zip(self.critic_targets.iter_mut()) {
            c.polyak_into(t, self.hp.tau)?;
        }
        self.iterations += 1;
        Ok(Losses {
            critic,
            actor: Some(actor),
            alpha: Some(alpha_loss),
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
            &self.critics[0],
            &self.critics[1],
            &self.critic_targets[0],
            &self.critic_targets[1],
        ]
    }

    fn networks_mut(&mut self) -> Vec<&mut Mlp> {
        let [c1, c2] = &mut self.critics;
        let [t1, t2] = &mut self.critic_targets;
        vec![&mut self.actor, c1, c2, t1, t2]
    }

    fn scalars(&self) -> Vec<f64> {
        vec![self.log_alpha]
    }

    fn set_scalars(&mut self, values: &[f64]) -> Result<()> {
        match values {
            [la] => {
                self.log_alpha = *la;
                Ok(())
            }
            _ => Err(Error::Dimension {
                context: "SAC scalars",
                expected: 1,
                got: values.len(),
            }),
        }
    }
}
