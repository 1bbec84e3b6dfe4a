use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Parameters of the in-episode learning schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleParams {
    pub window: usize,
    pub initial_target: f64,
    pub target_step: f64,
    pub lr_decay: f64,
    pub min_n_train: usize,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams {
            window: 5,
            initial_target: 0.75,
            target_step: 0.05,
            lr_decay: 0.8,
            min_n_train: 1,
        }
    }
}

/// Actor learning rate and training iterations per step, tightened each
/// time recent rewards beat a rising target.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    pub reward_target: f64,
    pub recent: VecDeque<f64>,
    pub n_train: usize,
    pub mu_a: f64,
    pub step: usize,
    pub triggers: usize,
}

impl ScheduleState {
    pub fn new(params: &ScheduleParams, n_train: usize, mu_a: f64) -> Self {
        ScheduleState {
            reward_target: params.initial_target,
            recent: VecDeque::with_capacity(params.window),
            n_train: n_train.max(params.min_n_train),
            mu_a,
            step: 0,
            triggers: 0,
        }
    }
}

/// Records an unscaled reward. Once `window` rewards have been collected and
/// their mean exceeds the target, the actor learning rate decays, one
/// training iteration is dropped (never below the minimum) and the target
/// rises. The window then starts over.
pub fn adaptive_schedule(state: &mut ScheduleState, params: &ScheduleParams, reward: f64) {
    state.step += 1;
    if state.recent.len() == params.window {
        state.recent.pop_front();
    }
    state.recent.push_back(reward);
    if state.recent.len() < params.window {
        return;
    }
    let mean = state.recent.iter().sum::<f64>() / params.window as f64;
    if mean > state.reward_target {
        state.mu_a *= params.lr_decay;
        state.n_train = state.n_train.saturating_sub(1).max(params.min_n_train);
        state.reward_target += params.target_step;
        state.triggers += 1;
        state.recent.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_trigger_on_high_rewards() {
        let p = ScheduleParams::default();
        let mut s = ScheduleState::new(&p, 4, 2e-3);
        for _ in 0..5 {
            adaptive_schedule(&mut s, &p, 0.8);
        }
        assert_eq!(s.triggers, 1);
        assert_eq!(s.n_train, 3);
        assert!((s.reward_target - 0.80).abs() < 1e-15);
        assert!((s.mu_a - 0.8 * 2e-3).abs() < 1e-18);
        for _ in 0..5 {
            adaptive_schedule(&mut s, &p, 0.8);
        }
        assert_eq!(s.triggers, 1);
    }

    #[test]
    fn low_rewards_change_nothing() {
        let p = ScheduleParams::default();
        let mut s = ScheduleState::new(&p, 4, 1e-3);
        for _ in 0..50 {
            adaptive_schedule(&mut s, &p, 0.7);
        }
        assert_eq!((s.triggers, s.n_train, s.mu_a), (0, 4, 1e-3));
    }

    #[test]
    fn n_train_never_below_one() {
        let p = ScheduleParams::default();
        let mut s = ScheduleState::new(&p, 4, 1e-3);
        for _ in 0..200 {
            adaptive_schedule(&mut s, &p, 100.0);
        }
        assert_eq!(s.triggers, 40);
        assert_eq!(s.n_train, 1);
    }
}
