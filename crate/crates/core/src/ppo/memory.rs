use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};

/// Buffered experience: observation, action, reward and the log-probability
/// of the action under the policy that collected it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Memory {
    observation_len: usize,
    observations: Vec<f64>,
    actions: Vec<Action>,
    rewards: Vec<f64>,
    log_probs: Vec<f64>,
    /// Indices of the last sample of every completed episode, ascending.
    episode_ends: Vec<usize>,
}

impl Memory {
    pub fn new(observation_len: usize) -> Self {
        Self {
            observation_len,
            observations: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            log_probs: Vec::new(),
            episode_ends: Vec::new(),
        }
    }

    pub fn from_parts(
        observations: Vec<Vec<f64>>,
        actions: Vec<Action>,
        rewards: Vec<f64>,
        log_probs: Vec<f64>,
        episode_ends: Vec<usize>,
    ) -> Result<Self> {
        let n = observations.len();
        let observation_len = observations.first().map_or(0, |o| o.len());
        for (name, len) in [("actions", actions.len()), ("rewards", rewards.len()), ("log_probs", log_probs.len())] {
            if len != n {
                return Err(Error::InvalidArgument(format!(
                    "memory {name} has {len} entries, expected {n}"
                )));
            }
        }
        let mut memory = Memory::new(observation_len);
        for (i, o) in observations.iter().enumerate() {
            if o.len() != observation_len {
                return Err(Error::DimensionMismatch {
                    context: "memory observation",
                    expected: observation_len,
                    actual: o.len(),
                });
            }
            memory.observations.extend_from_slice(o);
            memory.actions.push(actions[i]);
            memory.rewards.push(rewards[i]);
            if !log_probs[i].is_finite() {
                return Err(Error::NonFinite("memory log-probabilities"));
            }
            memory.log_probs.push(log_probs[i]);
        }
        if episode_ends.windows(2).any(|w| w[0] >= w[1]) || episode_ends.last().is_some_and(|&e| e >= n) {
            return Err(Error::InvalidArgument(format!(
                "episode boundaries {episode_ends:?} must be strictly ascending and below {n}"
            )));
        }
        memory.episode_ends = episode_ends;
        Ok(memory)
    }

    pub fn push(&mut self, observation: &[f64], action: Action, reward: f64, log_prob: f64, done: bool) {
        debug_assert_eq!(observation.len(), self.observation_len);
        debug_assert!(log_prob.is_finite());
        self.observations.extend_from_slice(observation);
        self.actions.push(action);
        self.rewards.push(reward);
        self.log_probs.push(log_prob);
        if done {
            self.episode_ends.push(self.actions.len() - 1);
        }
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.rewards.clear();
        self.log_probs.clear();
        self.episode_ends.clear();
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn observation_len(&self) -> usize {
        self.observation_len
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.observation_len..(i + 1) * self.observation_len]
    }

    pub fn observations(&self) -> impl Iterator<Item = &[f64]> {
        self.observations.chunks_exact(self.observation_len.max(1))
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn episode_ends(&self) -> &[usize] {
        &self.episode_ends
    }

    /// Copy with every reward multiplied by `factor`.
    pub fn with_scaled_rewards(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.rewards.iter_mut().for_each(|r| *r *= factor);
        m
    }

    /// Copy with the stored log-probabilities replaced.
    pub fn with_log_probs(&self, log_probs: Vec<f64>) -> Result<Self> {
        if log_probs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "memory log-probabilities",
                expected: self.len(),
                actual: log_probs.len(),
            });
        }
        let mut m = self.clone();
        m.log_probs = log_probs;
        Ok(m)
    }
}

/// `R_t = r_t + γ·R_{t+1}` within each episode; the recursion restarts after
/// every index in `episode_ends` and at the end of the buffer.
pub fn discounted_returns(rewards: &[f64], episode_ends: &[usize], gamma: f64) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&gamma), "discount must lie in [0, 1], got {gamma}");
    let mut returns = vec![0.0; rewards.len()];
    let mut ends = episode_ends.iter().rev().peekable();
    let mut running = 0.0;
    for t in (0..rewards.len()).rev() {
        if ends.peek() == Some(&&t) {
            running = 0.0;
            ends.next();
        }
        running = rewards[t] + gamma * running;
        returns[t] = running;
    }
    returns
}
