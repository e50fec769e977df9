//! Rollout collection and the PPO training loop.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::debug;
use serde::{Deserialize, Serialize};

use super::loss::{SurrogateGain, ValueLoss};
use super::memory::{discounted_returns, Memory};
use super::policy::{action_distribution, action_log_probability, check_policy_spec, sample_action};
use crate::env::{EnvKind, EnvState, ProcessParams};
use crate::error::{Error, Result};
use crate::nn::{gradient, AdamState, Direction, NetworkSpec, OutputHead, ParameterVector};
use crate::seed::{self, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub epochs: usize,
    /// Environment steps collected between updates.
    pub t_update: usize,
    pub gamma: f64,
    pub clip: f64,
    pub value_coef: f64,
    /// Hidden layer widths shared by the policy and value networks.
    pub hidden: Vec<usize>,
    /// Stamp reward-log rows with elapsed milliseconds. Off by default so
    /// that logs are byte-identical across reruns.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl PpoConfig {
    pub fn for_kind(kind: EnvKind) -> Self {
        let (t_update, width) = match kind {
            EnvKind::CartPole => (500, 32),
            EnvKind::FuelTank => (1000, 64),
        };
        Self {
            learning_rate: 0.002,
            betas: (0.9, 0.999),
            epochs: 3,
            t_update,
            gamma: 0.99,
            clip: 0.2,
            value_coef: 0.5,
            hidden: vec![width, width],
            record_wall_time: false,
        }
    }

    /// Every violated constraint, in field order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("ppo.learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        for (name, b) in [("ppo.betas[0]", self.betas.0), ("ppo.betas[1]", self.betas.1)] {
            if !(0.0..1.0).contains(&b) {
                out.push(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if self.epochs < 1 {
            out.push("ppo.epochs must be >= 1".into());
        }
        if self.t_update < 1 {
            out.push("ppo.t_update must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            out.push(format!("ppo.gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            out.push(format!("ppo.clip must be > 0, got {}", self.clip));
        }
        if !(self.value_coef >= 0.0 && self.value_coef.is_finite()) {
            out.push(format!("ppo.value_coef must be >= 0, got {}", self.value_coef));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            out.push(format!("ppo.hidden must be non-empty widths >= 1, got {:?}", self.hidden));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    pub fn action_spec(&self, kind: EnvKind) -> Result<NetworkSpec> {
        NetworkSpec::mlp(kind.observation_len(), &self.hidden, kind.action_bits(), OutputHead::SigmoidBernoulli)
    }

    pub fn value_spec(&self, kind: EnvKind) -> Result<NetworkSpec> {
        NetworkSpec::mlp(kind.observation_len(), &self.hidden, 1, OutputHead::LinearScalar)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    /// Environment steps taken when the episode ended.
    pub step: u64,
    /// 1-based episode counter.
    pub episode: u64,
    /// Undiscounted reward of the episode.
    pub cumulative_reward: f64,
    pub wall_ms: u64,
}

/// Per-episode reward trace of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardLog {
    pub entries: Vec<RewardEntry>,
}

pub const REWARD_CSV_HEADER: [&str; 4] = ["step", "episode", "cumulative_reward", "wall_ms"];

impl RewardLog {
    pub fn total_reward(&self) -> f64 {
        self.entries.iter().map(|e| e.cumulative_reward).sum()
    }

    /// Mean episode reward over the first `n` entries.
    pub fn head_mean(&self, n: usize) -> Option<f64> {
        mean(self.entries.iter().take(n).map(|e| e.cumulative_reward))
    }

    /// Mean episode reward over the last `n` entries.
    pub fn tail_mean(&self, n: usize) -> Option<f64> {
        mean(self.entries.iter().rev().take(n).map(|e| e.cumulative_reward))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Store(format!("writing reward log: {e}"));
        w.write_record(REWARD_CSV_HEADER).map_err(csv_err)?;
        for e in &self.entries {
            w.write_record([
                e.step.to_string(),
                e.episode.to_string(),
                e.cumulative_reward.to_string(),
                e.wall_ms.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Store(format!("writing reward log: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            field: "header".into(),
            message: e.to_string(),
        })?;
        let headers = r.headers().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            field: "header".into(),
            message: e.to_string(),
        })?;
        if headers.iter().ne(REWARD_CSV_HEADER) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                field: "header".into(),
                message: format!("expected {}", REWARD_CSV_HEADER.join(",")),
            });
        }
        let mut entries = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                field: format!("row {}", row + 1),
                message: e.to_string(),
            })?;
            let field = |i: usize| -> Result<&str> {
                record.get(i).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    field: format!("row {} {}", row + 1, REWARD_CSV_HEADER[i]),
                    message: "missing".into(),
                })
            };
            let bad = |i: usize, m: String| Error::Parse {
                path: path.to_path_buf(),
                field: format!("row {} {}", row + 1, REWARD_CSV_HEADER[i]),
                message: m,
            };
            entries.push(RewardEntry {
                step: field(0)?.parse().map_err(|e| bad(0, format!("{e}")))?,
                episode: field(1)?.parse().map_err(|e| bad(1, format!("{e}")))?,
                cumulative_reward: field(2)?.parse().map_err(|e| bad(2, format!("{e}")))?,
                wall_ms: field(3)?.parse().map_err(|e| bad(3, format!("{e}")))?,
            });
        }
        Ok(Self { entries })
    }
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// An environment being driven by a policy, carrying the episode in progress
/// across collection calls.
#[derive(Clone, Debug)]
pub struct Rollout {
    env: ProcessParams,
    state: EnvState,
    rng: Rng,
    episode_reward: f64,
    steps: u64,
    log: RewardLog,
    started: Option<Instant>,
}

impl Rollout {
    pub fn new(env: ProcessParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let state = env.reset_with(&mut rng);
        Self {
            env,
            state,
            rng,
            episode_reward: 0.0,
            steps: 0,
            log: RewardLog::default(),
            started: None,
        }
    }

    pub fn with_wall_time(mut self) -> Self {
        self.started = Some(Instant::now());
        self
    }

    pub fn env(&self) -> &ProcessParams {
        &self.env
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn log(&self) -> &RewardLog {
        &self.log
    }

    /// Empties the log and restarts step stamps at zero. The episode in
    /// progress continues.
    pub fn restart_log(&mut self) {
        self.log = RewardLog::default();
        self.steps = 0;
    }

    pub fn into_log(self) -> RewardLog {
        self.log
    }

    /// Samples `steps` actions from `policy`, appending to `memory`.
    pub fn collect(&mut self, policy: &ParameterVector, steps: usize, memory: &mut Memory) -> Result<()> {
        check_policy_spec(policy.spec(), self.env.kind().observation_len())?;
        for _ in 0..steps {
            let obs = self.env.observe(&self.state);
            let probs = action_distribution(policy, &obs)?;
            let action = sample_action(&probs, &mut self.rng);
            let result = self.env.step(&self.state, action).map_err(|e| Error::Environment {
                step: self.steps as usize,
                source: Box::new(e),
            })?;
            self.steps += 1;
            self.episode_reward += result.reward;
            memory.push(&obs, action, result.reward, action_log_probability(&probs, action), result.done);
            if result.done {
                self.log.entries.push(RewardEntry {
                    step: self.steps,
                    episode: self.log.entries.len() as u64 + 1,
                    cumulative_reward: self.episode_reward,
                    wall_ms: self.started.map_or(0, |t| t.elapsed().as_millis() as u64),
                });
                self.episode_reward = 0.0;
                self.state = self.env.reset_with(&mut self.rng);
            } else {
                self.state = result.next_state;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PpoOutcome {
    pub policy: ParameterVector,
    pub value: ParameterVector,
    pub log: RewardLog,
}

/// Policy and value optimizers for one training run.
#[derive(Clone, Debug)]
pub struct PpoLearner {
    pub policy: ParameterVector,
    pub value: ParameterVector,
    policy_adam: AdamState,
    value_adam: AdamState,
    config: PpoConfig,
}

impl PpoLearner {
    pub fn new(policy: ParameterVector, value: ParameterVector, config: &PpoConfig) -> Result<Self> {
        config.validate()?;
        check_policy_spec(policy.spec(), value.spec().input_len())?;
        if value.spec().output_head() != OutputHead::LinearScalar || value.spec().output_len() != 1 {
            return Err(Error::InvalidSpec(format!("value network needs one linear output, got {}", value.spec())));
        }
        Ok(Self {
            policy_adam: AdamState::new(policy.len(), config.learning_rate, config.betas),
            value_adam: AdamState::new(value.len(), config.learning_rate, config.betas),
            policy,
            value,
            config: config.clone(),
        })
    }

    /// `epochs` full-batch Adam steps on the PPO loss over `memory`.
    pub fn update(&mut self, memory: &Memory) -> Result<()> {
        if memory.is_empty() {
            return Ok(());
        }
        let returns = discounted_returns(memory.rewards(), memory.episode_ends(), self.config.gamma);
        for _ in 0..self.config.epochs {
            let value_loss = ValueLoss::new(self.value.spec(), memory, &returns, self.config.value_coef)?;
            let (predictions, value_grad) = value_loss.predictions_and_gradient(self.value.values())?;
            let advantages: Vec<f64> = returns.iter().zip(&predictions).map(|(r, v)| r - v).collect();
            let gain = SurrogateGain::new(self.policy.spec(), memory, &advantages, self.config.clip)?;
            let policy_grad = gradient(&self.policy, &gain)?;
            self.policy_adam.step(&mut self.policy, &policy_grad, Direction::Ascent)?;
            self.value_adam.step(&mut self.value, &value_grad, Direction::Descent)?;
        }
        Ok(())
    }
}

/// Trains `policy` and `value` on `env` for `total_steps` interactions.
/// Steps past the last full `t_update` block are still logged but not learned from.
pub fn ppo_train(
    env: &ProcessParams,
    policy: &ParameterVector,
    value: &ParameterVector,
    config: &PpoConfig,
    total_steps: usize,
    seed: u64,
) -> Result<PpoOutcome> {
    if total_steps < config.t_update {
        return Err(Error::InvalidArgument(format!(
            "total_steps {total_steps} is below t_update {}",
            config.t_update
        )));
    }
    train_from(Rollout::new(env.clone(), seed), policy, value, config, total_steps)
}

/// [`ppo_train`] continuing an existing rollout.
pub fn train_from(
    mut rollout: Rollout,
    policy: &ParameterVector,
    value: &ParameterVector,
    config: &PpoConfig,
    total_steps: usize,
) -> Result<PpoOutcome> {
    if config.record_wall_time && rollout.started.is_none() {
        rollout = rollout.with_wall_time();
    }
    let mut learner = PpoLearner::new(policy.clone(), value.clone(), config)?;
    let mut memory = Memory::new(env_obs_len(rollout.env()));
    let mut done = 0;
    while done < total_steps {
        let chunk = config.t_update.min(total_steps - done);
        rollout.collect(&learner.policy, chunk, &mut memory)?;
        done += chunk;
        if chunk == config.t_update {
            learner.update(&memory)?;
        }
        memory.clear();
        debug!(
            "ppo: {done}/{total_steps} steps, {} episodes, recent mean {:.2}",
            rollout.log().entries.len(),
            rollout.log().tail_mean(10).unwrap_or(f64::NAN)
        );
    }
    Ok(PpoOutcome {
        policy: learner.policy,
        value: learner.value,
        log: rollout.into_log(),
    })
}

fn env_obs_len(env: &ProcessParams) -> usize {
    env.kind().observation_len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nets(kind: EnvKind, config: &PpoConfig, seed: u64) -> (ParameterVector, ParameterVector) {
        let mut rng = seed::rng(seed);
        (
            ParameterVector::init(config.action_spec(kind).unwrap(), &mut rng),
            ParameterVector::init(config.value_spec(kind).unwrap(), &mut rng),
        )
    }

    #[test]
    fn defaults_validate() {
        for kind in [EnvKind::CartPole, EnvKind::FuelTank] {
            PpoConfig::for_kind(kind).validate().unwrap();
        }
        let mut bad = PpoConfig::for_kind(EnvKind::CartPole);
        bad.gamma = 1.5;
        bad.epochs = 0;
        match bad.validate() {
            Err(Error::InvalidConfig(p)) => assert_eq!(p.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut config = PpoConfig::for_kind(EnvKind::CartPole);
        config.learning_rate = 0.0;
        let (p, v) = nets(EnvKind::CartPole, &config, 1);
        let env = ProcessParams::nominal(EnvKind::CartPole);
        let out = ppo_train(&env, &p, &v, &config, config.t_update, 9).unwrap();
        assert_eq!(out.policy, p);
        assert_eq!(out.value, v);
    }

    #[test]
    fn log_steps_increase_and_stay_in_range() {
        let config = PpoConfig::for_kind(EnvKind::CartPole);
        let (p, v) = nets(EnvKind::CartPole, &config, 2);
        let env = ProcessParams::nominal(EnvKind::CartPole);
        let out = ppo_train(&env, &p, &v, &config, 2000, 3).unwrap();
        assert!(!out.log.entries.is_empty());
        assert!(out.log.entries.windows(2).all(|w| w[0].step < w[1].step));
        assert!(out.log.entries.iter().all(|e| e.step <= 2000 && e.wall_ms == 0));
    }

    #[test]
    fn training_is_deterministic() {
        let config = PpoConfig::for_kind(EnvKind::CartPole);
        let (p, v) = nets(EnvKind::CartPole, &config, 4);
        let env = ProcessParams::nominal(EnvKind::CartPole);
        let a = ppo_train(&env, &p, &v, &config, 1500, 5).unwrap();
        let b = ppo_train(&env, &p, &v, &config, 1500, 5).unwrap();
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.log.to_csv_string(), b.log.to_csv_string());
    }

    #[test]
    fn too_few_steps_rejected() {
        let config = PpoConfig::for_kind(EnvKind::CartPole);
        let (p, v) = nets(EnvKind::CartPole, &config, 6);
        let env = ProcessParams::nominal(EnvKind::CartPole);
        assert!(ppo_train(&env, &p, &v, &config, 10, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let log = RewardLog {
            entries: vec![
                RewardEntry { step: 12, episode: 1, cumulative_reward: 11.0, wall_ms: 0 },
                RewardEntry { step: 40, episode: 2, cumulative_reward: -0.125, wall_ms: 3 },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, log.to_csv_string()).unwrap();
        assert_eq!(RewardLog::read_csv(&path).unwrap(), log);
        assert!(log.to_csv_string().starts_with("step,episode,cumulative_reward,wall_ms\n"));
    }
}
