//! PPO with a separate value network.

pub mod loss;
pub mod memory;
pub mod policy;
pub mod train;

pub use loss::{ppo_loss, predict_values, PpoLoss, SurrogateGain, ValueLoss};
pub use memory::{discounted_returns, Memory};
pub use policy::{action_distribution, action_log_probability, action_probability, log_probs_on, sample_action};
pub use train::{ppo_train, train_from, PpoConfig, PpoLearner, PpoOutcome, RewardEntry, RewardLog, Rollout, REWARD_CSV_HEADER};
