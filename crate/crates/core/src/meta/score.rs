//! Expected-return scoring of a candidate policy on buffered experience.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{value_and_gradient, NetworkSpec, Objective, ParameterVector, Scalar};
use crate::ppo::memory::{discounted_returns, Memory};
use crate::ppo::policy::{check_policy_spec, log_prob_from_logits};

/// What is subtracted from the discounted returns before they weight the
/// action probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnBaseline {
    /// Raw discounted returns.
    None,
    /// Returns minus their mean over the memory. With non-negative rewards
    /// raw scores favour whichever policy is most confident; centring lets
    /// a policy lose score for likely actions that led to poor outcomes.
    #[default]
    Mean,
}

impl ReturnBaseline {
    pub fn as_str(self) -> &'static str {
        match self {
            ReturnBaseline::None => "none",
            ReturnBaseline::Mean => "mean",
        }
    }
}

/// Discounted returns of `memory`, shifted by `baseline`.
pub fn weighted_returns(memory: &Memory, gamma: f64, baseline: ReturnBaseline) -> Vec<f64> {
    let mut returns = discounted_returns(memory.rewards(), memory.episode_ends(), gamma);
    if baseline == ReturnBaseline::Mean && !returns.is_empty() {
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        returns.iter_mut().for_each(|r| *r -= mean);
    }
    returns
}

/// `Σ_t π_θ(u_t|s_t)·R_t` over the stored transitions.
#[derive(Clone, Debug)]
pub struct ExpectedReturnGain<'a> {
    spec: &'a NetworkSpec,
    memory: &'a Memory,
    returns: Vec<f64>,
}

impl<'a> ExpectedReturnGain<'a> {
    pub fn new(spec: &'a NetworkSpec, memory: &'a Memory, gamma: f64, baseline: ReturnBaseline) -> Result<Self> {
        check_policy_spec(spec, memory.observation_len())?;
        if memory.is_empty() {
            return Err(Error::InvalidArgument("scoring needs a non-empty memory".into()));
        }
        Ok(Self {
            spec,
            memory,
            returns: weighted_returns(memory, gamma, baseline),
        })
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }
}

impl Objective for ExpectedReturnGain<'_> {
    fn param_len(&self) -> usize {
        self.spec.param_count()
    }

    fn evaluate<S: Scalar>(&self, params: &[S], grad: &mut [S]) -> Result<S> {
        let mut total = S::zero();
        for t in 0..self.memory.len() {
            let obs: Vec<S> = self.memory.observation(t).iter().map(|&v| S::from_f64(v)).collect();
            let trace = self.spec.trace(params, &obs);
            let (lp, d_logits) = log_prob_from_logits(&trace.output, self.memory.actions()[t]);
            let weighted = lp.exp() * S::from_f64(self.returns[t]);
            total += weighted;
            let d_out: Vec<S> = d_logits.iter().map(|&d| d * weighted).collect();
            self.spec.backward(params, &trace, &d_out, grad);
        }
        Ok(total)
    }
}

/// Score with raw discounted returns.
pub fn expected_return_score(policy: &ParameterVector, memory: &Memory, gamma: f64) -> Result<f64> {
    expected_return_score_with(policy, memory, gamma, ReturnBaseline::None)
}

pub fn expected_return_score_with(
    policy: &ParameterVector,
    memory: &Memory,
    gamma: f64,
    baseline: ReturnBaseline,
) -> Result<f64> {
    let gain = ExpectedReturnGain::new(policy.spec(), memory, gamma, baseline)?;
    let values = policy.values();
    let mut total = 0.0;
    for t in 0..memory.len() {
        let logits = policy.spec().forward_raw(values, memory.observation(t));
        let (lp, _) = log_prob_from_logits(&logits, memory.actions()[t]);
        total += lp.exp() * gain.returns[t];
    }
    Ok(total)
}

/// Score and its gradient with respect to the policy parameters.
pub fn expected_return_gradient(
    policy: &ParameterVector,
    memory: &Memory,
    gamma: f64,
    baseline: ReturnBaseline,
) -> Result<(f64, Vec<f64>)> {
    let gain = ExpectedReturnGain::new(policy.spec(), memory, gamma, baseline)?;
    value_and_gradient(policy.values(), &gain)
}
