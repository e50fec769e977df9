//! Clipped importance-sampled surrogate and value regression objectives.

use serde::{Deserialize, Serialize};

use super::memory::Memory;
use super::policy::{check_policy_spec, log_prob_from_logits};
use crate::error::{Error, Result};
use crate::nn::{check_len, value_and_gradient, NetworkSpec, Objective, OutputHead, ParameterVector, Scalar};

/// Clipped surrogate gain over a memory,
/// `mean_t min(ρ_t·A_t, clip(ρ_t, 1-ε, 1+ε)·A_t)` with
/// `ρ_t = exp(log π_θ(u_t|s_t) - reference_t)`.
#[derive(Clone, Debug)]
pub struct SurrogateGain<'a> {
    spec: &'a NetworkSpec,
    memory: &'a Memory,
    reference_log_probs: &'a [f64],
    advantages: &'a [f64],
    clip: f64,
}

impl<'a> SurrogateGain<'a> {
    /// Uses the memory's own collection log-probabilities as reference.
    pub fn new(spec: &'a NetworkSpec, memory: &'a Memory, advantages: &'a [f64], clip: f64) -> Result<Self> {
        Self::with_reference(spec, memory, memory.log_probs(), advantages, clip)
    }

    pub fn with_reference(
        spec: &'a NetworkSpec,
        memory: &'a Memory,
        reference_log_probs: &'a [f64],
        advantages: &'a [f64],
        clip: f64,
    ) -> Result<Self> {
        check_policy_spec(spec, memory.observation_len())?;
        check_len("surrogate advantages", memory.len(), advantages.len())?;
        check_len("surrogate reference log-probs", memory.len(), reference_log_probs.len())?;
        if !(clip >= 0.0) {
            return Err(Error::InvalidArgument(format!("clip range must be >= 0, got {clip}")));
        }
        if memory.is_empty() {
            return Err(Error::InvalidArgument("surrogate over an empty memory".into()));
        }
        Ok(Self {
            spec,
            memory,
            reference_log_probs,
            advantages,
            clip,
        })
    }

    /// Per-sample importance ratios at `params`.
    pub fn ratios(&self, params: &[f64]) -> Result<Vec<f64>> {
        (0..self.memory.len())
            .map(|t| {
                let logits = self.spec.forward_raw(params, self.memory.observation(t));
                let (lp, _) = log_prob_from_logits(&logits, self.memory.actions()[t]);
                let log_ratio = lp - self.reference_log_probs[t];
                let rho = log_ratio.exp();
                if rho.is_finite() {
                    Ok(rho)
                } else {
                    Err(Error::NonFiniteRatio { index: t, log_ratio })
                }
            })
            .collect()
    }
}

impl Objective for SurrogateGain<'_> {
    fn param_len(&self) -> usize {
        self.spec.param_count()
    }

    fn evaluate<S: Scalar>(&self, params: &[S], grad: &mut [S]) -> Result<S> {
        let n = self.memory.len() as f64;
        let (lo, hi) = (1.0 - self.clip, 1.0 + self.clip);
        let mut total = S::zero();
        for t in 0..self.memory.len() {
            let obs: Vec<S> = self.memory.observation(t).iter().map(|&v| S::from_f64(v)).collect();
            let trace = self.spec.trace(params, &obs);
            let (lp, d_logits) = log_prob_from_logits(&trace.output, self.memory.actions()[t]);
            let log_ratio = lp - S::from_f64(self.reference_log_probs[t]);
            let rho = log_ratio.exp();
            if !rho.value().is_finite() {
                return Err(Error::NonFiniteRatio {
                    index: t,
                    log_ratio: log_ratio.value(),
                });
            }
            let advantage = S::from_f64(self.advantages[t]);
            let unclipped = rho * advantage;
            let clipped_rho = rho.value().clamp(lo, hi);
            let clipped = S::from_f64(clipped_rho) * advantage;
            if unclipped.value() <= clipped.value() || clipped_rho == rho.value() {
                total += unclipped;
                // d(ρA)/dz = ρA · dlogπ/dz
                let scale = unclipped / S::from_f64(n);
                let d_out: Vec<S> = d_logits.iter().map(|&d| d * scale).collect();
                self.spec.backward(params, &trace, &d_out, grad);
            } else {
                total += clipped;
            }
        }
        Ok(total / S::from_f64(n))
    }
}

/// `coef · mean_t (V(s_t) - R_t)²` for a linear-headed value network.
#[derive(Clone, Debug)]
pub struct ValueLoss<'a> {
    spec: &'a NetworkSpec,
    memory: &'a Memory,
    returns: &'a [f64],
    coef: f64,
}

impl<'a> ValueLoss<'a> {
    pub fn new(spec: &'a NetworkSpec, memory: &'a Memory, returns: &'a [f64], coef: f64) -> Result<Self> {
        check_len("value input", spec.input_len(), memory.observation_len())?;
        check_len("value output", 1, spec.output_len())?;
        check_len("value returns", memory.len(), returns.len())?;
        if spec.output_head() != OutputHead::LinearScalar {
            return Err(Error::InvalidSpec(format!("value network needs a linear head, got {spec}")));
        }
        if memory.is_empty() {
            return Err(Error::InvalidArgument("value loss over an empty memory".into()));
        }
        Ok(Self {
            spec,
            memory,
            returns,
            coef,
        })
    }

    /// `V(s_t)` for every memory state and the loss gradient, from a single
    /// forward pass per state. Both match [`predict_values`] and
    /// [`crate::nn::gradient`] bit for bit.
    pub fn predictions_and_gradient(&self, params: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("value parameters", self.spec.param_count(), params.len())?;
        let mut grad = vec![0.0; params.len()];
        let mut predictions = Vec::with_capacity(self.memory.len());
        let loss = self.accumulate(params, &mut grad, Some(&mut predictions));
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(loss));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok((predictions, grad))
    }

    fn accumulate<S: Scalar>(&self, params: &[S], grad: &mut [S], mut predictions: Option<&mut Vec<f64>>) -> S {
        let n = self.memory.len() as f64;
        let coef = S::from_f64(self.coef);
        let mut total = S::zero();
        for t in 0..self.memory.len() {
            let obs: Vec<S> = self.memory.observation(t).iter().map(|&v| S::from_f64(v)).collect();
            let trace = self.spec.trace(params, &obs);
            if let Some(p) = predictions.as_deref_mut() {
                p.push(trace.output[0].value());
            }
            let diff = trace.output[0] - S::from_f64(self.returns[t]);
            total += diff * diff;
            let d_out = [S::from_f64(2.0) * coef * diff / S::from_f64(n)];
            self.spec.backward(params, &trace, &d_out, grad);
        }
        coef * total / S::from_f64(n)
    }
}

impl Objective for ValueLoss<'_> {
    fn param_len(&self) -> usize {
        self.spec.param_count()
    }

    fn evaluate<S: Scalar>(&self, params: &[S], grad: &mut [S]) -> Result<S> {
        Ok(self.accumulate(params, grad, None))
    }
}

/// Value predictions for every memory state.
pub fn predict_values(value: &ParameterVector, memory: &Memory) -> Result<Vec<f64>> {
    check_len("value input", value.spec().input_len(), memory.observation_len())?;
    Ok(memory
        .observations()
        .map(|o| value.spec().forward_raw(value.values(), o)[0])
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoLoss {
    /// `-mean(min(ρÂ, clip(ρ)Â))`.
    pub policy: f64,
    /// Mean squared error of the value prediction.
    pub value: f64,
    /// `policy + value_coef · value`.
    pub total: f64,
}

/// PPO loss with advantages `R_t - V(s_t)`.
pub fn ppo_loss(
    policy: &ParameterVector,
    value: &ParameterVector,
    memory: &Memory,
    returns: &[f64],
    clip: f64,
    value_coef: f64,
) -> Result<PpoLoss> {
    check_len("ppo returns", memory.len(), returns.len())?;
    let predictions = predict_values(value, memory)?;
    let advantages: Vec<f64> = returns.iter().zip(&predictions).map(|(r, v)| r - v).collect();
    let gain = SurrogateGain::new(policy.spec(), memory, &advantages, clip)?;
    let (g, _) = value_and_gradient(policy.values(), &gain)?;
    let mse = advantages.iter().map(|a| a * a).sum::<f64>() / memory.len() as f64;
    Ok(PpoLoss {
        policy: -g,
        value: mse,
        total: -g + value_coef * mse,
    })
}
