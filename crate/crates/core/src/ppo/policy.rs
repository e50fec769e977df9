//! Bernoulli-per-bit stochastic policies on top of a sigmoid-headed MLP.

use rand::Rng;

use crate::env::Action;
use crate::error::{Error, Result};
use crate::nn::{check_len, clamped_sigmoid, NetworkSpec, OutputHead, ParameterVector, Scalar};

pub(crate) fn check_policy_spec(spec: &NetworkSpec, observation_len: usize) -> Result<()> {
    check_len("policy input", spec.input_len(), observation_len)?;
    if spec.output_head() != OutputHead::SigmoidBernoulli {
        return Err(Error::InvalidSpec(format!("policy network needs a sigmoid head, got {spec}")));
    }
    Ok(())
}

/// Probability that each action bit is set, clamped to `[1e-7, 1 - 1e-7]`.
pub fn action_distribution(policy: &ParameterVector, observation: &[f64]) -> Result<Vec<f64>> {
    check_policy_spec(policy.spec(), observation.len())?;
    policy.forward(observation)
}

/// Joint probability of `action` under per-bit probabilities.
pub fn action_probability(bit_probs: &[f64], action: Action) -> f64 {
    bit_probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if action.bit(i) { p } else { 1.0 - p })
        .product()
}

pub fn action_log_probability(bit_probs: &[f64], action: Action) -> f64 {
    bit_probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if action.bit(i) { p.ln() } else { (1.0 - p).ln() })
        .sum()
}

pub fn sample_action<R: Rng + ?Sized>(bit_probs: &[f64], rng: &mut R) -> Action {
    let bits: Vec<bool> = bit_probs.iter().map(|&p| rng.gen::<f64>() < p).collect();
    Action::from_bits(&bits)
}

/// `log π(action)` from pre-sigmoid outputs and its derivative with respect
/// to each output. Clamped bits contribute a zero derivative.
pub(crate) fn log_prob_from_logits<S: Scalar>(logits: &[S], action: Action) -> (S, Vec<S>) {
    let mut log_prob = S::zero();
    let d_logits = logits
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let (p, clamped) = clamped_sigmoid(z);
            let (lp, d) = if action.bit(i) {
                (p.ln(), S::one() - p)
            } else {
                ((S::one() - p).ln(), -p)
            };
            log_prob += lp;
            if clamped {
                S::zero()
            } else {
                d
            }
        })
        .collect();
    (log_prob, d_logits)
}

/// Log-probabilities of every stored action under `policy`.
pub fn log_probs_on(policy: &ParameterVector, observations: impl Iterator<Item = impl AsRef<[f64]>>, actions: &[Action]) -> Result<Vec<f64>> {
    observations
        .zip(actions)
        .map(|(o, &a)| Ok(action_log_probability(&action_distribution(policy, o.as_ref())?, a)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::PROB_FLOOR;
    use crate::seed;

    #[test]
    fn zero_policy_is_uniform() {
        let spec = NetworkSpec::mlp(6, &[8], 6, OutputHead::SigmoidBernoulli).unwrap();
        let p = ParameterVector::zeros(spec);
        let probs = action_distribution(&p, &[1.0; 6]).unwrap();
        assert_eq!(probs, vec![0.5; 6]);
        assert_eq!(action_probability(&probs, Action(0b101010)), 0.5f64.powi(6));
    }

    #[test]
    fn extreme_parameters_stay_clamped() {
        let spec = NetworkSpec::mlp(2, &[2], 1, OutputHead::SigmoidBernoulli).unwrap();
        let n = spec.param_count();
        let mut values = vec![0.0; n];
        values[n - 1] = 1e3;
        let big = ParameterVector::from_values(spec.clone(), values.clone()).unwrap();
        let probs = action_distribution(&big, &[1.0, 1.0]).unwrap();
        assert_eq!(probs[0], 1.0 - PROB_FLOOR);
        values[n - 1] = -1e3;
        let small = ParameterVector::from_values(spec.clone(), values).unwrap();
        let probs = action_distribution(&small, &[1.0, 1.0]).unwrap();
        assert_eq!(probs[0], PROB_FLOOR);
        let complement = action_probability(&probs, Action(0)) + action_probability(&probs, Action(1));
        assert!((complement - 1.0).abs() < 1e-15);
    }

    #[test]
    fn joint_probability_is_product_of_bits() {
        let spec = NetworkSpec::mlp(6, &[8, 8], 6, OutputHead::SigmoidBernoulli).unwrap();
        let p = ParameterVector::init(spec, &mut seed::rng(4));
        let obs = [0.9, 1.1, 0.3, 0.7, 1.0, 0.2];
        let probs = action_distribution(&p, &obs).unwrap();
        let action = Action(0b011001);
        let mut by_hand = 1.0;
        for (i, q) in probs.iter().enumerate() {
            by_hand *= if action.bit(i) { *q } else { 1.0 - q };
        }
        assert!((action_probability(&probs, action) - by_hand).abs() < 1e-15);
        let lp = action_log_probability(&probs, action);
        assert!((lp.exp() - by_hand).abs() < 1e-12);
        // the generic path agrees with the f64 one
        let logits = p.spec().forward_raw(p.values(), &obs);
        let (generic, _) = log_prob_from_logits(&logits, action);
        assert!((generic - lp).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = NetworkSpec::mlp(4, &[8], 1, OutputHead::SigmoidBernoulli).unwrap();
        let p = ParameterVector::zeros(spec);
        assert!(action_distribution(&p, &[0.0; 3]).is_err());
        let value = ParameterVector::zeros(NetworkSpec::mlp(4, &[8], 1, OutputHead::LinearScalar).unwrap());
        assert!(action_distribution(&value, &[0.0; 4]).is_err());
    }
}
