#![allow(dead_code)]

use emaml_core::nn::{value_and_gradient, Objective};
use emaml_core::ppo::log_probs_on;
use emaml_core::{seed, Action, Memory, NetworkSpec, OutputHead, ParameterVector};
use rand::Rng;

pub fn policy_spec(inputs: usize, hidden: &[usize], bits: usize) -> NetworkSpec {
    NetworkSpec::mlp(inputs, hidden, bits, OutputHead::SigmoidBernoulli).unwrap()
}

pub fn value_spec(inputs: usize, hidden: &[usize]) -> NetworkSpec {
    NetworkSpec::mlp(inputs, hidden, 1, OutputHead::LinearScalar).unwrap()
}

pub fn random_params(spec: NetworkSpec, seed: u64) -> ParameterVector {
    ParameterVector::init(spec, &mut seed::rng(seed))
}

/// Random observations and actions with log-probabilities taken from
/// `collector`, rewards in `[-1, 2)` and episode ends drawn with probability
/// `p_end` per step.
pub fn random_memory(collector: &ParameterVector, n: usize, p_end: f64, rng: &mut impl Rng) -> Memory {
    let spec = collector.spec();
    let obs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..spec.input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let bits = spec.output_len() as u32;
    let actions: Vec<Action> = (0..n).map(|_| Action(rng.gen_range(0..(1u8 << bits)))).collect();
    let lps = log_probs_on(collector, obs.iter(), &actions).unwrap();
    let rewards = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
    let ends = (0..n.saturating_sub(1)).filter(|_| rng.gen_bool(p_end)).collect();
    Memory::from_parts(obs, actions, rewards, lps, ends).unwrap()
}

/// Central finite-difference gradient with step `h`.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Relative error between the analytic gradient of `objective` at `x` and
/// central differences of its value.
pub fn gradient_check<O: Objective>(objective: &O, x: &[f64]) -> f64 {
    let (_, analytic) = value_and_gradient(x, objective).unwrap();
    let numeric = numeric_gradient(|p| value_and_gradient(p, objective).unwrap().0, x, 1e-6);
    relative_error(&analytic, &numeric)
}

pub fn bit_identical(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}
