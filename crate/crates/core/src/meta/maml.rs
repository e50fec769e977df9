//! Meta-learned initialization over a family of processes.

use log::debug;
use rand::Rng;

use super::score::weighted_returns;
use super::update::{delta_theta, pull_back, InnerResult, MetaConfig, MetaVariant};
use crate::env::ProcessFamily;
use crate::error::{Error, Result};
use crate::nn::{gradient, ParameterVector};
use crate::ppo::loss::SurrogateGain;
use crate::ppo::{Memory, Rollout};
use crate::seed;

/// Each outer iteration samples `config.tasks` processes, adapts a copy of
/// the current parameters to each on fresh trajectories of
/// `config.memory_size` steps, and moves the parameters along the combined
/// update direction.
pub fn maml_train(
    theta: &ParameterVector,
    family: &ProcessFamily,
    config: &MetaConfig,
    seed: u64,
) -> Result<ParameterVector> {
    // zero outer iterations is a no-op here rather than a config error
    let problems: Vec<String> = config
        .problems()
        .into_iter()
        .filter(|p| !p.starts_with("meta.k_out"))
        .collect();
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    let mut rng = seed::rng(seed);
    let spec = theta.spec().clone();
    let obs_len = family.nominal.kind().observation_len();
    let mut outer = theta.clone();
    for k in 0..config.k_out {
        let mut results = Vec::with_capacity(config.tasks);
        for _ in 0..config.tasks {
            let env = family.sample(&mut rng);
            let mut rollout = Rollout::new(env, rng.gen());
            let batch = |policy: &ParameterVector, rollout: &mut Rollout| -> Result<(Memory, Vec<f64>)> {
                let mut memory = Memory::new(obs_len);
                rollout.collect(policy, config.memory_size, &mut memory)?;
                let advantages = weighted_returns(&memory, config.gamma, config.return_baseline);
                Ok((memory, advantages))
            };
            let mut batches = Vec::with_capacity(config.k_in);
            let mut current = outer.clone();
            for _ in 0..config.k_in {
                let (memory, advantages) = batch(&current, &mut rollout)?;
                let g = {
                    let gain = SurrogateGain::new(&spec, &memory, &advantages, config.clip)?;
                    gradient(&current, &gain)?
                };
                let next = current.axpy(config.alpha_in, &g)?;
                batches.push((current, memory, advantages));
                current = next;
            }
            let (test_memory, test_advantages) = batch(&current, &mut rollout)?;
            let test_gain = SurrogateGain::new(&spec, &test_memory, &test_advantages, config.clip)?;
            let test_gradient = gradient(&current, &test_gain)?;
            let second_order = if config.variant == MetaVariant::Maml {
                let steps = batches
                    .iter()
                    .map(|(p, m, a)| Ok((p.clone(), SurrogateGain::new(&spec, m, a, config.clip)?)))
                    .collect::<Result<Vec<_>>>()?;
                Some(pull_back(&steps, config.alpha_in, test_gradient.clone())?)
            } else {
                None
            };
            results.push(InnerResult {
                theta_final: current.values().to_vec(),
                test_gradient,
                second_order,
            });
        }
        let delta = delta_theta(config.variant, outer.values(), &results)?;
        if config.alpha_out != 0.0 {
            outer = outer.axpy(config.alpha_out, &delta)?;
        }
        debug!("maml: outer iteration {}/{} done", k + 1, config.k_out);
    }
    Ok(outer)
}
