//! Fixtures shared by the kernel benchmarks.

use emaml_core::meta::MetaConfig;
use emaml_core::ppo::log_probs_on;
use emaml_core::{
    seed, Action, ComplementEntry, EnvKind, Memory, ParameterVector, PolicyComplement, PpoConfig, ProcessParams,
};
use rand::Rng;

pub struct Fixture {
    pub kind: EnvKind,
    pub policy: ParameterVector,
    pub memory: Memory,
    pub complement: PolicyComplement,
    pub meta: MetaConfig,
}

impl Fixture {
    /// Default-sized networks, a `steps`-long memory of uniformly random
    /// actions on the nominal process, and `library` random stored policies.
    pub fn new(kind: EnvKind, steps: usize, library: usize) -> Self {
        let ppo = PpoConfig::for_kind(kind);
        let mut rng = seed::rng(seed::derive(7, "bench"));
        let policy = ParameterVector::init(ppo.action_spec(kind).unwrap(), &mut rng);
        let memory = random_walk(kind, &policy, steps, &mut rng);
        let entries = (0..library)
            .map(|i| {
                let params = ParameterVector::init(policy.spec().clone(), &mut rng);
                ComplementEntry::new(params, format!("fault-{i}"), 0)
            })
            .collect();
        Fixture {
            kind,
            policy,
            memory,
            complement: PolicyComplement::new(entries).unwrap(),
            meta: MetaConfig::for_kind(kind),
        }
    }
}

fn random_walk(kind: EnvKind, collector: &ParameterVector, steps: usize, rng: &mut impl Rng) -> Memory {
    let process = ProcessParams::nominal(kind);
    let actions_max = 1u8 << kind.action_bits();
    let mut state = process.reset_with(rng);
    let (mut obs, mut actions, mut rewards, mut ends) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in 0..steps {
        let action = Action(rng.gen_range(0..actions_max));
        obs.push(process.observe(&state));
        let step = process.step(&state, action).unwrap();
        actions.push(action);
        rewards.push(step.reward);
        state = if step.done && t + 1 < steps {
            ends.push(t);
            process.reset_with(rng)
        } else {
            step.next_state
        };
    }
    let lps = log_probs_on(collector, obs.iter(), &actions).unwrap();
    Memory::from_parts(obs, actions, rewards, lps, ends).unwrap()
}
