//! Outer-loop update rules and the memory-driven meta-update.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use super::complement::PolicyComplement;
use super::score::{weighted_returns, ReturnBaseline};
use super::select::{rank_and_select, Ranking};
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::nn::{check_len, gradient, hessian_vector_product, Objective, ParameterVector};
use crate::ppo::loss::SurrogateGain;
use crate::ppo::policy::log_probs_on;
use crate::ppo::Memory;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaVariant {
    Maml,
    #[default]
    Fomaml,
    Reptile,
}

impl MetaVariant {
    pub const ALL: [MetaVariant; 3] = [MetaVariant::Maml, MetaVariant::Fomaml, MetaVariant::Reptile];

    pub fn as_str(self) -> &'static str {
        match self {
            MetaVariant::Maml => "maml",
            MetaVariant::Fomaml => "fomaml",
            MetaVariant::Reptile => "reptile",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

impl fmt::Display for MetaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    /// Post-fault steps buffered before the meta-update.
    pub memory_size: usize,
    pub alpha_in: f64,
    pub alpha_out: f64,
    pub k_in: usize,
    pub k_out: usize,
    /// Number of stored policies selected for the update.
    pub rank: usize,
    /// Number of policies kept after curation.
    pub complement_size: usize,
    pub variant: MetaVariant,
    pub gamma: f64,
    pub clip: f64,
    pub return_baseline: ReturnBaseline,
    /// Processes sampled per outer iteration of the MAML baseline.
    pub tasks: usize,
    /// Relative spread of physical parameters in the MAML process family.
    pub family_spread: f64,
}

impl MetaConfig {
    pub fn for_kind(kind: EnvKind) -> Self {
        let (memory_size, alpha_out, k_in, k_out) = match kind {
            EnvKind::CartPole => (2000, 0.002, 0, 5),
            EnvKind::FuelTank => (4000, 0.001, 3, 3),
        };
        Self {
            memory_size,
            alpha_in: 0.001,
            alpha_out,
            k_in,
            k_out,
            rank: 2,
            complement_size: 4,
            variant: MetaVariant::Fomaml,
            gamma: 0.99,
            clip: 0.2,
            return_baseline: ReturnBaseline::Mean,
            tasks: 4,
            family_spread: 0.2,
        }
    }

    /// Every violated constraint, in field order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.memory_size < 1 {
            out.push("meta.memory_size must be >= 1".into());
        }
        for (name, v) in [("meta.alpha_in", self.alpha_in), ("meta.alpha_out", self.alpha_out)] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.k_out < 1 {
            out.push("meta.k_out must be >= 1".into());
        }
        if self.rank > self.complement_size {
            out.push(format!(
                "meta.rank {} exceeds meta.complement_size {}",
                self.rank, self.complement_size
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            out.push(format!("meta.gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            out.push(format!("meta.clip must be > 0, got {}", self.clip));
        }
        if self.tasks < 1 {
            out.push("meta.tasks must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.family_spread) {
            out.push(format!("meta.family_spread must lie in [0, 1), got {}", self.family_spread));
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
}

/// Outcome of adapting one policy in the inner loop.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerResult {
    pub theta_final: Vec<f64>,
    /// Gradient of the test gain at `theta_final`.
    pub test_gradient: Vec<f64>,
    /// Test gradient pulled back through the inner steps (transposed
    /// Jacobian of `theta_final` with respect to the starting point).
    pub second_order: Option<Vec<f64>>,
}

/// Update direction for the outer parameters.
pub fn delta_theta(variant: MetaVariant, theta_out: &[f64], inner: &[InnerResult]) -> Result<Vec<f64>> {
    let n = theta_out.len();
    let mut delta = vec![0.0; n];
    for (i, r) in inner.iter().enumerate() {
        let term: &[f64] = match variant {
            MetaVariant::Maml => r.second_order.as_deref().ok_or_else(|| {
                Error::InvalidArgument(format!("maml update needs second-order terms for inner result {i}"))
            })?,
            MetaVariant::Fomaml => &r.test_gradient,
            MetaVariant::Reptile => &r.theta_final,
        };
        check_len("inner result", n, term.len())?;
        if variant == MetaVariant::Reptile {
            for ((d, t), o) in delta.iter_mut().zip(term).zip(theta_out) {
                *d += t - o;
            }
        } else {
            for (d, t) in delta.iter_mut().zip(term) {
                *d += t;
            }
        }
    }
    Ok(delta)
}

/// `v ← (I + α·H(θ_k))ᵀ v` for the recorded inner steps, last step first.
pub(crate) fn pull_back<O: Objective>(
    steps: &[(ParameterVector, O)],
    alpha: f64,
    mut v: Vec<f64>,
) -> Result<Vec<f64>> {
    for (params, objective) in steps.iter().rev() {
        let hv = hessian_vector_product(params.values(), objective, &v)?;
        for (vi, h) in v.iter_mut().zip(hv) {
            *vi += alpha * h;
        }
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaStatus {
    Updated,
    /// Nothing was selected; the parameters are returned unchanged.
    EmptySelection,
}

#[derive(Clone, Debug)]
pub struct MetaOutcome {
    pub params: ParameterVector,
    pub status: MetaStatus,
    pub ranking: Option<Ranking>,
}

/// Adapts `theta` towards the stored policies that score best on `memory`,
/// without further interaction with the process.
pub fn emaml_meta_update(
    theta: &ParameterVector,
    memory: &Memory,
    complement: &PolicyComplement,
    config: &MetaConfig,
) -> Result<MetaOutcome> {
    config.validate()?;
    if let Some(spec) = complement.spec() {
        if spec != theta.spec() {
            return Err(Error::InvalidSpec(format!(
                "complement spec {spec} differs from controller spec {}",
                theta.spec()
            )));
        }
    }
    let rank = config.rank.min(complement.len());
    if rank == 0 {
        warn!("meta-update skipped: no policies selected from a complement of {}", complement.len());
        return Ok(MetaOutcome {
            params: theta.clone(),
            status: MetaStatus::EmptySelection,
            ranking: None,
        });
    }
    let ranking = rank_and_select(complement, memory, rank, config.gamma, config.return_baseline)?;
    let advantages = weighted_returns(memory, config.gamma, config.return_baseline);
    let spec = theta.spec();
    let mut inner: Vec<ParameterVector> = ranking.selected.entries().iter().map(|e| e.params.clone()).collect();
    let mut outer = theta.clone();
    for _ in 0..config.k_out {
        let mut results = Vec::with_capacity(inner.len());
        for policy in inner.iter_mut() {
            let reference = log_probs_on(policy, memory.observations(), memory.actions())?;
            let gain = SurrogateGain::with_reference(spec, memory, &reference, &advantages, config.clip)?;
            let mut steps = Vec::with_capacity(config.k_in);
            let mut current = policy.clone();
            for _ in 0..config.k_in {
                let g = gradient(&current, &gain)?;
                let next = current.axpy(config.alpha_in, &g)?;
                steps.push((current, gain.clone()));
                current = next;
            }
            let test_gradient = gradient(&current, &gain)?;
            let second_order = match config.variant {
                MetaVariant::Maml => Some(pull_back(&steps, config.alpha_in, test_gradient.clone())?),
                _ => None,
            };
            results.push(InnerResult {
                theta_final: current.values().to_vec(),
                test_gradient,
                second_order,
            });
            *policy = current;
        }
        let delta = delta_theta(config.variant, outer.values(), &results)?;
        if config.alpha_out != 0.0 {
            outer = outer.axpy(config.alpha_out, &delta)?;
        }
    }
    Ok(MetaOutcome {
        params: outer,
        status: MetaStatus::Updated,
        ranking: Some(ranking),
    })
}
