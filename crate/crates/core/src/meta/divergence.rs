//! Jensen-Shannon divergence between policies and divergence-based curation.

use serde::{Deserialize, Serialize};

use super::complement::PolicyComplement;
use super::select::descending_order;
use crate::error::{Error, Result};
use crate::nn::{check_len, ParameterVector};
use crate::ppo::policy::action_distribution;
use crate::ppo::Memory;

fn kl_term(p: f64, m: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / m).ln()
    }
}

/// JSD between two discrete distributions, natural log.
pub fn distribution_jsd(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must have equal support");
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        kl_p += kl_term(a, m);
        kl_q += kl_term(b, m);
    }
    // rounding can leave a tiny negative
    (0.5 * kl_p + 0.5 * kl_q).max(0.0)
}

/// JSD between two Bernoulli distributions given their success probabilities.
pub fn bernoulli_jsd(p: f64, q: f64) -> f64 {
    distribution_jsd(&[p, 1.0 - p], &[q, 1.0 - q])
}

/// Mean over memory states of the JSD between the two policies' action
/// distributions, summed over independent action bits.
pub fn js_divergence(a: &ParameterVector, b: &ParameterVector, memory: &Memory) -> Result<f64> {
    if a.spec() != b.spec() {
        return Err(Error::InvalidSpec(format!("cannot compare {} with {}", a.spec(), b.spec())));
    }
    check_len("divergence memory observation", a.spec().input_len(), memory.observation_len())?;
    if memory.is_empty() {
        return Err(Error::InvalidArgument("divergence needs a non-empty memory".into()));
    }
    let mut total = 0.0;
    for obs in memory.observations() {
        let pa = action_distribution(a, obs)?;
        let pb = action_distribution(b, obs)?;
        total += pa.iter().zip(&pb).map(|(&p, &q)| bernoulli_jsd(p, q)).sum::<f64>();
    }
    Ok(total / memory.len() as f64)
}

/// Symmetric matrix of pairwise divergences, zero diagonal.
pub fn divergence_matrix(complement: &PolicyComplement, memory: &Memory) -> Result<Vec<Vec<f64>>> {
    let n = complement.len();
    let entries = complement.entries();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = js_divergence(&entries[i].params, &entries[j].params, memory)?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curation {
    pub complement: PolicyComplement,
    /// Total divergence of each retained entry, aligned with `complement`.
    pub totals: Vec<f64>,
    /// Total divergence of every input entry, in input order.
    pub all_totals: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
}

/// Keeps the `s` entries with the largest total divergence from the rest.
pub fn curate_complement(complement: &PolicyComplement, s: usize, memory: &Memory) -> Result<Curation> {
    if s > complement.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {s} policies out of {}",
            complement.len()
        )));
    }
    let matrix = divergence_matrix(complement, memory)?;
    let all_totals: Vec<f64> = matrix.iter().map(|row| row.iter().sum()).collect();
    let order = descending_order(&all_totals);
    let kept = &order[..s];
    Ok(Curation {
        complement: complement.pick(kept),
        totals: kept.iter().map(|&i| all_totals[i]).collect(),
        all_totals,
        matrix,
    })
}
