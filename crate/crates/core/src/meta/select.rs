//! Ordering of stored policies by their score on buffered experience.

use serde::{Deserialize, Serialize};

use super::complement::PolicyComplement;
use super::score::{expected_return_score_with, ReturnBaseline};
use crate::error::{Error, Result};
use crate::ppo::Memory;

/// Indices of `scores` sorted by descending score; equal scores keep their
/// original order.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Score of every complement entry, in complement order.
pub fn score_complement(
    complement: &PolicyComplement,
    memory: &Memory,
    gamma: f64,
    baseline: ReturnBaseline,
) -> Result<Vec<f64>> {
    complement
        .entries()
        .iter()
        .map(|e| expected_return_score_with(&e.params, memory, gamma, baseline))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// Score of each input entry, in input order.
    pub scores: Vec<f64>,
    /// Input indices from best to worst.
    pub order: Vec<usize>,
    /// The first `r` entries of `order`.
    pub selected: PolicyComplement,
}

impl Ranking {
    /// 1-based rank of each input entry.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (rank, &i) in self.order.iter().enumerate() {
            ranks[i] = rank + 1;
        }
        ranks
    }
}

/// Top `r` entries by score given precomputed scores.
pub fn select_top(complement: &PolicyComplement, scores: &[f64], r: usize) -> Result<Ranking> {
    if scores.len() != complement.len() {
        return Err(Error::DimensionMismatch {
            context: "complement scores",
            expected: complement.len(),
            actual: scores.len(),
        });
    }
    if r > complement.len() {
        return Err(Error::InvalidArgument(format!(
            "rank {r} exceeds complement size {}",
            complement.len()
        )));
    }
    let order = descending_order(scores);
    Ok(Ranking {
        scores: scores.to_vec(),
        selected: complement.pick(&order[..r]),
        order,
    })
}

/// Scores every entry on `memory` and keeps the best `r`.
pub fn rank_and_select(
    complement: &PolicyComplement,
    memory: &Memory,
    r: usize,
    gamma: f64,
    baseline: ReturnBaseline,
) -> Result<Ranking> {
    if complement.is_empty() && r > 0 {
        return Err(Error::InvalidArgument("cannot select from an empty complement".into()));
    }
    let scores = score_complement(complement, memory, gamma, baseline)?;
    select_top(complement, &scores, r)
}
