//! Meta-learning over a library of policies trained on past faults.

pub mod complement;
pub mod divergence;
pub mod maml;
pub mod score;
pub mod select;
pub mod update;

pub use complement::{ComplementEntry, PolicyComplement};
pub use divergence::{bernoulli_jsd, curate_complement, distribution_jsd, divergence_matrix, js_divergence, Curation};
pub use maml::maml_train;
pub use score::{
    expected_return_gradient, expected_return_score, expected_return_score_with, weighted_returns,
    ExpectedReturnGain, ReturnBaseline,
};
pub use select::{descending_order, rank_and_select, score_complement, select_top, Ranking};
pub use update::{delta_theta, emaml_meta_update, InnerResult, MetaConfig, MetaOutcome, MetaStatus, MetaVariant};
