//! Fixed-topology MLPs over flat parameter vectors.

mod adam;
mod grad;
mod io;
mod network;
mod scalar;

pub use adam::{adam_step, AdamState, Direction};
pub use grad::{gradient, hessian_vector_product, value_and_gradient, Negated, Objective, SquaredError};
pub(crate) use io::write_atomic;
pub use network::{NetworkSpec, OutputHead, ParameterVector, Trace};
pub(crate) use network::check_len;
pub use scalar::{clamped_sigmoid, sigmoid_f64, Dual, Scalar};

/// Lower clamp on Bernoulli probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-7;
/// Upper clamp on Bernoulli probabilities before taking logarithms.
pub const PROB_CEIL: f64 = 1.0 - 1e-7;
