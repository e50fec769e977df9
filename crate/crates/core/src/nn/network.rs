use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scalar::{clamped_sigmoid, Scalar};
use crate::error::{Error, Result};

/// Output head applied to the last linear layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputHead {
    /// Independent Bernoulli per output unit through a logistic sigmoid.
    SigmoidBernoulli,
    /// Identity output (value networks).
    LinearScalar,
}

impl OutputHead {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputHead::SigmoidBernoulli => "sigmoid-bernoulli",
            OutputHead::LinearScalar => "linear-scalar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sigmoid-bernoulli" => Some(OutputHead::SigmoidBernoulli),
            "linear-scalar" => Some(OutputHead::LinearScalar),
            _ => None,
        }
    }
}

/// Topology of a tanh MLP: `layer_sizes[0]` inputs, hidden widths, then outputs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkSpec {
    layer_sizes: Vec<usize>,
    output_head: OutputHead,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, output_head: OutputHead) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::InvalidSpec(format!(
                "need input, at least one hidden and an output layer, got {:?}",
                layer_sizes
            )));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidSpec(format!(
                "layer sizes must be positive, got {:?}",
                layer_sizes
            )));
        }
        Ok(Self {
            layer_sizes,
            output_head,
        })
    }

    /// `input -> hidden... -> output` convenience constructor.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, head: OutputHead) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self::new(sizes, head)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn output_head(&self) -> OutputHead {
        self.output_head
    }

    pub fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// `(fan_in, fan_out, offset)` of every affine layer in the flat layout.
    ///
    /// Each layer stores a row-major `fan_out x fan_in` weight block followed
    /// by `fan_out` biases.
    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let here = offset;
            offset += (w[0] + 1) * w[1];
            (w[0], w[1], here)
        })
    }

    /// Pre-head output of the network.
    pub fn forward_raw<S: Scalar>(&self, params: &[S], input: &[S]) -> Vec<S> {
        self.trace(params, input).output
    }

    /// Forward pass keeping every layer's input for a later backward pass.
    pub fn trace<S: Scalar>(&self, params: &[S], input: &[S]) -> Trace<S> {
        debug_assert_eq!(params.len(), self.param_count());
        debug_assert_eq!(input.len(), self.input_len());
        let n_layers = self.layer_sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers);
        let mut current = input.to_vec();
        for (index, (fan_in, fan_out, offset)) in self.layers().enumerate() {
            let weights = &params[offset..offset + fan_in * fan_out];
            let biases = &params[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            let mut next = Vec::with_capacity(fan_out);
            for (row, &bias) in weights.chunks_exact(fan_in).zip(biases) {
                let mut acc = bias;
                for (&w, &x) in row.iter().zip(&current) {
                    acc += w * x;
                }
                next.push(if index + 1 < n_layers { acc.tanh() } else { acc });
            }
            activations.push(std::mem::replace(&mut current, next));
        }
        Trace {
            activations,
            output: current,
        }
    }

    /// Accumulates `d_output^T · ∂output/∂params` into `grad`.
    ///
    /// `d_output` is the derivative of the loss with respect to the pre-head
    /// output recorded in `trace`.
    pub fn backward<S: Scalar>(&self, params: &[S], trace: &Trace<S>, d_output: &[S], grad: &mut [S]) {
        debug_assert_eq!(grad.len(), self.param_count());
        let layers: Vec<_> = self.layers().collect();
        let mut delta = d_output.to_vec();
        for (index, &(fan_in, fan_out, offset)) in layers.iter().enumerate().rev() {
            let input = &trace.activations[index];
            let w_end = offset + fan_in * fan_out;
            for (o, &d) in delta.iter().enumerate() {
                let row = offset + o * fan_in;
                for (g, &x) in grad[row..row + fan_in].iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[w_end + o] += d;
            }
            if index == 0 {
                break;
            }
            let weights = &params[offset..w_end];
            let mut upstream = vec![S::zero(); fan_in];
            for (row, &d) in weights.chunks_exact(fan_in).zip(&delta) {
                for (u, &w) in upstream.iter_mut().zip(row) {
                    *u += w * d;
                }
            }
            // The layer input is the tanh output of the previous layer.
            for (u, &a) in upstream.iter_mut().zip(input) {
                *u *= S::one() - a * a;
            }
            delta = upstream;
        }
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.layer_sizes.iter().map(|n| n.to_string()).collect();
        write!(f, "{} ({})", sizes.join("-"), self.output_head.as_str())
    }
}

/// Per-layer inputs of one forward pass plus the pre-head output.
#[derive(Clone, Debug)]
pub struct Trace<S> {
    activations: Vec<Vec<S>>,
    pub output: Vec<S>,
}

/// Flat weight vector of one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    spec: NetworkSpec,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn from_values(spec: NetworkSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: spec.param_count(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: NetworkSpec) -> Self {
        let values = vec![0.0; spec.param_count()];
        Self { spec, values }
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)` per layer.
    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Self {
        let mut values = Vec::with_capacity(spec.param_count());
        for (fan_in, fan_out, _) in spec.layers() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..(fan_in + 1) * fan_out {
                values.push(rng.gen_range(-bound..=bound));
            }
        }
        Self { spec, values }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replaces the values, keeping the spec. Length and finiteness are checked.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_values(self.spec.clone(), values)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `self + scale * direction`, checked for finiteness.
    pub fn axpy(&self, scale: f64, direction: &[f64]) -> Result<Self> {
        check_len("axpy direction", self.len(), direction.len())?;
        let values = self
            .values
            .iter()
            .zip(direction)
            .map(|(&p, &d)| p + scale * d)
            .collect();
        self.with_values(values)
    }

    /// Network output with the head applied.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("forward input", self.spec.input_len(), input.len())?;
        let raw = self.spec.forward_raw(&self.values, input);
        Ok(match self.spec.output_head {
            OutputHead::LinearScalar => raw,
            OutputHead::SigmoidBernoulli => raw.into_iter().map(|z| clamped_sigmoid(z).0).collect(),
        })
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    } else {
        Ok(())
    }
}
