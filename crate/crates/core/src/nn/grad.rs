//! Differentiable objectives over flat parameter vectors.

use super::network::{check_len, NetworkSpec, ParameterVector};
use super::scalar::{Dual, Scalar};
use crate::error::{Error, Result};

/// A scalar function of a parameter vector with a hand-derived reverse pass.
///
/// `evaluate` returns the objective value and adds its gradient into `grad`
/// (which the caller zeroes). Implementations are generic over [`Scalar`] so
/// the same code yields Hessian-vector products when run on [`Dual`]s.
pub trait Objective {
    fn param_len(&self) -> usize;

    fn evaluate<S: Scalar>(&self, params: &[S], grad: &mut [S]) -> Result<S>;
}

/// Objective value and gradient at `params`.
pub fn value_and_gradient<O: Objective + ?Sized>(params: &[f64], objective: &O) -> Result<(f64, Vec<f64>)> {
    check_len("objective parameters", objective.param_len(), params.len())?;
    let mut grad = vec![0.0; params.len()];
    let value = objective.evaluate(params, &mut grad)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss(value));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok((value, grad))
}

/// `∂objective/∂params`.
pub fn gradient<O: Objective + ?Sized>(params: &ParameterVector, objective: &O) -> Result<Vec<f64>> {
    value_and_gradient(params.values(), objective).map(|(_, g)| g)
}

/// Exact `H(params) · direction` by forward-mode differentiation of the
/// reverse pass.
pub fn hessian_vector_product<O: Objective + ?Sized>(params: &[f64], objective: &O, direction: &[f64]) -> Result<Vec<f64>> {
    check_len("objective parameters", objective.param_len(), params.len())?;
    check_len("hessian direction", params.len(), direction.len())?;
    let dual: Vec<Dual> = params
        .iter()
        .zip(direction)
        .map(|(&p, &d)| Dual::new(p, d))
        .collect();
    let mut grad = vec![Dual::default(); params.len()];
    let value = objective.evaluate(&dual, &mut grad)?;
    if !value.re.is_finite() {
        return Err(Error::NonFiniteLoss(value.re));
    }
    let hv: Vec<f64> = grad.into_iter().map(|g| g.eps).collect();
    if hv.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hessian-vector product"));
    }
    Ok(hv)
}

/// `-objective`, turning a gain into a loss.
#[derive(Clone, Debug)]
pub struct Negated<O>(pub O);

impl<O: Objective> Objective for Negated<O> {
    fn param_len(&self) -> usize {
        self.0.param_len()
    }

    fn evaluate<S: Scalar>(&self, params: &[S], grad: &mut [S]) -> Result<S> {
        let mut inner = vec![S::zero(); grad.len()];
        let value = self.0.evaluate(params, &mut inner)?;
        for (g, i) in grad.iter_mut().zip(inner) {
            *g -= i;
        }
        Ok(-value)
    }
}

/// Mean squared error of a network's pre-head outputs against targets.
#[derive(Clone, Debug)]
pub struct SquaredError<'a> {
    spec: &'a NetworkSpec,
    inputs: &'a [Vec<f64>],
    targets: &'a [Vec<f64>],
}

impl<'a> SquaredError<'a> {
    pub fn new(spec: &'a NetworkSpec, inputs: &'a [Vec<f64>], targets: &'a [Vec<f64>]) -> Result<Self> {
        check_len("squared-error targets", inputs.len(), targets.len())?;
        for (x, y) in inputs.iter().zip(targets) {
            check_len("squared-error input", spec.input_len(), x.len())?;
            check_len("squared-error target", spec.output_len(), y.len())?;
        }
        Ok(Self { spec, inputs, targets })
    }
}

impl Objective for SquaredError<'_> {
    fn param_len(&self) -> usize {
        self.spec.param_count()
    }

    fn evaluate<S: Scalar>(&self, params: &[S], grad: &mut [S]) -> Result<S> {
        let n = S::from_f64(self.inputs.len().max(1) as f64);
        let mut total = S::zero();
        for (x, y) in self.inputs.iter().zip(self.targets) {
            let x: Vec<S> = x.iter().map(|&v| S::from_f64(v)).collect();
            let trace = self.spec.trace(params, &x);
            let d_out: Vec<S> = trace
                .output
                .iter()
                .zip(y)
                .map(|(&o, &t)| {
                    let diff = o - S::from_f64(t);
                    total += diff * diff;
                    S::from_f64(2.0) * diff / n
                })
                .collect();
            self.spec.backward(params, &trace, &d_out, grad);
        }
        Ok(total / n)
    }
}
