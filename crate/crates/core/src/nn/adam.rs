use serde::{Deserialize, Serialize};

use super::network::{check_len, ParameterVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ascent,
    Descent,
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub epsilon: f64,
}

impl AdamState {
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(len: usize, learning_rate: f64, betas: (f64, f64)) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            learning_rate,
            betas,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// In-place update of `params` along `grad`.
    pub fn step(&mut self, params: &mut ParameterVector, grad: &[f64], direction: Direction) -> Result<()> {
        check_len("adam moments", self.first_moment.len(), params.len())?;
        check_len("adam gradient", params.len(), grad.len())?;
        self.step_count += 1;
        let (b1, b2) = self.betas;
        let t = self.step_count as i32;
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        let sign = match direction {
            Direction::Descent => 1.0,
            Direction::Ascent => -1.0,
        };
        let values = params.values_mut();
        for i in 0..values.len() {
            let g = sign * grad[i];
            let m = b1 * self.first_moment[i] + (1.0 - b1) * g;
            let v = b2 * self.second_moment[i] + (1.0 - b2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / correction1;
            let v_hat = v / correction2;
            values[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameters after adam step"));
        }
        Ok(())
    }
}

/// Value-returning form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    params: &ParameterVector,
    grad: &[f64],
    direction: Direction,
) -> Result<(ParameterVector, AdamState)> {
    let mut state = state.clone();
    let mut params = params.clone();
    state.step(&mut params, grad, direction)?;
    Ok((params, state))
}
