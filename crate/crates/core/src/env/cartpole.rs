//! Cart-pole with the classic Barto-Sutton-Anderson dynamics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.8;
pub const TAU: f64 = 0.02;
pub const THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const X_LIMIT: f64 = 2.4;
pub const RESET_RANGE: f64 = 0.05;

fn default_max_steps() -> u32 {
    500
}

/// Physical parameters. The sign of `force` fixes which action pushes which way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub m_c: f64,
    pub m_p: f64,
    /// Pole half-length.
    pub l: f64,
    #[serde(rename = "F")]
    pub force: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            m_c: 1.0,
            m_p: 0.1,
            l: 0.5,
            force: 10.0,
            max_steps: default_max_steps(),
        }
    }
}

impl CartPoleParams {
    pub fn new(m_c: f64, m_p: f64, l: f64, force: f64) -> Result<Self> {
        let p = Self {
            m_c,
            m_p,
            l,
            force,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [("m_c", self.m_c), ("m_p", self.m_p), ("l", self.l)] {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.force.is_finite() && self.force != 0.0) {
            problems.push(format!("F must be finite and non-zero, got {}", self.force));
        }
        if self.max_steps == 0 {
            problems.push("max_steps must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: u32,
}

impl CartPoleState {
    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            x,
            x_dot,
            theta,
            theta_dot,
            steps: 0,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    fn is_finite(&self) -> bool {
        [self.x, self.x_dot, self.theta, self.theta_dot]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn has_failed(&self) -> bool {
        self.theta.abs() > THETA_LIMIT || self.x.abs() > X_LIMIT
    }
}

pub fn reset<R: Rng + ?Sized>(rng: &mut R) -> CartPoleState {
    let mut draw = || rng.gen_range(-RESET_RANGE..=RESET_RANGE);
    let (x, x_dot, theta, theta_dot) = (draw(), draw(), draw(), draw());
    CartPoleState::new(x, x_dot, theta, theta_dot)
}

/// Cart and pole accelerations `(ẍ, θ̈)` under the signed applied force.
pub fn accelerations(params: &CartPoleParams, state: &CartPoleState, applied: f64) -> (f64, f64) {
    let total_mass = params.m_c + params.m_p;
    let polemass_length = params.m_p * params.l;
    let (sin, cos) = state.theta.sin_cos();
    let temp = (applied + polemass_length * state.theta_dot * state.theta_dot * sin) / total_mass;
    let theta_acc =
        (GRAVITY * sin - cos * temp) / (params.l * (4.0 / 3.0 - params.m_p * cos * cos / total_mass));
    let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
    (x_acc, theta_acc)
}

/// `push_right` applies `+F`, otherwise `-F`.
pub fn step(params: &CartPoleParams, state: &CartPoleState, push_right: bool) -> Result<(CartPoleState, f64, bool)> {
    if !state.is_finite() {
        return Err(Error::NonFinite("cart-pole state"));
    }
    let applied = if push_right { params.force } else { -params.force };
    let (x_acc, theta_acc) = accelerations(params, state, applied);
    // semi-implicit Euler: positions advance with the updated velocities
    let x_dot = state.x_dot + TAU * x_acc;
    let theta_dot = state.theta_dot + TAU * theta_acc;
    let next = CartPoleState {
        x: state.x + TAU * x_dot,
        x_dot,
        theta: state.theta + TAU * theta_dot,
        theta_dot,
        steps: state.steps + 1,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("cart-pole state"));
    }
    let failed = next.has_failed();
    let done = failed || next.steps >= params.max_steps;
    let reward = if failed { 0.0 } else { 1.0 };
    Ok((next, reward, done))
}
