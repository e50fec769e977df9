//! Process simulators. Faults are edits to [`ProcessParams`].

pub mod cartpole;
pub mod fault;
pub mod fueltank;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cartpole::{CartPoleParams, CartPoleState};
pub use fault::{inject_fault, EditOp, FaultSpec};
pub use fueltank::{FuelTankParams, FuelTankState};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    CartPole,
    FuelTank,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::FuelTank => "fueltank",
        }
    }

    pub fn observation_len(self) -> usize {
        match self {
            EnvKind::CartPole => 4,
            EnvKind::FuelTank => fueltank::TANKS,
        }
    }

    /// Number of independent binary action components.
    pub fn action_bits(self) -> usize {
        match self {
            EnvKind::CartPole => 1,
            EnvKind::FuelTank => fueltank::TANKS,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bit-packed binary action. Cart-pole: bit 0 set pushes with `+F`.
/// Fuel tanks: bit `i` set opens the valve of tank `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Action(pub u8);

impl Action {
    pub fn bit(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Action(
            bits.iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| if b { acc | (1 << i) } else { acc }),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProcessParams {
    CartPole(CartPoleParams),
    FuelTank(FuelTankParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnvState {
    CartPole(CartPoleState),
    FuelTank(FuelTankState),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
}

impl ProcessParams {
    pub fn nominal(kind: EnvKind) -> Self {
        match kind {
            EnvKind::CartPole => ProcessParams::CartPole(CartPoleParams::default()),
            EnvKind::FuelTank => ProcessParams::FuelTank(FuelTankParams::default()),
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self {
            ProcessParams::CartPole(_) => EnvKind::CartPole,
            ProcessParams::FuelTank(_) => EnvKind::FuelTank,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessParams::CartPole(p) => p.validate(),
            ProcessParams::FuelTank(p) => p.validate(),
        }
    }

    /// Initial state drawn from `rng`. Fuel tanks always start at nominal fill.
    pub fn reset_with<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        match self {
            ProcessParams::CartPole(_) => EnvState::CartPole(cartpole::reset(rng)),
            ProcessParams::FuelTank(p) => EnvState::FuelTank(fueltank::reset(p)),
        }
    }

    pub fn reset(&self, seed: u64) -> EnvState {
        self.reset_with(&mut seed::rng(seed))
    }

    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        match (self, state) {
            (_, EnvState::CartPole(s)) => s.observation(),
            (ProcessParams::FuelTank(p), EnvState::FuelTank(s)) => s.observation(p),
            (ProcessParams::CartPole(_), EnvState::FuelTank(s)) => s.levels.to_vec(),
        }
    }

    pub fn step(&self, state: &EnvState, action: Action) -> Result<StepResult> {
        let (next_state, reward, done) = match (self, state) {
            (ProcessParams::CartPole(p), EnvState::CartPole(s)) => {
                let (n, r, d) = cartpole::step(p, s, action.bit(0))?;
                (EnvState::CartPole(n), r, d)
            }
            (ProcessParams::FuelTank(p), EnvState::FuelTank(s)) => {
                let (n, r, d) = fueltank::step(p, s, action.0)?;
                (EnvState::FuelTank(n), r, d)
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "state does not belong to a {} process",
                    self.kind()
                )))
            }
        };
        Ok(StepResult {
            next_state,
            reward,
            done,
        })
    }
}

/// Nominal process with every physical parameter independently scaled by a
/// factor drawn uniformly from `[1 - spread, 1 + spread]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessFamily {
    pub nominal: ProcessParams,
    pub spread: f64,
}

impl ProcessFamily {
    pub fn new(nominal: ProcessParams, spread: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&spread) {
            return Err(Error::InvalidArgument(format!(
                "family spread must lie in [0, 1), got {spread}"
            )));
        }
        Ok(Self { nominal, spread })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProcessParams {
        let mut jitter = |v: &mut f64| {
            if self.spread > 0.0 {
                *v *= rng.gen_range(1.0 - self.spread..=1.0 + self.spread);
            }
        };
        let mut p = self.nominal.clone();
        match &mut p {
            ProcessParams::CartPole(c) => {
                for v in [&mut c.m_c, &mut c.m_p, &mut c.l, &mut c.force] {
                    jitter(v);
                }
            }
            ProcessParams::FuelTank(f) => {
                f.resistances.iter_mut().for_each(&mut jitter);
                f.pump_rates.iter_mut().for_each(&mut jitter);
                f.engine_rates.iter_mut().for_each(&mut jitter);
            }
        }
        p
    }
}
