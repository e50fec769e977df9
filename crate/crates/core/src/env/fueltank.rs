//! Six-tank wing fuel-transfer system.
//!
//! Tanks are laid out left to right, `0..=2` on the left wing and `3..=5` on
//! the right. Every open valve connects its tank to a shared manifold; the
//! manifold level is the one at which the net manifold flow is zero. Engines
//! draw from their feed tanks after transfer and leaks drain unconditionally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TANKS: usize = 6;
pub const ENGINES: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub balance: f64,
    pub extremity: f64,
    pub loss: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            balance: 1.0,
            extremity: 0.5,
            loss: 1.0,
        }
    }
}

fn default_positions() -> [f64; TANKS] {
    [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]
}

fn default_fill() -> f64 {
    50.0
}

fn default_feed() -> [usize; ENGINES] {
    [2, 3]
}

fn default_max_steps() -> u32 {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuelTankParams {
    pub resistances: [f64; TANKS],
    pub pump_rates: [f64; TANKS],
    pub engine_rates: [f64; ENGINES],
    #[serde(default = "default_positions")]
    pub tank_positions: [f64; TANKS],
    #[serde(default)]
    pub leak_rates: [f64; TANKS],
    #[serde(default = "default_fill")]
    pub nominal_fill: f64,
    /// Tank index each engine draws from.
    #[serde(default = "default_feed")]
    pub engine_feed: [usize; ENGINES],
    #[serde(default)]
    pub reward: RewardWeights,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
}

impl Default for FuelTankParams {
    fn default() -> Self {
        Self {
            resistances: [100.0; TANKS],
            pump_rates: [0.1; TANKS],
            engine_rates: [0.1; ENGINES],
            tank_positions: default_positions(),
            leak_rates: [0.0; TANKS],
            nominal_fill: default_fill(),
            engine_feed: default_feed(),
            reward: RewardWeights::default(),
            max_steps: default_max_steps(),
        }
    }
}

impl FuelTankParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |name: &str, values: &[f64], strictly_positive: bool| {
            for (i, &v) in values.iter().enumerate() {
                let ok = v.is_finite() && if strictly_positive { v > 0.0 } else { v >= 0.0 };
                if !ok {
                    let rule = if strictly_positive { "> 0" } else { ">= 0" };
                    problems.push(format!("{name}[{i}] must be finite and {rule}, got {v}"));
                }
            }
        };
        check("resistances", &self.resistances, true);
        check("pump_rates", &self.pump_rates, false);
        check("engine_rates", &self.engine_rates, false);
        check("leak_rates", &self.leak_rates, false);
        check("nominal_fill", &[self.nominal_fill], true);
        if self.tank_positions.iter().any(|p| !p.is_finite()) {
            problems.push("tank_positions must be finite".into());
        }
        if self.engine_feed.iter().any(|&t| t >= TANKS) {
            problems.push(format!("engine_feed entries must be < {TANKS}"));
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
pub struct FuelTankState {
    pub levels: [f64; TANKS],
    pub steps: u32,
    /// Fuel burnt by the engines since reset.
    pub engine_draw: f64,
    /// Fuel lost to leaks since reset.
    pub leak_draw: f64,
}

impl FuelTankState {
    pub fn total(&self) -> f64 {
        self.levels.iter().sum()
    }

    pub fn observation(&self, params: &FuelTankParams) -> Vec<f64> {
        self.levels.iter().map(|l| l / params.nominal_fill).collect()
    }
}

pub fn reset(params: &FuelTankParams) -> FuelTankState {
    FuelTankState {
        levels: [params.nominal_fill; TANKS],
        steps: 0,
        engine_draw: 0.0,
        leak_draw: 0.0,
    }
}

/// Signed outflow of one open tank into the manifold at manifold level `h`.
fn tank_flow(level: f64, resistance: f64, pump: f64, h: f64) -> f64 {
    ((level - h) / resistance).clamp(-pump, pump.min(level))
}

/// Manifold level and per-tank outflows for the open tanks.
///
/// Net outflow is piecewise linear and non-increasing in the manifold level,
/// so the zero crossing is found exactly between adjacent breakpoints.
pub fn manifold_flows(levels: &[f64; TANKS], open: [bool; TANKS], params: &FuelTankParams) -> (Option<f64>, [f64; TANKS]) {
    let mut flows = [0.0; TANKS];
    let active: Vec<usize> = (0..TANKS)
        .filter(|&i| open[i] && params.pump_rates[i] > 0.0)
        .collect();
    if active.len() < 2 {
        return (None, flows);
    }
    let net = |h: f64| -> f64 {
        active
            .iter()
            .map(|&i| tank_flow(levels[i], params.resistances[i], params.pump_rates[i], h))
            .sum()
    };
    let mut breaks: Vec<f64> = active
        .iter()
        .flat_map(|&i| {
            let (l, r, p) = (levels[i], params.resistances[i], params.pump_rates[i]);
            [l - r * p.min(l), l + r * p]
        })
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut h = breaks[breaks.len() - 1];
    let mut hi_val = net(breaks[0]);
    if hi_val <= 0.0 {
        h = breaks[0];
    } else {
        for w in breaks.windows(2) {
            let lo_val = net(w[1]);
            if lo_val <= 0.0 {
                h = if hi_val == lo_val {
                    w[0]
                } else {
                    w[0] + (w[1] - w[0]) * hi_val / (hi_val - lo_val)
                };
                break;
            }
            hi_val = lo_val;
        }
    }
    for &i in &active {
        flows[i] = tank_flow(levels[i], params.resistances[i], params.pump_rates[i], h);
    }
    (Some(h), flows)
}

/// One transfer step. Bit `i` of `valves` opens the valve of tank `i`.
pub fn step(params: &FuelTankParams, state: &FuelTankState, valves: u8) -> Result<(FuelTankState, f64, bool)> {
    if state.levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "fuel levels must be finite and non-negative, got {:?}",
            state.levels
        )));
    }
    let open: [bool; TANKS] = std::array::from_fn(|i| valves & (1 << i) != 0);
    let (_, flows) = manifold_flows(&state.levels, open, params);
    let mut levels = state.levels;
    for (l, f) in levels.iter_mut().zip(flows) {
        *l = (*l - f).max(0.0);
    }
    let mut engine_draw = 0.0;
    for (&tank, &rate) in params.engine_feed.iter().zip(&params.engine_rates) {
        let d = rate.min(levels[tank]);
        levels[tank] -= d;
        engine_draw += d;
    }
    let mut leak_draw = 0.0;
    for (l, &rate) in levels.iter_mut().zip(&params.leak_rates) {
        let d = rate.min(*l);
        *l -= d;
        leak_draw += d;
    }

    let next = FuelTankState {
        levels,
        steps: state.steps + 1,
        engine_draw: state.engine_draw + engine_draw,
        leak_draw: state.leak_draw + leak_draw,
    };
    let reward = reward(params, &next.levels, leak_draw);
    let done = next.steps >= params.max_steps || next.total() <= 0.0;
    Ok((next, reward, done))
}

/// `-w_b·|moment| + w_e·outboard_fraction - w_f·lost`.
pub fn reward(params: &FuelTankParams, levels: &[f64; TANKS], lost: f64) -> f64 {
    let moment: f64 = levels
        .iter()
        .zip(&params.tank_positions)
        .map(|(l, p)| l * p)
        .sum();
    let total: f64 = levels.iter().sum();
    let outboard = if total > 0.0 {
        (levels[0] + levels[TANKS - 1]) / total
    } else {
        0.0
    };
    let w = &params.reward;
    -w.balance * moment.abs() + w.extremity * outboard - w.loss * lost
}
