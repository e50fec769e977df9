//! Faults as structured edits of process parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CartPoleParams, FuelTankParams, ProcessParams};
use crate::error::{Error, Result};

/// One edit applied to a parameter field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Set(f64),
    Scale(f64),
    Negate,
    /// Sets the field to zero (a dead pump, a stopped engine).
    Disable,
}

impl EditOp {
    fn apply(self, v: f64) -> f64 {
        match self {
            EditOp::Set(x) => x,
            EditOp::Scale(k) => v * k,
            EditOp::Negate => -v,
            EditOp::Disable => 0.0,
        }
    }
}

/// Named set of field edits.
///
/// Field names are `m_c`, `m_p`, `l`, `F` for the cart-pole and
/// `resistances`, `pump_rates`, `engine_rates`, `leak_rates`,
/// `tank_positions` (optionally indexed, `pump_rates[1]`) for the fuel tanks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub label: String,
    #[serde(default)]
    pub edits: BTreeMap<String, EditOp>,
}

impl FaultSpec {
    pub fn identity(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            edits: BTreeMap::new(),
        }
    }

    pub fn with(mut self, field: &str, op: EditOp) -> Self {
        self.edits.insert(field.to_string(), op);
        self
    }
}

fn parse_field(field: &str) -> Result<(&str, Option<usize>)> {
    match field.split_once('[') {
        None => Ok((field, None)),
        Some((name, rest)) => {
            let index = rest
                .strip_suffix(']')
                .and_then(|i| i.trim().parse::<usize>().ok())
                .ok_or_else(|| Error::InvalidFault(format!("malformed field `{field}`")))?;
            Ok((name, Some(index)))
        }
    }
}

fn edit_slice(values: &mut [f64], index: Option<usize>, op: EditOp, field: &str) -> Result<()> {
    match index {
        None => values.iter_mut().for_each(|v| *v = op.apply(*v)),
        Some(i) => {
            let v = values
                .get_mut(i)
                .ok_or_else(|| Error::InvalidFault(format!("index out of range in `{field}`")))?;
            *v = op.apply(*v);
        }
    }
    Ok(())
}

fn edit_cartpole(p: &mut CartPoleParams, field: &str, op: EditOp) -> Result<()> {
    let target = match field {
        "m_c" => &mut p.m_c,
        "m_p" => &mut p.m_p,
        "l" => &mut p.l,
        "F" | "force" => &mut p.force,
        _ => return Err(Error::InvalidFault(format!("unknown cart-pole field `{field}`"))),
    };
    *target = op.apply(*target);
    Ok(())
}

fn edit_fueltank(p: &mut FuelTankParams, field: &str, op: EditOp) -> Result<()> {
    let (name, index) = parse_field(field)?;
    let values: &mut [f64] = match name {
        "resistances" => &mut p.resistances,
        "pump_rates" | "pumps" => &mut p.pump_rates,
        "engine_rates" | "engines" => &mut p.engine_rates,
        "leak_rates" => &mut p.leak_rates,
        "tank_positions" => &mut p.tank_positions,
        _ => return Err(Error::InvalidFault(format!("unknown fuel-tank field `{field}`"))),
    };
    edit_slice(values, index, op, field)
}

/// Applies `fault` to a copy of `params` and validates the result.
pub fn inject_fault(params: &ProcessParams, fault: &FaultSpec) -> Result<ProcessParams> {
    let mut out = params.clone();
    for (field, &op) in &fault.edits {
        match &mut out {
            ProcessParams::CartPole(p) => edit_cartpole(p, field, op)?,
            ProcessParams::FuelTank(p) => edit_fueltank(p, field, op)?,
        }
    }
    out.validate().map_err(|e| {
        Error::InvalidFault(format!("fault `{}` produces invalid parameters: {e}", fault.label))
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn cartpole_heavier_longer_reversed_fault() {
        let nominal = ProcessParams::CartPole(CartPoleParams::default());
        let fault = FaultSpec::identity("p-prime")
            .with("m_c", EditOp::Scale(1.5))
            .with("m_p", EditOp::Scale(1.25))
            .with("l", EditOp::Scale(1.5))
            .with("F", EditOp::Scale(-1.2));
        let ProcessParams::CartPole(p) = inject_fault(&nominal, &fault).unwrap() else {
            unreachable!()
        };
        assert!(close(p.m_c, 1.5) && close(p.m_p, 0.125) && close(p.l, 0.75) && close(p.force, -12.0));
        // the original is untouched
        assert_eq!(nominal, ProcessParams::CartPole(CartPoleParams::default()));
    }

    #[test]
    fn identity_fault_is_a_no_op() {
        let nominal = ProcessParams::FuelTank(FuelTankParams::default());
        assert_eq!(inject_fault(&nominal, &FaultSpec::identity("none")).unwrap(), nominal);
    }

    #[test]
    fn fueltank_disabled_valve_fault() {
        let nominal = ProcessParams::FuelTank(FuelTankParams::default());
        let fault = FaultSpec::identity("row7")
            .with("resistances[1]", EditOp::Set(75.0))
            .with("resistances[4]", EditOp::Set(75.0))
            .with("pump_rates[1]", EditOp::Disable)
            .with("engine_rates[0]", EditOp::Set(0.05));
        let ProcessParams::FuelTank(p) = inject_fault(&nominal, &fault).unwrap() else {
            unreachable!()
        };
        assert_eq!(p.resistances, [100.0, 75.0, 100.0, 100.0, 75.0, 100.0]);
        assert_eq!(p.pump_rates, [0.1, 0.0, 0.1, 0.1, 0.1, 0.1]);
        assert_eq!(p.engine_rates, [0.05, 0.1]);
    }

    #[test]
    fn invalid_results_and_fields_are_rejected() {
        let nominal = ProcessParams::CartPole(CartPoleParams::default());
        let zero_mass = FaultSpec::identity("bad").with("m_c", EditOp::Disable);
        assert!(matches!(inject_fault(&nominal, &zero_mass), Err(Error::InvalidFault(_))));
        let unknown = FaultSpec::identity("bad").with("gravity", EditOp::Scale(2.0));
        assert!(inject_fault(&nominal, &unknown).is_err());
        let tanks = ProcessParams::FuelTank(FuelTankParams::default());
        let oob = FaultSpec::identity("bad").with("pump_rates[6]", EditOp::Disable);
        assert!(inject_fault(&tanks, &oob).is_err());
        let neg = FaultSpec::identity("bad").with("resistances", EditOp::Negate);
        assert!(inject_fault(&tanks, &neg).is_err());
    }

    #[test]
    fn fault_specs_parse_from_toml() {
        let text = r#"
            label = "reversed"
            edits = { F = "negate", m_c = { scale = 2.0 }, "pump_rates[2]" = "disable" }
        "#;
        let f: FaultSpec = toml::from_str(text).unwrap();
        assert_eq!(f.edits["F"], EditOp::Negate);
        assert_eq!(f.edits["m_c"], EditOp::Scale(2.0));
        assert_eq!(f.edits["pump_rates[2]"], EditOp::Disable);
    }
}
