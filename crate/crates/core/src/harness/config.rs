//! Experiment configuration: one TOML document with sections `env`, `ppo`,
//! `meta`, `faults` and `runs`. Every key is optional; missing keys take the
//! defaults for the selected `env.kind`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{inject_fault, EditOp, EnvKind, FaultSpec, ProcessParams};
use crate::error::{Error, Result};
use crate::meta::MetaConfig;
use crate::ppo::PpoConfig;
use crate::store::validate_id;

/// Fault used for adaptation and faults used to populate the library.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultsConfig {
    pub adapt: FaultSpec,
    pub complement: Vec<FaultSpec>,
}

/// Step budgets of the protocol stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunsConfig {
    pub nominal_steps: usize,
    pub complement_steps: usize,
    /// PPO steps after the meta-update.
    pub adapt_steps: usize,
    /// Nominal-process steps on which library divergences are measured.
    pub curation_buffer: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: ProcessParams,
    pub ppo: PpoConfig,
    pub meta: MetaConfig,
    pub faults: FaultsConfig,
    pub runs: RunsConfig,
}

fn cartpole_fault(label: &str, m_c: f64, m_p: f64, l: f64, force: f64) -> FaultSpec {
    FaultSpec::identity(label)
        .with("m_c", EditOp::Set(m_c))
        .with("m_p", EditOp::Set(m_p))
        .with("l", EditOp::Set(l))
        .with("F", EditOp::Set(force))
}

fn fueltank_fault(label: &str, resistances: [f64; 6], pumps: [f64; 6], engines: [f64; 2]) -> FaultSpec {
    let mut f = FaultSpec::identity(label);
    for (i, r) in resistances.into_iter().enumerate() {
        if r != 100.0 {
            f = f.with(&format!("resistances[{i}]"), EditOp::Set(r));
        }
    }
    for (i, p) in pumps.into_iter().enumerate() {
        if p == 0.0 {
            f = f.with(&format!("pump_rates[{i}]"), EditOp::Disable);
        }
    }
    for (i, e) in engines.into_iter().enumerate() {
        if e != 0.1 {
            f = f.with(&format!("engine_rates[{i}]"), EditOp::Set(e));
        }
    }
    f
}

impl ExperimentConfig {
    /// The zero-edit configuration for `kind`.
    pub fn default_for(kind: EnvKind) -> Self {
        let faults = match kind {
            EnvKind::CartPole => FaultsConfig {
                adapt: cartpole_fault("reversed-heavy-long", 1.5, 0.125, 0.75, -12.0),
                complement: vec![
                    cartpole_fault("retrained-nominal", 1.0, 0.1, 0.5, 10.0),
                    cartpole_fault("heavy-cart", 1.5, 0.1, 0.5, 10.0),
                    cartpole_fault("heavy-strong", 2.0, 0.2, 0.5, 15.0),
                    cartpole_fault("heavy-strong-light-pole", 2.0, 0.15, 0.5, 15.0),
                    cartpole_fault("reversed", 1.0, 0.1, 0.5, -10.0),
                    cartpole_fault("reversed-strong", 1.0, 0.1, 0.5, -12.0),
                    cartpole_fault("reversed-heavy-strong", 2.0, 0.2, 0.5, -15.0),
                ],
            },
            EnvKind::FuelTank => {
                let a = [100.0, 100.0, 100.0, 70.0, 80.0, 90.0];
                let b = [100.0, 100.0, 100.0, 150.0, 200.0, 100.0];
                let c = [90.0, 100.0, 100.0, 70.0, 80.0, 90.0];
                let d = [100.0, 75.0, 100.0, 100.0, 75.0, 100.0];
                let on = 0.1;
                FaultsConfig {
                    adapt: FaultSpec::identity("left-engine-surge-dead-pump")
                        .with("engine_rates[0]", EditOp::Scale(2.0))
                        .with("pump_rates[5]", EditOp::Disable),
                    complement: vec![
                        fueltank_fault("inner-right-valves", a, [on, on, on, 0.0, on, on], [0.05, 0.1]),
                        fueltank_fault("inner-right-valves-dead-pumps", a, [0.0, on, on, 0.0, on, on], [0.05, 0.1]),
                        fueltank_fault("stiff-right-valves", b, [on; 6], [0.1, 0.05]),
                        fueltank_fault("stiff-right-valves-dead-pumps", b, [on, on, on, on, 0.0, 0.0], [0.1, 0.05]),
                        fueltank_fault("loose-valves", c, [on, on, 0.0, on, on, on], [0.05, 0.1]),
                        fueltank_fault("loose-valves-dead-pumps", c, [0.0, on, 0.0, on, on, 0.0], [0.05, 0.1]),
                        fueltank_fault("paired-loose-valves", d, [on, 0.0, on, on, on, on], [0.05, 0.1]),
                    ],
                }
            }
        };
        let curation_buffer = match kind {
            EnvKind::CartPole => 500,
            EnvKind::FuelTank => 1000,
        };
        Self {
            env: ProcessParams::nominal(kind),
            ppo: PpoConfig::for_kind(kind),
            meta: MetaConfig::for_kind(kind),
            faults,
            runs: RunsConfig {
                nominal_steps: 30_000,
                complement_steps: 100_000,
                adapt_steps: 30_000,
                curation_buffer,
            },
        }
    }

    pub fn kind(&self) -> EnvKind {
        self.env.kind()
    }

    /// Parses a configuration document. Keys absent from the defaults are
    /// all reported together.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            field: "document".into(),
            message: e.to_string(),
        })?;
        let kind = match user.get("env").and_then(|e| e.get("kind")) {
            None => EnvKind::CartPole,
            Some(toml::Value::String(s)) => match s.as_str() {
                "cartpole" => EnvKind::CartPole,
                "fueltank" => EnvKind::FuelTank,
                other => {
                    return Err(Error::InvalidConfig(vec![format!(
                        "env.kind must be \"cartpole\" or \"fueltank\", got \"{other}\""
                    )]))
                }
            },
            Some(other) => return Err(Error::InvalidConfig(vec![format!("env.kind must be a string, got {other}")])),
        };
        let mut merged = toml::Table::try_from(Self::default_for(kind)).map_err(|e| Error::Store(e.to_string()))?;
        let mut unknown = Vec::new();
        merge(&mut merged, user, "", &mut unknown);
        if !unknown.is_empty() {
            return Err(Error::InvalidConfig(
                unknown.into_iter().map(|k| format!("unknown key `{k}`")).collect(),
            ));
        }
        let config: Self = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Parse {
            path: origin.to_path_buf(),
            field: "document".into(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Store(format!("serialising configuration: {e}")))
    }

    /// Every violated constraint across all sections.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.env.validate() {
            out.push(format!("env: {e}"));
        }
        out.extend(self.ppo.problems());
        out.extend(self.meta.problems());
        if self.ppo.gamma != self.meta.gamma {
            out.push(format!(
                "meta.gamma {} differs from ppo.gamma {}",
                self.meta.gamma, self.ppo.gamma
            ));
        }
        let mut labels = Vec::new();
        for (i, f) in std::iter::once(&self.faults.adapt).chain(&self.faults.complement).enumerate() {
            let name = if i == 0 {
                "faults.adapt".to_string()
            } else {
                format!("faults.complement[{}]", i - 1)
            };
            if let Err(e) = validate_id(&f.label) {
                out.push(format!("{name}.label: {e}"));
            }
            if i > 0 && matches!(f.label.as_str(), "nominal" | "nominal.value") {
                out.push(format!("{name}.label `{}` is reserved", f.label));
            }
            if i > 0 && labels.contains(&&f.label) {
                out.push(format!("{name}.label `{}` is used twice", f.label));
            }
            labels.push(&f.label);
            if let Err(e) = inject_fault(&self.env, f) {
                out.push(format!("{name}: {e}"));
            }
        }
        if self.faults.complement.len() < self.meta.complement_size {
            out.push(format!(
                "faults.complement lists {} faults, fewer than meta.complement_size {}",
                self.faults.complement.len(),
                self.meta.complement_size
            ));
        }
        for (name, steps) in [
            ("runs.nominal_steps", self.runs.nominal_steps),
            ("runs.complement_steps", self.runs.complement_steps),
            ("runs.adapt_steps", self.runs.adapt_steps),
        ] {
            if steps < self.ppo.t_update {
                out.push(format!("{name} ({steps}) must be at least ppo.t_update ({})", self.ppo.t_update));
            }
        }
        if self.runs.curation_buffer < 1 {
            out.push("runs.curation_buffer must be >= 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Overlays `user` onto `base`. Tables merge key by key; any other value
/// replaces the default. Fault edit tables and `faults` lists are free-form.
fn merge(base: &mut toml::Table, user: toml::Table, prefix: &str, unknown: &mut Vec<String>) {
    for (key, value) in user {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if !path.ends_with("edits") && path != "faults.adapt" => {
                merge(b, u, &path, unknown)
            }
            (Some(slot), value) => *slot = value,
            (None, value) if path.ends_with("edits") || path == "faults.adapt" => {
                base.insert(key, value);
            }
            (None, _) => unknown.push(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn empty_document_is_cartpole_defaults() {
        assert_eq!(parse("").unwrap(), ExperimentConfig::default_for(EnvKind::CartPole));
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        for kind in [EnvKind::CartPole, EnvKind::FuelTank] {
            let c = ExperimentConfig::default_for(kind);
            c.validate().unwrap();
            assert_eq!(parse(&c.to_toml_string().unwrap()).unwrap(), c);
        }
    }

    #[test]
    fn overrides_merge_into_defaults() {
        let c = parse(
            "[env]\nkind = \"fueltank\"\n[ppo]\nepochs = 4\n[faults.adapt]\nlabel = \"x\"\nedits = { \"pump_rates[1]\" = \"disable\" }\n",
        )
        .unwrap();
        assert_eq!(c.kind(), EnvKind::FuelTank);
        assert_eq!(c.ppo.epochs, 4);
        assert_eq!(c.ppo.t_update, 1000);
        assert_eq!(c.faults.adapt.edits.len(), 1);
    }

    #[test]
    fn all_problems_are_listed() {
        let err = parse("[ppo]\ngamma = 1.5\nclip = 0.0\nbogus = 1\n[meta]\nrank = 9\n").unwrap_err();
        match err {
            Error::InvalidConfig(p) => assert_eq!(p, vec!["unknown key `ppo.bogus`".to_string()]),
            other => panic!("{other:?}"),
        }
        let err = parse("[ppo]\ngamma = 1.5\nclip = 0.0\n[meta]\nrank = 9\n").unwrap_err();
        match err {
            Error::InvalidConfig(p) => {
                assert!(p.iter().any(|m| m.contains("ppo.gamma")));
                assert!(p.iter().any(|m| m.contains("ppo.clip")));
                assert!(p.iter().any(|m| m.contains("meta.rank")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_fault_field_is_reported() {
        let err = parse("[faults.adapt]\nlabel = \"x\"\nedits = { mass = { scale = 2.0 } }\n").unwrap_err();
        assert!(err.to_string().contains("mass"), "{err}");
    }
}
