//! Directory-backed store of policies, curated libraries and run outputs.
//!
//! ```text
//! <root>/manifest                  JSON index of everything below
//! <root>/policies/<id>.params      parameter vectors
//! <root>/runs/<run_id>/rewards.csv per-episode reward log
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::env::{EnvKind, ProcessParams};
use crate::error::{Error, Result};
use crate::meta::{ComplementEntry, PolicyComplement};
use crate::nn::{write_atomic, ParameterVector};
use crate::ppo::RewardLog;

pub const MANIFEST_FILE: &str = "manifest";
pub const REWARDS_FILE: &str = "rewards.csv";
const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyRole {
    Nominal,
    Value,
    Fault,
    Adapted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyMeta {
    pub role: PolicyRole,
    pub env: EnvKind,
    /// Fault label the policy was trained under; `None` for the nominal process.
    pub provenance: Option<String>,
    pub trained_steps: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementRecord {
    pub labels: Vec<String>,
    /// Total divergence of each retained policy, aligned with `labels`.
    pub total_divergence: Vec<f64>,
    pub curated_at_unix: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub env: EnvKind,
    pub process: ProcessParams,
    pub fault_label: Option<String>,
    pub seed: u64,
    /// Snapshot of the resolved configuration the run used.
    pub config: serde_json::Value,
    /// Reward log path relative to the store root.
    pub rewards: PathBuf,
    /// Policy id of the final parameters, if they were kept.
    pub final_policy: Option<String>,
    pub total_reward: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    policies: BTreeMap<String, PolicyMeta>,
    complement: Option<ComplementRecord>,
    runs: BTreeMap<String, RunRecord>,
}

/// Single-writer handle on a store directory.
#[derive(Debug)]
pub struct PolicyStore {
    root: PathBuf,
    manifest: Manifest,
}

/// Ids become file names, so they are restricted to a portable alphabet.
pub fn validate_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "`{id}` is not a valid id: use letters, digits, '-', '_' or '.', not starting with '.'"
        )))
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl PolicyStore {
    /// Opens the store at `root`, creating the directory layout if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for dir in [root.clone(), root.join("policies"), root.join("runs")] {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let path = root.join(MANIFEST_FILE);
        let manifest = if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                field: "manifest".into(),
                message: e.to_string(),
            })?;
            if m.version != MANIFEST_VERSION {
                return Err(Error::Parse {
                    path,
                    field: "version".into(),
                    message: format!("unsupported manifest version {}", m.version),
                });
            }
            m
        } else {
            Manifest {
                version: MANIFEST_VERSION,
                ..Manifest::default()
            }
        };
        Ok(Self { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn flush(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Store(e.to_string()))?;
        write_atomic(&self.root.join(MANIFEST_FILE), text.as_bytes())
    }

    pub fn policy_path(&self, id: &str) -> PathBuf {
        self.root.join("policies").join(format!("{id}.params"))
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    pub fn contains_policy(&self, id: &str) -> bool {
        self.manifest.policies.contains_key(id)
    }

    pub fn policy_meta(&self, id: &str) -> Option<&PolicyMeta> {
        self.manifest.policies.get(id)
    }

    /// Policy ids with their metadata, sorted by id.
    pub fn policies(&self) -> impl Iterator<Item = (&str, &PolicyMeta)> {
        self.manifest.policies.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Persists `params` under a new `id`.
    pub fn save_policy(&mut self, id: &str, params: &ParameterVector, meta: PolicyMeta) -> Result<String> {
        validate_id(id)?;
        if self.contains_policy(id) {
            return Err(Error::Duplicate(id.to_string()));
        }
        self.write_policy(id, params, meta)
    }

    /// Like [`save_policy`](Self::save_policy) but replaces an existing record.
    pub fn replace_policy(&mut self, id: &str, params: &ParameterVector, meta: PolicyMeta) -> Result<String> {
        validate_id(id)?;
        self.write_policy(id, params, meta)
    }

    fn write_policy(&mut self, id: &str, params: &ParameterVector, meta: PolicyMeta) -> Result<String> {
        params.save(&self.policy_path(id))?;
        self.manifest.policies.insert(id.to_string(), meta);
        self.flush()?;
        Ok(id.to_string())
    }

    pub fn load_policy(&self, id: &str) -> Result<ParameterVector> {
        if !self.contains_policy(id) {
            return Err(Error::Missing(vec![id.to_string()]));
        }
        ParameterVector::load(&self.policy_path(id))
    }

    /// Policies stored under `labels`, in that order.
    pub fn load_complement(&self, labels: &[String]) -> Result<PolicyComplement> {
        let missing: Vec<String> = labels.iter().filter(|l| !self.contains_policy(l)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::Missing(missing));
        }
        let entries = labels
            .iter()
            .map(|label| {
                let meta = &self.manifest.policies[label];
                Ok(ComplementEntry::new(
                    self.load_policy(label)?,
                    meta.provenance.clone().unwrap_or_else(|| label.clone()),
                    meta.trained_steps,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        PolicyComplement::new(entries)
    }

    /// Records which stored policies form the curated library.
    pub fn set_complement(&mut self, labels: Vec<String>, total_divergence: Vec<f64>) -> Result<()> {
        if labels.len() != total_divergence.len() {
            return Err(Error::DimensionMismatch {
                context: "complement divergences",
                expected: labels.len(),
                actual: total_divergence.len(),
            });
        }
        let missing: Vec<String> = labels.iter().filter(|l| !self.contains_policy(l)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::Missing(missing));
        }
        self.manifest.complement = Some(ComplementRecord {
            labels,
            total_divergence,
            curated_at_unix: unix_now(),
        });
        self.flush()
    }

    pub fn complement_record(&self) -> Option<&ComplementRecord> {
        self.manifest.complement.as_ref()
    }

    /// The curated library recorded by [`set_complement`](Self::set_complement).
    pub fn curated_complement(&self) -> Result<PolicyComplement> {
        let record = self
            .complement_record()
            .ok_or_else(|| Error::Missing(vec!["curated complement".into()]))?;
        self.load_complement(&record.labels)
    }

    /// Deletes fault policies that are not part of the curated library.
    /// Returns the removed ids.
    pub fn prune(&mut self) -> Result<Vec<String>> {
        let keep: Vec<String> = self.complement_record().map(|c| c.labels.clone()).unwrap_or_default();
        let doomed: Vec<String> = self
            .manifest
            .policies
            .iter()
            .filter(|(id, m)| m.role == PolicyRole::Fault && !keep.contains(id))
            .map(|(id, _)| id.clone())
            .collect();
        for id in &doomed {
            self.manifest.policies.remove(id);
        }
        self.flush()?;
        for id in &doomed {
            let path = self.policy_path(id);
            if path.exists() {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(doomed)
    }

    pub fn contains_run(&self, run_id: &str) -> bool {
        self.manifest.runs.contains_key(run_id)
    }

    pub fn run(&self, run_id: &str) -> Option<&RunRecord> {
        self.manifest.runs.get(run_id)
    }

    pub fn run_ids(&self) -> impl Iterator<Item = &str> {
        self.manifest.runs.keys().map(String::as_str)
    }

    /// Writes the reward log and registers the run. `record.rewards` is
    /// filled in by the store.
    pub fn save_run(&mut self, mut record: RunRecord, log: &RewardLog, overwrite: bool) -> Result<()> {
        validate_id(&record.run_id)?;
        if !overwrite && self.contains_run(&record.run_id) {
            return Err(Error::Duplicate(record.run_id));
        }
        let dir = self.run_dir(&record.run_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_atomic(&dir.join(REWARDS_FILE), log.to_csv_string().as_bytes())?;
        record.rewards = Path::new("runs").join(&record.run_id).join(REWARDS_FILE);
        self.manifest.runs.insert(record.run_id.clone(), record);
        self.flush()
    }

    /// Writes an auxiliary file into a run directory.
    pub fn write_run_file(&self, run_id: &str, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        validate_id(run_id)?;
        let dir = self.run_dir(run_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        Ok(path)
    }

    pub fn load_run_log(&self, run_id: &str) -> Result<RewardLog> {
        let record = self.run(run_id).ok_or_else(|| Error::Missing(vec![format!("run {run_id}")]))?;
        RewardLog::read_csv(&self.root.join(&record.rewards))
    }
}
