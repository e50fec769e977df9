use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{NetworkSpec, ParameterVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementEntry {
    pub params: ParameterVector,
    /// Label of the fault the policy was trained on.
    pub provenance: String,
    pub trained_steps: u64,
}

impl ComplementEntry {
    pub fn new(params: ParameterVector, provenance: impl Into<String>, trained_steps: u64) -> Self {
        Self {
            params,
            provenance: provenance.into(),
            trained_steps,
        }
    }
}

/// Ordered library of stored policies sharing one network spec.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyComplement {
    entries: Vec<ComplementEntry>,
}

impl PolicyComplement {
    pub fn new(entries: Vec<ComplementEntry>) -> Result<Self> {
        if let Some(first) = entries.first() {
            let spec = first.params.spec();
            if let Some(bad) = entries.iter().find(|e| e.params.spec() != spec) {
                return Err(Error::InvalidSpec(format!(
                    "complement mixes network specs: {} ({}) vs {} ({})",
                    first.provenance,
                    spec,
                    bad.provenance,
                    bad.params.spec()
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ComplementEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<ComplementEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn spec(&self) -> Option<&NetworkSpec> {
        self.entries.first().map(|e| e.params.spec())
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.provenance.as_str()).collect()
    }

    pub fn push(&mut self, entry: ComplementEntry) -> Result<()> {
        if let Some(spec) = self.spec() {
            if entry.params.spec() != spec {
                return Err(Error::InvalidSpec(format!(
                    "policy {} has spec {}, complement uses {}",
                    entry.provenance,
                    entry.params.spec(),
                    spec
                )));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Entries at `indices`, in that order.
    pub fn pick(&self, indices: &[usize]) -> Self {
        Self {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }
}
