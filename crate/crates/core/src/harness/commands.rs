use std::fmt;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::env::{inject_fault, ProcessFamily};
use crate::error::{Error, Result};
use crate::meta::{curate_complement, emaml_meta_update, maml_train, Curation, MetaStatus, MetaVariant, Ranking};
use crate::nn::ParameterVector;
use crate::ppo::{ppo_train, train_from, Memory, RewardLog, Rollout};
use crate::seed;
use crate::store::{PolicyMeta, PolicyRole, PolicyStore, RunRecord};

pub const NOMINAL_ID: &str = "nominal";
pub const NOMINAL_VALUE_ID: &str = "nominal.value";
pub const CURATION_RUN: &str = "curation";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Emaml,
    Maml,
    Ppo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Emaml => "emaml",
            Method::Maml => "maml",
            Method::Ppo => "ppo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Method::Emaml, Method::Maml, Method::Ppo].into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn snapshot(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).unwrap_or(serde_json::Value::Null)
}

fn put_policy(store: &mut PolicyStore, id: &str, params: &ParameterVector, meta: PolicyMeta, overwrite: bool) -> Result<()> {
    if overwrite {
        store.replace_policy(id, params, meta)?;
    } else {
        store.save_policy(id, params, meta)?;
    }
    Ok(())
}

/// Trains the controller on the nominal process from a fresh initialization.
pub fn train_nominal(
    config: &ExperimentConfig,
    store: &mut PolicyStore,
    master_seed: u64,
    overwrite: bool,
) -> Result<RunRecord> {
    config.validate()?;
    let kind = config.kind();
    let run_id = "train-nominal";
    if !overwrite && (store.contains_policy(NOMINAL_ID) || store.contains_run(run_id)) {
        return Err(Error::Duplicate(format!("{NOMINAL_ID} (pass overwrite to retrain)")));
    }
    let mut init = seed::derived_rng(master_seed, "nominal/init");
    let policy = ParameterVector::init(config.ppo.action_spec(kind)?, &mut init);
    let value = ParameterVector::init(config.ppo.value_spec(kind)?, &mut init);
    info!("training nominal {kind} controller for {} steps", config.runs.nominal_steps);
    let out = ppo_train(
        &config.env,
        &policy,
        &value,
        &config.ppo,
        config.runs.nominal_steps,
        seed::derive(master_seed, "nominal/rollout"),
    )?;
    let meta = |role| PolicyMeta {
        role,
        env: kind,
        provenance: None,
        trained_steps: config.runs.nominal_steps as u64,
        seed: master_seed,
    };
    put_policy(store, NOMINAL_ID, &out.policy, meta(PolicyRole::Nominal), overwrite)?;
    put_policy(store, NOMINAL_VALUE_ID, &out.value, meta(PolicyRole::Value), overwrite)?;
    let record = RunRecord {
        run_id: run_id.into(),
        env: kind,
        process: config.env.clone(),
        fault_label: None,
        seed: master_seed,
        config: snapshot(config),
        rewards: Default::default(),
        final_policy: Some(NOMINAL_ID.into()),
        total_reward: out.log.total_reward(),
    };
    store.save_run(record.clone(), &out.log, overwrite)?;
    Ok(store.run(run_id).cloned().unwrap_or(record))
}

fn load_nominal(store: &PolicyStore) -> Result<(ParameterVector, ParameterVector)> {
    if !store.contains_policy(NOMINAL_ID) || !store.contains_policy(NOMINAL_VALUE_ID) {
        return Err(Error::Missing(vec![format!(
            "{NOMINAL_ID} policy (run train-nominal first)"
        )]));
    }
    Ok((store.load_policy(NOMINAL_ID)?, store.load_policy(NOMINAL_VALUE_ID)?))
}

#[derive(Clone, Debug)]
pub struct ComplementOutcome {
    pub curation: Curation,
    /// Labels in input order with their total divergence.
    pub labels: Vec<String>,
}

impl ComplementOutcome {
    pub fn divergence_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let kept = self.curation.complement.labels();
        let _ = w.write_record(["label", "total_divergence", "kept"]);
        for (label, total) in self.labels.iter().zip(&self.curation.all_totals) {
            let _ = w.write_record([label.clone(), total.to_string(), kept.contains(&label.as_str()).to_string()]);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// Trains one policy per configured fault on top of the nominal controller,
/// then keeps the `meta.complement_size` most mutually divergent ones.
pub fn build_complement(
    config: &ExperimentConfig,
    store: &mut PolicyStore,
    master_seed: u64,
    overwrite: bool,
) -> Result<ComplementOutcome> {
    config.validate()?;
    let (nominal, nominal_value) = load_nominal(store)?;
    let kind = config.kind();
    if !overwrite {
        let taken: Vec<String> = config
            .faults
            .complement
            .iter()
            .filter(|f| store.contains_policy(&f.label))
            .map(|f| f.label.clone())
            .collect();
        if !taken.is_empty() {
            return Err(Error::Duplicate(taken.join(", ")));
        }
    }
    let mut trained = Vec::new();
    for fault in &config.faults.complement {
        let env = inject_fault(&config.env, fault)?;
        info!("training library policy `{}` for {} steps", fault.label, config.runs.complement_steps);
        let out = ppo_train(
            &env,
            &nominal,
            &nominal_value,
            &config.ppo,
            config.runs.complement_steps,
            seed::derive(master_seed, &format!("complement/{}", fault.label)),
        )?;
        let meta = PolicyMeta {
            role: PolicyRole::Fault,
            env: kind,
            provenance: Some(fault.label.clone()),
            trained_steps: config.runs.complement_steps as u64,
            seed: master_seed,
        };
        put_policy(store, &fault.label, &out.policy, meta, overwrite)?;
        let record = RunRecord {
            run_id: format!("complement-{}", fault.label),
            env: kind,
            process: env,
            fault_label: Some(fault.label.clone()),
            seed: master_seed,
            config: snapshot(config),
            rewards: Default::default(),
            final_policy: Some(fault.label.clone()),
            total_reward: out.log.total_reward(),
        };
        store.save_run(record, &out.log, overwrite)?;
        trained.push(fault.label.clone());
    }
    let complement = store.load_complement(&trained)?;
    let mut buffer = Memory::new(kind.observation_len());
    Rollout::new(config.env.clone(), seed::derive(master_seed, "complement/curation-buffer")).collect(
        &nominal,
        config.runs.curation_buffer,
        &mut buffer,
    )?;
    let curation = curate_complement(&complement, config.meta.complement_size, &buffer)?;
    let kept: Vec<String> = curation.complement.labels().iter().map(|s| s.to_string()).collect();
    store.set_complement(kept, curation.totals.clone())?;
    let outcome = ComplementOutcome {
        curation,
        labels: trained,
    };
    store.write_run_file(CURATION_RUN, "divergence.csv", outcome.divergence_csv().as_bytes())?;
    Ok(outcome)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptOptions {
    pub method: Method,
    /// Overrides `meta.rank`.
    pub rank: Option<usize>,
    /// Overrides `meta.variant`.
    pub variant: Option<MetaVariant>,
    pub seed: u64,
    pub overwrite: bool,
}

impl AdaptOptions {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            rank: None,
            variant: None,
            seed,
            overwrite: false,
        }
    }

    pub fn run_id(&self, config: &ExperimentConfig) -> String {
        let rank = self.rank.unwrap_or(config.meta.rank);
        let variant = self.variant.unwrap_or(config.meta.variant);
        match self.method {
            Method::Emaml => format!("adapt-emaml-r{rank}-{variant}-s{}", self.seed),
            Method::Maml => format!("adapt-maml-{variant}-s{}", self.seed),
            Method::Ppo => format!("adapt-ppo-s{}", self.seed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdaptOutcome {
    pub record: RunRecord,
    pub log: RewardLog,
    /// Initialization handed to PPO after the meta-update.
    pub initial: ParameterVector,
    pub ranking: Option<Ranking>,
    pub status: Option<MetaStatus>,
}

/// Runs `policy` on the adaptation fault for `steps` steps. The returned
/// rollout continues where the buffer ended, with a fresh reward log, so
/// every method sees the same post-fault experience for a given seed.
pub fn post_fault_buffer(
    config: &ExperimentConfig,
    policy: &ParameterVector,
    steps: usize,
    seed: u64,
) -> Result<(Rollout, Memory)> {
    let faulty = inject_fault(&config.env, &config.faults.adapt)?;
    let mut rollout = Rollout::new(faulty, seed::derive(seed, "adapt/rollout"));
    let mut memory = Memory::new(config.kind().observation_len());
    rollout.collect(policy, steps, &mut memory)?;
    rollout.restart_log();
    Ok((rollout, memory))
}

/// Injects the adaptation fault, buffers `meta.memory_size` steps with the
/// nominal controller, derives an initialization with `method` and trains it
/// with PPO for `runs.adapt_steps` steps. The reward log covers only the
/// steps after the buffer.
pub fn adapt(config: &ExperimentConfig, store: &mut PolicyStore, options: AdaptOptions) -> Result<AdaptOutcome> {
    config.validate()?;
    let mut meta = config.meta.clone();
    if let Some(rank) = options.rank {
        meta.rank = rank;
    }
    if let Some(variant) = options.variant {
        meta.variant = variant;
    }
    if meta.rank > meta.complement_size {
        return Err(Error::InvalidArgument(format!(
            "rank {} exceeds complement size {}",
            meta.rank, meta.complement_size
        )));
    }
    let run_id = options.run_id(config);
    if !options.overwrite && store.contains_run(&run_id) {
        return Err(Error::Duplicate(run_id));
    }
    let complement = match options.method {
        Method::Emaml => {
            if store.complement_record().is_none() {
                return Err(Error::Missing(vec!["curated complement (run build-complement first)".into()]));
            }
            Some(store.curated_complement()?)
        }
        _ => None,
    };
    let (nominal, nominal_value) = load_nominal(store)?;
    let kind = config.kind();
    let (rollout, memory) = post_fault_buffer(config, &nominal, meta.memory_size, options.seed)?;
    let faulty = rollout.env().clone();

    let (initial, ranking, status) = match options.method {
        Method::Emaml => {
            let out = emaml_meta_update(&nominal, &memory, complement.as_ref().expect("loaded above"), &meta)?;
            (out.params, out.ranking, Some(out.status))
        }
        Method::Maml => {
            let family = ProcessFamily::new(config.env.clone(), meta.family_spread)?;
            let theta = maml_train(&nominal, &family, &meta, seed::derive(options.seed, "adapt/maml"))?;
            (theta, None, None)
        }
        Method::Ppo => (nominal.clone(), None, None),
    };
    info!("{run_id}: training for {} steps after the fault", config.runs.adapt_steps);
    let out = train_from(rollout, &initial, &nominal_value, &config.ppo, config.runs.adapt_steps)?;

    let policy_id = format!("final-{run_id}");
    put_policy(
        store,
        &policy_id,
        &out.policy,
        PolicyMeta {
            role: PolicyRole::Adapted,
            env: kind,
            provenance: Some(config.faults.adapt.label.clone()),
            trained_steps: config.runs.adapt_steps as u64,
            seed: options.seed,
        },
        true,
    )?;
    let mut snap = config.clone();
    snap.meta = meta;
    let record = RunRecord {
        run_id: run_id.clone(),
        env: kind,
        process: faulty,
        fault_label: Some(config.faults.adapt.label.clone()),
        seed: options.seed,
        config: snapshot(&snap),
        rewards: Default::default(),
        final_policy: Some(policy_id),
        total_reward: out.log.total_reward(),
    };
    store.save_run(record, &out.log, options.overwrite)?;
    if let (Some(r), Some(c)) = (&ranking, &complement) {
        store.write_run_file(&run_id, "scores.csv", scores_csv(r, &c.labels()).as_bytes())?;
    }
    Ok(AdaptOutcome {
        record: store.run(&run_id).cloned().expect("saved above"),
        log: out.log,
        initial,
        ranking,
        status,
    })
}

/// `label,score,rank,selected` rows in library order.
pub fn scores_csv(ranking: &Ranking, labels: &[&str]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ranks = ranking.ranks();
    let selected = ranking.selected.len();
    let _ = w.write_record(["label", "score", "rank", "selected"]);
    for (i, label) in labels.iter().enumerate() {
        let _ = w.write_record([
            label.to_string(),
            ranking.scores[i].to_string(),
            ranks[i].to_string(),
            (ranks[i] <= selected).to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Removes stored fault policies outside the curated library.
pub fn prune(store: &mut PolicyStore) -> Result<Vec<String>> {
    if store.complement_record().is_none() {
        return Err(Error::Missing(vec!["curated complement (run build-complement first)".into()]));
    }
    store.prune()
}
