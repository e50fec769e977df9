use std::fs;
use std::path::{Path, PathBuf};

use emaml_core::harness::*;
use emaml_core::*;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tiny(kind: EnvKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::default_for(kind);
    c.runs.nominal_steps = c.ppo.t_update * 2;
    c.runs.complement_steps = c.ppo.t_update;
    c.runs.adapt_steps = c.ppo.t_update * 2;
    c.runs.curation_buffer = 100;
    c.meta.memory_size = 200;
    c
}

#[test]
fn shipped_configs_are_the_defaults() {
    for (file, kind) in [("cartpole.toml", EnvKind::CartPole), ("fueltank.toml", EnvKind::FuelTank)] {
        let loaded = ExperimentConfig::load(&configs_dir().join(file)).unwrap();
        assert_eq!(loaded, ExperimentConfig::default_for(kind), "{file}");
    }
}

#[test]
fn partial_documents_fill_in_defaults() {
    let text = "[env]\nkind = \"cartpole\"\n\n[meta]\nrank = 4\n";
    let c = ExperimentConfig::from_toml_str(text, Path::new("partial.toml")).unwrap();
    let mut expected = ExperimentConfig::default_for(EnvKind::CartPole);
    expected.meta.rank = 4;
    assert_eq!(c, expected);
}

#[test]
fn every_unknown_key_is_reported() {
    let text = "[env]\nkind = \"cartpole\"\n[ppo]\nlearnig_rate = 0.1\n[runs]\nsteps = 3\n";
    let err = ExperimentConfig::from_toml_str(text, Path::new("typo.toml")).unwrap_err();
    let message = err.to_string();
    assert!(message.contains("learnig_rate") && message.contains("steps"), "{message}");
}

#[test]
fn every_invalid_value_is_reported() {
    let mut c = ExperimentConfig::default_for(EnvKind::FuelTank);
    c.ppo.gamma = 1.5;
    c.ppo.epochs = 0;
    c.meta.rank = 9;
    match c.validate() {
        Err(Error::InvalidConfig(problems)) => {
            assert!(problems.len() >= 3, "{problems:?}");
            assert!(problems.iter().any(|p| p.contains("gamma")));
            assert!(problems.iter().any(|p| p.contains("epochs")));
            assert!(problems.iter().any(|p| p.contains("rank")));
        }
        other => panic!("expected config problems, got {other:?}"),
    }
}

#[test]
fn commands_need_their_prerequisites() {
    let config = tiny(EnvKind::CartPole);
    let dir = tempfile::tempdir().unwrap();
    let mut store = PolicyStore::open(dir.path()).unwrap();
    let err = build_complement(&config, &mut store, 0, false).unwrap_err();
    assert!(matches!(err, Error::Missing(_)) && err.to_string().contains("train-nominal"), "{err}");

    train_nominal(&config, &mut store, 0, false).unwrap();
    assert!(matches!(train_nominal(&config, &mut store, 0, false), Err(Error::Duplicate(_))));
    let err = adapt(&config, &mut store, AdaptOptions::new(Method::Emaml, 0)).unwrap_err();
    assert!(err.to_string().contains("build-complement"), "{err}");
    // the baselines do not need a library
    adapt(&config, &mut store, AdaptOptions::new(Method::Ppo, 0)).unwrap();
    adapt(&config, &mut store, AdaptOptions::new(Method::Maml, 0)).unwrap();
}

#[test]
fn post_fault_buffer_is_shared_across_methods() {
    let config = tiny(EnvKind::CartPole);
    let dir = tempfile::tempdir().unwrap();
    let mut store = PolicyStore::open(dir.path()).unwrap();
    train_nominal(&config, &mut store, 5, false).unwrap();
    let nominal = store.load_policy(NOMINAL_ID).unwrap();
    let (ra, a) = post_fault_buffer(&config, &nominal, 300, 9).unwrap();
    let (rb, b) = post_fault_buffer(&config, &nominal, 300, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 300);
    // buffering steps are not part of the adaptation log
    assert!(ra.log().entries.is_empty() && rb.log().entries.is_empty());
    assert_eq!(ra.steps(), 0);
}

#[test]
fn adaptation_logs_cover_only_the_training_budget() {
    let config = tiny(EnvKind::CartPole);
    let dir = tempfile::tempdir().unwrap();
    let mut store = PolicyStore::open(dir.path()).unwrap();
    train_nominal(&config, &mut store, 2, false).unwrap();
    build_complement(&config, &mut store, 2, false).unwrap();
    for method in [Method::Emaml, Method::Maml, Method::Ppo] {
        let out = adapt(&config, &mut store, AdaptOptions::new(method, 2)).unwrap();
        assert!(out.log.entries.iter().all(|e| e.step <= config.runs.adapt_steps as u64), "{method}");
        assert_eq!(out.record.fault_label.as_deref(), Some("reversed-heavy-long"));
        assert!(store.contains_policy(&format!("final-{}", out.record.run_id)));
    }
    let ids: Vec<String> = store.run_ids().filter(|r| r.starts_with("adapt-")).map(String::from).collect();
    assert_eq!(ids.len(), 3);
    let csv = report_csv(&store, &ids).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("step,") && header.ends_with("mean,spread"), "{header}");
}

#[test]
fn report_names_missing_runs() {
    let dir = tempfile::tempdir().unwrap();
    let store = PolicyStore::open(dir.path()).unwrap();
    match report(&store, &["absent".into(), "also-absent".into()]) {
        Err(Error::Missing(m)) => assert_eq!(m.len(), 2),
        other => panic!("expected missing runs, got {other:?}"),
    }
}

#[test]
fn fuel_tank_protocol_runs_end_to_end() {
    let mut config = tiny(EnvKind::FuelTank);
    config.meta.k_in = 1;
    config.meta.k_out = 1;
    let dir = tempfile::tempdir().unwrap();
    let mut store = PolicyStore::open(dir.path()).unwrap();
    train_nominal(&config, &mut store, 1, false).unwrap();
    let built = build_complement(&config, &mut store, 1, false).unwrap();
    assert_eq!(built.labels.len(), 7);
    assert_eq!(built.curation.complement.len(), config.meta.complement_size);
    let out = adapt(&config, &mut store, AdaptOptions::new(Method::Emaml, 1)).unwrap();
    assert_eq!(out.status, Some(emaml_core::meta::MetaStatus::Updated));
    let divergence = fs::read_to_string(dir.path().join("runs/curation/divergence.csv")).unwrap();
    assert_eq!(divergence.lines().count(), 8);
    let removed = prune(&mut store).unwrap();
    assert_eq!(removed.len(), 7 - config.meta.complement_size);
}
