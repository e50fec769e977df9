use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emaml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emaml"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn print_config_matches_the_shipped_file() {
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fueltank.toml");
    let printed = emaml(&["print-config", "--env", "fueltank"]);
    assert_eq!(code(&printed), 0);
    let reprinted = emaml(&["print-config", "--config", shipped.to_str().unwrap()]);
    assert_eq!(code(&reprinted), 0);
    assert_eq!(stdout(&printed), stdout(&reprinted));
    assert!(stdout(&printed).contains("kind = \"fueltank\""));
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[env]\nkind = \"cartpole\"\n[ppo]\ngamma = 1.5\n").unwrap();
    let store = dir.path().join("store");
    let out = emaml(&[
        "train-nominal",
        "--config",
        config.to_str().unwrap(),
        "--store",
        store.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    // unknown flag values are rejected by the parser with the same code
    assert_eq!(code(&emaml(&["adapt", "--method", "sgd"])), 2);
    // missing prerequisite
    let out = emaml(&["build-complement", "--store", store.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("train-nominal"));
}

#[test]
fn runtime_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("not-a-dir");
    fs::write(&blocker, "").unwrap();
    let out = emaml(&["train-nominal", "--store", blocker.to_str().unwrap(), "--steps", "500"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn short_protocol_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let s = store.to_str().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, "[env]\nkind = \"cartpole\"\n[meta]\nmemory_size = 200\n[runs]\ncuration_buffer = 100\n").unwrap();
    let c = config.to_str().unwrap();

    assert_eq!(code(&emaml(&["train-nominal", "--config", c, "--store", s, "--steps", "1000"])), 0);
    let built = emaml(&["build-complement", "--config", c, "--store", s, "--steps", "500"]);
    assert_eq!(code(&built), 0);
    assert!(stdout(&built).starts_with("label,total_divergence,kept"));

    let adapted = emaml(&[
        "adapt", "--config", c, "--store", s, "--steps", "1000", "--method", "emaml", "--rank", "2", "--variant", "reptile",
    ]);
    assert_eq!(code(&adapted), 0, "{}", String::from_utf8_lossy(&adapted.stderr));
    assert!(stdout(&adapted).contains("adapt-emaml-r2-reptile-s0"));
    assert_eq!(code(&emaml(&["adapt", "--config", c, "--store", s, "--steps", "1000", "--method", "ppo"])), 0);
    assert_eq!(
        code(&emaml(&["adapt", "--config", c, "--store", s, "--method", "emaml", "--rank", "9"])),
        2
    );

    let csv = dir.path().join("report.csv");
    let report = emaml(&[
        "report",
        "--store",
        s,
        "--output",
        csv.to_str().unwrap(),
        "adapt-emaml-r2-reptile-s0",
        "adapt-ppo-s0",
    ]);
    assert_eq!(code(&report), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.lines().next().unwrap().ends_with("mean,spread"));
    assert_eq!(code(&emaml(&["report", "--store", s, "no-such-run"])), 2);

    let pruned = emaml(&["prune", "--store", s]);
    assert_eq!(code(&pruned), 0);
    assert_eq!(stdout(&pruned).lines().count(), 3);
}
