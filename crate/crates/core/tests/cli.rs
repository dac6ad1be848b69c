use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_expert-prior"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn help_on_every_subcommand() {
    for sub in ["gen-demos", "fit-prior", "run-bandit", "run-deepsea", "report"] {
        let out = bin().args([sub, "--help"]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{sub}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("Usage:") && text.contains("--config"), "{text}");
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = bin().arg("run-bandit").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn unknown_flag_and_bad_config_are_usage_errors() {
    let out = bin().args(["report", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "episodes = 1\nwhat = 2\n").unwrap();
    let out = bin().args(["run-bandit", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["run-bandit", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn report_without_a_run_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["report", "--config"])
        .arg(config("bandit-smoke.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn smoke_pipeline_writes_the_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = bin()
            .arg(sub)
            .arg("--config")
            .arg(config("bandit-smoke.toml"))
            .arg("--out")
            .arg(dir.path())
            .args(["--workers", "2", "--seed", "11"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    run("gen-demos");
    assert!(dir.path().join("demos/d0.jsonl").exists());
    assert!(dir.path().join("distributions.json").exists());
    run("fit-prior");
    assert!(dir.path().join("priors/d2.json").exists());
    assert!(dir.path().join("priors/d2_fit.csv").exists());
    let summary = run("run-bandit");
    assert!(summary.contains("experior-ts"));

    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    let mut lines = records.lines();
    assert_eq!(lines.next(), Some("algo,task_dist_id,task_id,seed,episode,reward,instant_regret"));
    assert_eq!(lines.count(), 6 * 3 * 4 * 50);
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("algo,group,episode,mean_cum_regret,stderr\n"));
    assert!(dir.path().join("report.json").exists());

    std::fs::remove_file(dir.path().join("aggregate.csv")).unwrap();
    run("report");
    assert_eq!(std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap(), agg);
}
