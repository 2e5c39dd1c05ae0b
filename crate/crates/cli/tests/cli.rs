use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seeds = [1, 2]
test_steps = 4
augment_k = 2

[scenario]
ticks_per_agent_step = 20

[collection]
n_samples = 12

[offline]
batches = 12

[online]
steps = 6

[energy]
refresh_period = 3
refresh_batches = 5
pretrain_batches = 10
"#;

fn samro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_samro"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn setup(dir: &Path) -> (String, String) {
    let cfg = dir.join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    (
        cfg.display().to_string(),
        dir.join("runs").display().to_string(),
    )
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn stages_run_in_sequence_and_write_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, out) = setup(tmp.path());
    let common = [
        "--config",
        &cfg,
        "--out",
        &out,
        "--seed",
        "3",
        "--baseline",
        "mro",
    ];
    for stage in ["collect", "train-offline", "finetune", "evaluate", "export"] {
        let mut args = vec![stage];
        args.extend(common);
        ok(&samro(&args));
    }
    let run = tmp.path().join("runs/mro/seed3");
    for f in [
        "config.toml",
        "dataset.csv",
        "offline.csv",
        "online.csv",
        "online_schedule.csv",
        "test.csv",
        "test_actions.csv",
        "boundaries.csv",
        "summary.txt",
        "config_diff.txt",
        "cdf/cdf_tsl_s1.csv",
        "offline/agent/MANIFEST",
        "finetuned/agent/MANIFEST",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let diff = fs::read_to_string(run.join("config_diff.txt")).unwrap();
    assert!(diff.contains("awareness: slice -> agnostic"));
    let actions = fs::read_to_string(run.join("test_actions.csv")).unwrap();
    assert_eq!(actions.lines().next().unwrap().split(',').count(), 68);
}

#[test]
fn missing_artifacts_name_the_stage_and_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, out) = setup(tmp.path());
    let out = samro(&["train-offline", "--config", &cfg, "--out", &out]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`collect`"), "{err}");
    assert!(err.contains("offline dataset"), "{err}");

    let (cfg, runs) = setup(tmp.path());
    let out = samro(&["evaluate", "--config", &cfg, "--out", &runs]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("`finetune`"));
}

#[test]
fn bad_flags_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, out) = setup(tmp.path());
    assert!(!samro(&["baseline", "--baseline", "greedy"])
        .status
        .success());
    assert!(!samro(&["baseline", "--preset", "huge"]).status.success());
    let res = samro(&["baseline", "--config", &cfg, "--out", &out, "--k", "0"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("stage `baseline`"));
    assert!(!samro(&[
        "collect",
        "--config",
        &cfg,
        "--out",
        &out,
        "--baseline",
        "default"
    ])
    .status
    .success());
}

#[test]
fn default_baseline_runs_without_training() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, out) = setup(tmp.path());
    ok(&samro(&[
        "evaluate",
        "--config",
        &cfg,
        "--out",
        &out,
        "--baseline",
        "default",
    ]));
    let summary = fs::read_to_string(tmp.path().join("runs/default/seed1/summary.txt")).unwrap();
    assert!(summary.contains("action_dim 136"));
    let actions =
        fs::read_to_string(tmp.path().join("runs/default/seed1/test_actions.csv")).unwrap();
    let rows: Vec<&str> = actions.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| *r == rows[0]));
}

#[test]
fn repeated_runs_give_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, _) = setup(tmp.path());
    let a = tmp.path().join("a").display().to_string();
    let b = tmp.path().join("b").display().to_string();
    ok(&samro(&[
        "baseline", "--config", &cfg, "--out", &a, "--alpha", "0.5",
    ]));
    ok(&samro(&[
        "baseline", "--config", &cfg, "--out", &b, "--alpha", "0.5",
    ]));
    for f in [
        "dataset.csv",
        "offline.csv",
        "online.csv",
        "test.csv",
        "test_actions.csv",
        "cdf/cdf_hfr_s2.csv",
    ] {
        let x = fs::read(tmp.path().join("a/samro/seed1").join(f)).unwrap();
        let y = fs::read(tmp.path().join("b/samro/seed1").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn sweep_runs_every_baseline_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, out) = setup(tmp.path());
    ok(&samro(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        &out,
        "--jobs",
        "2",
        "--baselines",
        "default,samro",
    ]));
    let table = fs::read_to_string(tmp.path().join("runs/sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "baseline,seed,mean_test_reward");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("default,1,"));
    assert!(rows[4].starts_with("samro,2,"));
    for b in ["default", "samro"] {
        for s in [1, 2] {
            assert!(tmp
                .path()
                .join(format!("runs/{b}/seed{s}/test.csv"))
                .exists());
        }
    }
}
