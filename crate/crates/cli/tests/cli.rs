//! End-to-end checks of the command-line surface: exit codes, file formats,
//! and reproducibility of the written CSVs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn topkq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topkq"))
        .args(args)
        .output()
        .expect("binary runs")
}

const SMALL_CONFIG: &str = r#"
[experiment]
kind = "convergence"
trials = 2
base_seed = 7

[network]
graph = "erdos_renyi"
n = 10
edge_multiplier = 3.0

[scores]
total = 10
variance = 10.0
delta = 0.2

[quantile]
k = 3

[smoothing]
method = "convolution"
h_policy = "delta_scaled"
h_value = 0.5

[solvers]
run = ["extra", "dgd", "stopk"]
steps = "manual"
dgd_step = 0.02
max_iters = 500000
"#;

fn strip_timestamps(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_writes_reproducible_outputs_and_plots_render() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, SMALL_CONFIG).unwrap();

    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let r = topkq(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    for name in ["trials.csv", "summary.csv", "curves.csv"] {
        assert_eq!(
            strip_timestamps(&out1.join(name)),
            strip_timestamps(&out2.join(name)),
            "{name} not reproducible"
        );
    }

    let svg = dir.path().join("curves.svg");
    let r = topkq(&[
        "plot",
        "--csv",
        out1.join("curves.csv").to_str().unwrap(),
        "--kind",
        "convergence",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn trials_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    let out = dir.path().join("o");
    let r = topkq(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    let text = fs::read_to_string(out.join("trials.csv")).unwrap();
    // 3 trials x 3 solvers plus header
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 9);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, SMALL_CONFIG.replace("k = 3", "k = 11")).unwrap();
    let r = topkq(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));

    // unparseable file
    fs::write(&cfg, "not toml at all [").unwrap();
    let r = topkq(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));

    // missing file
    let r = topkq(&["run", "--config", "/nonexistent/x.toml"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn strict_mode_exits_3_on_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    // a one-iteration budget cannot reach the interval
    fs::write(
        &cfg,
        SMALL_CONFIG.replace("max_iters = 500000", "max_iters = 1"),
    )
    .unwrap();
    let out = dir.path().join("o");
    let r = topkq(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--strict",
    ]);
    assert_eq!(r.status.code(), Some(3));

    // without --strict the same run exits 0
    let r = topkq(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0));
}

#[test]
fn oracle_prints_ground_truth_json() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.txt");
    fs::write(&scores, "2\n2\n5\n1\n2\n").unwrap();
    let r = topkq(&["oracle", "--scores", scores.to_str().unwrap(), "--k", "3"]);
    assert!(r.status.success());
    let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(v["theta_k"], 2.0);
    assert_eq!(v["Delta"], 1.0);
    assert_eq!(v["m_bar"], 2);
    assert_eq!(v["m_under"], 1);
    assert_eq!(v["g_m"], 1.5);

    // degenerate multiset: gap undefined
    fs::write(&scores, "3\n3\n3\n").unwrap();
    let r = topkq(&["oracle", "--scores", scores.to_str().unwrap(), "--k", "1"]);
    assert_eq!(r.status.code(), Some(2));

    // k out of range
    fs::write(&scores, "1\n2\n").unwrap();
    let r = topkq(&["oracle", "--scores", scores.to_str().unwrap(), "--k", "5"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn plot_rejects_schema_mismatch_and_empty() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    fs::write(&csv, "wrong,header\n1,2\n").unwrap();
    let out = dir.path().join("x.svg");
    let r = topkq(&[
        "plot",
        "--csv",
        csv.to_str().unwrap(),
        "--kind",
        "convergence",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());

    fs::write(&csv, "solver,iter,sup_err,fn_err,consensus,tx_scalars\n").unwrap();
    let r = topkq(&[
        "plot",
        "--csv",
        csv.to_str().unwrap(),
        "--kind",
        "convergence",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}
