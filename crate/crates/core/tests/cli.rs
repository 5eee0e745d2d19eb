use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alpha-csf")).args(args).output().unwrap()
}

fn record(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    serde_json::from_str(&text).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shrinker_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let v = record(&run(&["shrinker", "--alpha", "0.041666666666666664", "--k", "4", "--out", path(dir.path())]));
    assert!((v["r"].as_f64().unwrap() - 1.29878).abs() < 1e-4);
    assert!(v["residual"].as_f64().unwrap() < 1e-7);
    let profile: Value = serde_json::from_slice(&std::fs::read(dir.path().join("profile.json")).unwrap()).unwrap();
    assert_eq!(profile["k"], 4);
    assert_eq!(profile["h"].as_array().unwrap().len() as u64, v["n"].as_u64().unwrap());
    assert!(dir.path().join("segment.csv").exists());
}

#[test]
fn circle_profile_and_spectrum() {
    let v = record(&run(&["shrinker", "--alpha", "0.2", "--k", "circle"]));
    assert_eq!(v["k"], 0);
    assert_eq!(v["entropy"], 0.0);
    let v = record(&run(&["spectrum", "--alpha", "0.125", "--profile", "circle", "--jmax", "8"]));
    assert_eq!(v["morse_index"], 5);
    assert_eq!(v["kernel_dim"], 2);
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 8);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["shrinker", "--alpha", "0.2", "--k", "3"]).status.code(), Some(2));
    assert_eq!(run(&["shrinker", "--alpha", "1.5", "--k", "circle"]).status.code(), Some(2));
    assert_eq!(run(&["modes", "--trace", "/nonexistent/trace", "--k", "3"]).status.code(), Some(4));
    assert_eq!(run(&["flow", "--alpha", "0.5", "--mode", "sideways", "--t-end", "1"]).status.code(), Some(4));
    assert_eq!(run(&["flow", "--alpha", "0.5", "--mode", "tau", "--init", "slow:3,0.001", "--t-end", "1"]).status.code(), Some(2));
    assert_eq!(run(&["shrinker", "--k", "3"]).status.code(), Some(4));
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"alpha": 0.05, "k": "3"}"#).unwrap();
    let v = record(&run(&["shrinker", "--config", path(&cfg)]));
    assert_eq!(v["alpha"], 0.05);
    let v = record(&run(&["shrinker", "--config", path(&cfg), "--alpha", "0.041666666666666664"]));
    assert!((v["r"].as_f64().unwrap() - 1.86875).abs() < 1e-4);

    std::fs::write(&cfg, r#"{"alpha": 0.05, "bogus": 1}"#).unwrap();
    assert_eq!(run(&["shrinker", "--config", path(&cfg), "--k", "3"]).status.code(), Some(4));
}

#[test]
fn entropy_table_ordering() {
    let v = record(&run(&["entropy-table", "--alpha", "0.03333333333333333"]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let e: Vec<f64> = rows.iter().map(|r| r["entropy"].as_f64().unwrap()).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn flow_then_modes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let v = record(&run(&[
        "flow", "--alpha", "0.125", "--mode", "tau", "--init", "slow:3,0.001", "--t-end", "8", "--n", "64", "--outdir",
        path(&out),
    ]));
    assert_eq!(v["terminal_reason"], "reached_end");
    for f in ["trace.csv", "meta.json", "snapshots/0000.json", "snapshots/0800.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let v = record(&run(&["modes", "--trace", path(&out), "--k", "3", "--window-start", "5"]));
    assert_eq!(v["cstar"], -7.5);
    assert!(v["relative_error"].as_f64().unwrap() < 0.15);
    assert!(out.join("modes.csv").exists());
    assert!(out.join("residuals.json").exists());

    // wrong alpha for the requested k
    assert_eq!(run(&["modes", "--trace", path(&out), "--k", "4"]).status.code(), Some(2));
}

#[test]
fn flow_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |o: &Path| {
        run(&[
            "flow", "--alpha", "0.5", "--mode", "unnorm", "--init", "perturb:2,0.2", "--t-end", "0.2", "--n", "64",
            "--outdir", path(o),
        ])
    };
    let (ra, rb) = (args(&a), args(&b));
    assert_eq!(ra.stdout, rb.stdout);
    for f in ["trace.csv", "meta.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn flow_from_file_and_entropy_log() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("u.csv");
    let body: String = (0..64)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
            format!("{t},{}\n", 1.0 + 0.1 * (2.0 * t).cos())
        })
        .collect();
    std::fs::write(&csv, format!("theta,u\n{body}")).unwrap();
    let init = format!("file:{}", path(&csv));
    let v = record(&run(&["flow", "--alpha", "0.5", "--mode", "tau", "--init", &init, "--t-end", "2", "--entropy"]));
    assert_eq!(v["terminal_reason"], "reached_end");
    assert!(v["max_entropy_increase"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn four_fold_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k4");
    record(&run(&[
        "flow", "--alpha", "0.06666666666666667", "--mode", "tau", "--init", "slow:4,0.001", "--t-end", "8", "--n", "64",
        "--outdir", path(&out),
    ]));
    let v = record(&run(&["modes", "--trace", path(&out), "--k", "4"]));
    assert_eq!(v["cstar"], -32.0);
    assert!((v["measured"].as_f64().unwrap() + 32.0).abs() < 0.15 * 32.0);
}

#[test]
fn circle_area_at_t_04() {
    let v = record(&run(&["flow", "--alpha", "0.5", "--mode", "unnorm", "--init", "circle", "--t-end", "0.4", "--n", "64"]));
    let exact = std::f64::consts::PI * 0.4f64.powf(4.0 / 3.0);
    assert!((v["area"].as_f64().unwrap() - exact).abs() < 1e-8 * exact);
}
