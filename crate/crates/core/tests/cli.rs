use std::path::Path;
use std::process::{Command, Output};

use parrondo::config::RunConfig;

fn parrondo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parrondo")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn paper_games_emit_four_curves() {
    let o = parrondo(&["simulate", "--preset", "paper-games"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("game,n,fortune"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 40_000);
    for g in ["A", "B", "C", "D"] {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{g},"))).count(), 10_000);
    }
}

#[test]
fn zero_steps_give_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::preset("game-b").unwrap();
    cfg.params.n_steps = 0;
    let path = write_config(dir.path(), &cfg);
    let o = parrondo(&["simulate", "--config", &path]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "game,n,fortune\n");
}

#[test]
fn fixed_seed_files_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = parrondo(&["simulate", "--preset", "paper-games", "--seed", "9", "--out", d.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let fa = std::fs::read(a.join("fortune.csv")).unwrap();
    let fb = std::fs::read(b.join("fortune.csv")).unwrap();
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
    let o = parrondo(&["simulate", "--preset", "paper-games", "--seed", "10"]);
    assert_ne!(o.stdout, fa);
}

fn verdict(preset: &str) -> String {
    let o = parrondo(&["classify", "--preset", preset]);
    assert!(o.status.success(), "{preset}");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    v["classification"]["verdict"].as_str().unwrap().to_string()
}

#[test]
fn classify_presets() {
    assert_eq!(verdict("game-c"), "transient_plus");
    assert_eq!(verdict("game-cprime"), "transient_minus");
    assert_eq!(verdict("counterexample"), "environment_dependent");
}

#[test]
fn spectrum_dimensions() {
    let o = parrondo(&["spectrum", "--preset", "game-c"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let spectra = v["spectra"].as_array().unwrap();
    assert_eq!(spectra[0]["side"], "forward");
    assert_eq!(spectra[0]["d0"], 6);
    assert_eq!(spectra[1]["side"], "inverse");
    assert_eq!(spectra[1]["d0"], 4);
}

#[test]
fn mu_scalar_and_curve() {
    let o = parrondo(&["mu", "--preset", "game-b"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], &["0.099", "0.749"]);
    assert!(row[2].parse::<f64>().unwrap() > 1.0);

    let o = parrondo(&["mu", "--preset", "game-d", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["curve"].as_array().unwrap().len(), 101);
}

#[test]
fn hitting_table_columns() {
    let o = parrondo(&["hitting", "--preset", "game-cprime"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,i,f,f_beta_1,f_beta_2,boundary_mode"));
    let target: Vec<&str> = lines.find(|l| l.starts_with("1,0,")).unwrap().split(',').collect();
    assert_eq!(target[2].parse::<f64>().unwrap(), 1.0);
    assert_eq!(target[5], "killed");
}

#[test]
fn exit_codes() {
    assert_eq!(parrondo(&["classify", "--preset", "no-such-game"]).status.code(), Some(2));
    assert_eq!(parrondo(&["classify"]).status.code(), Some(2));
    assert_eq!(parrondo(&["classify", "--preset", "game-c", "--format", "csv"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "model": {"q": [[0.9]], "processes": [{"kind": "periodic", "values": [0.4]}], "assignment": [0]}}"#).unwrap();
    assert_eq!(parrondo(&["classify", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    // A Gauss-map environment cannot be read outside its realized window.
    let mut cfg = RunConfig::preset("gauss").unwrap();
    cfg.params.env_window = (0, 10);
    let path = write_config(dir.path(), &cfg);
    assert_eq!(parrondo(&["hitting", "--config", &path]).status.code(), Some(3));
}

#[test]
fn reproduce_paper_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("paper");
    let o = parrondo(&["reproduce-paper", "--out", out.to_str().unwrap()]);
    let report = stdout(&o);
    assert_eq!(report.lines().count(), 11, "{report}");
    assert!(report.lines().all(|l| l.starts_with("PASS")), "{report}");
    assert_eq!(o.status.code(), Some(0));
    for f in ["report.txt", "checks.json", "fortune_curves.csv", "mu_game_d_curve.csv", "psi_limits.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}
