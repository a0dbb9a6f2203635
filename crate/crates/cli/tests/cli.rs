use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_evogame"));
    c.env_remove("EVOGAME_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn evogame")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--game", "preset:no-such-game"]).status.code(), Some(2));
    assert_eq!(run(&["classify", "--game", "/nonexistent/game.json"]).status.code(), Some(2));
    assert_eq!(run(&["figures", "fig3", "--lambda", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn numeric_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("huge.json");
    std::fs::write(&game, r#"{"rows": [[0, 1e150], [1e150, 0]]}"#).unwrap();
    let out = dir.path().join("trace.csv");
    let o = run(&[
        "replicator",
        "integrate",
        "--game",
        game.to_str().unwrap(),
        "--u0",
        "0.3,0.7",
        "--t-max",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!out.exists(), "failed run left an output file");
}

#[test]
fn bad_thread_count_exits_2() {
    for v in ["0", "many", "-3"] {
        let o = bin().env("EVOGAME_THREADS", v).args(["selftest"]).output().unwrap();
        assert_eq!(o.status.code(), Some(2), "EVOGAME_THREADS={v}");
    }
}

#[test]
fn failed_command_keeps_existing_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    std::fs::write(&out, "previous").unwrap();
    let o = run(&["classify", "--game", "preset:no-such-game", "--json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "previous");
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1, "temporary files left behind");
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let a = run(&["classify", "--game", "preset:pd", "--update", "db", "--json"]);
    let b = run(&["classify", "--game", "preset:pd", "--update", "db", "--json", "--out", out.to_str().unwrap()]);
    assert!(b.status.success());
    assert!(b.stdout.is_empty());
    assert_eq!(std::fs::read(&out).unwrap(), a.stdout);
}

#[test]
fn classify_report_envelope() {
    let v = json(&run(&["classify", "--game", "preset:pd", "--update", "db", "--json"]));
    assert_eq!(v["format"], "evogame.classify");
    assert_eq!(v["version"], 1);
    assert!(v["report"]["case"].is_string());
}

#[test]
fn risk_neutral_stag_hunt_has_no_winner() {
    let v = json(&run(&["classify", "--game", "preset:stag-hunt", "--update", "bd", "--json"]));
    let r = &v["report"];
    assert_eq!(r["case"], "S2");
    assert!((r["equilibrium"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(r["winner"].is_null());
    assert!(!r["notes"].as_array().unwrap().is_empty());

    let v = json(&run(&["classify", "--game", "preset:stag-hunt-rd", "--update", "bd", "--json"]));
    assert_eq!(v["report"]["case"], "S2");
    assert_eq!(v["report"]["winner"], 1);
}

#[test]
fn three_strategy_classification() {
    let v = json(&run(&["classify", "--game", "preset:ex7.2", "--update", "db", "--json"]));
    assert_eq!(v["report"]["taxonomy"]["label"], "7.2");
}

#[test]
fn bare_preset_names_resolve() {
    let a = run(&["classify", "--game", "pd", "--constants", "paper-3d-nn", "--json"]);
    let b = run(&["classify", "--game", "preset:pd", "--constants", "preset:paper-3d-nn", "--json"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn chemical_interior_point() {
    let v = json(&run(&["cancer", "--family", "chemical", "--json"]));
    let rho: Vec<f64> = serde_json::from_value(v["report"]["rho"].clone()).unwrap();
    for (x, want) in rho.iter().zip([0.25, 0.5, 0.25]) {
        assert!((x - want).abs() < 1e-10, "{rho:?}");
    }
}

#[test]
fn analytic_identities_csv() {
    let o = run(&["coalesce", "--what", "identities", "--analytic", "preset:paper-3d-nn"]);
    assert!(o.status.success());
    let (header, rows) = csv(&stdout(&o));
    assert_eq!(header, ["identity", "residual", "tolerance", "pass"]);
    assert!(!rows.is_empty());
    // Identity names may contain quoted commas; the verdict is the last field.
    assert!(rows.iter().all(|r| r.last().unwrap() == "true"));
}

fn figure(args: &[&str]) -> Vec<Vec<String>> {
    let o = run(args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv(&stdout(&o));
    assert_eq!(header, ["s", "t", "case", "region", "ubar", "direct_region"]);
    rows
}

fn cases(rows: &[Vec<String>]) -> Vec<&str> {
    let mut c: Vec<&str> = rows.iter().map(|r| r[2].as_str()).filter(|c| !c.is_empty()).collect();
    c.sort();
    c.dedup();
    c
}

#[test]
fn fig2_has_four_regions() {
    let rows = figure(&["figures", "fig2", "--lambda", "0.5", "--s-grid", "-2:3:41", "--t-grid", "-1:4:41"]);
    assert_eq!(rows.len(), 41 * 41);
    assert_eq!(cases(&rows), ["S1", "S2", "S3", "S4"]);
    assert!(rows.iter().all(|r| r[3] == r[5]), "sweep and direct classification disagree");
}

#[test]
fn fig2_small_lambda_coexistence_quadrant() {
    let rows = figure(&["figures", "fig2", "--lambda", "1e-6", "--s-grid", "-1.95:2.05:21", "--t-grid", "-0.95:3.05:21"]);
    for r in &rows {
        let (s, t): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert_eq!(r[3] == "coexist", s > 0.0 && t > 1.0, "at S={s}, T={t}: {}", r[3]);
    }
}

#[test]
fn fig3_lines_meet_at_corner() {
    let rows = figure(&["figures", "fig3", "--s-grid", "-3:3:61", "--t-grid", "-2:4:61"]);
    assert_eq!(cases(&rows), ["S1", "S2", "S3", "S4"]);
}

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let cfg = config("ex71_small.toml");
    let go = |threads: &str| {
        bin()
            .env("EVOGAME_THREADS", threads)
            .args(["simulate", "--config", &cfg, "--t-max", "30", "--replicas", "2"])
            .output()
            .unwrap()
    };
    let a = go("1");
    let b = go("2");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, run(&["simulate", "--config", &cfg, "--t-max", "30", "--seed", "8"]).stdout);
}

#[test]
fn snapshot_resume_continues_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("state.snap");
    let cfg = config("ex71_small.toml");
    let first = run(&["simulate", "--config", &cfg, "--t-max", "40", "--snapshot", snap.to_str().unwrap()]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let (_, rows1) = csv(&stdout(&first));
    let second = run(&["simulate", "--config", &cfg, "--t-max", "20", "--resume", snap.to_str().unwrap()]);
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stderr));
    let (_, rows2) = csv(&stdout(&second));
    let last = rows1.last().unwrap();
    let start = &rows2[0];
    let t0: f64 = start[0].parse().unwrap();
    assert!((t0 - last[0].parse::<f64>().unwrap()).abs() < 1e-9);
    assert_eq!(&start[1..], &last[1..]);
    let t_end: f64 = rows2.last().unwrap()[0].parse().unwrap();
    assert!((t_end - 60.0).abs() < 1e-9);
}

#[test]
fn pde_front_speed_report() {
    let dir = tempfile::tempdir().unwrap();
    let speed = dir.path().join("speed.json");
    let o = run(&["pde", "--config", &config("stag_hunt_front.toml"), "--speed", speed.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&speed).unwrap()).unwrap();
    assert_eq!(v["format"], "evogame.wave-speed");
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert!(o.status.success(), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("0 invalid, 0 numeric failures"));
}
