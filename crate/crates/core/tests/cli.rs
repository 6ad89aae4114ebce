use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fricobs::cli::{batch::Manifest, parse_scenario};
use fricobs::engine::TrajectoryLog;

fn fricobs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fricobs"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SWEEP: &str = r#"{
    "name": "sweep",
    "plant": {"kind": "mech", "theta1": 0.4, "theta2": 1.0, "vartheta": 100},
    "observer": {"k1": [1, 3]},
    "reference": {"kind": "chirp"},
    "init": {"x1": 0.1, "x2": 0.5},
    "sim": {"t_end": 2, "log_every": 50},
    "output": {"emit_plots": true, "excitation": {"mode": "intervals", "width": 0.5}}
}"#;

fn simulate(scenario: &Path, out: &Path) -> Output {
    fricobs(&["simulate", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"])
}

#[test]
fn sweep_writes_full_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "s.json", SWEEP);
    let out = tmp.path().join("out");
    let res = simulate(&sc, &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let manifest = Manifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.runs.len(), 2);
    assert!(out.join("comparison.json").exists());
    for fig in ["tracking", "tracking_error", "observer_error", "parameter_errors", "control", "pe"] {
        assert!(out.join(format!("plots/{fig}.gp")).exists(), "{fig}");
    }
    for f in &manifest.files {
        assert!(out.join(&f.path).exists());
        assert_eq!(f.sha256.len(), 64);
    }

    let log = TrajectoryLog::read_csv(fs::File::open(out.join("k1_3/log.csv")).map(std::io::BufReader::new).unwrap()).unwrap();
    // 2 s at the default 1e-4 step, every 50th step, plus the initial row
    assert_eq!(log.rows(), 401);
    assert!(log.comments.iter().any(|c| c.starts_with("scenario: {")));
    assert!(log.column("u_star").is_some());
}

#[test]
fn reruns_reproduce_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
        "name": "seeded",
        "plant": {"kind": "mech", "theta1": 0.4, "theta2": 1.0, "vartheta": 100},
        "observer": {"k1": 1},
        "controller": {"open_loop": {"kind": "sine"}},
        "init": {"random_box": [-2, 2]},
        "sim": {"t_end": 1, "seed": 42, "log_every": 10}
    }"#;
    let sc = write(tmp.path(), "s.json", text);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(simulate(&sc, &a).status.code(), Some(0));
    assert_eq!(simulate(&sc, &b).status.code(), Some(0));
    let (ma, mb) = (
        Manifest::load(&a.join("manifest.json")).unwrap(),
        Manifest::load(&b.join("manifest.json")).unwrap(),
    );
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.seed, Some(42));
    let log = fs::read_to_string(a.join("k1_1/log.csv")).unwrap();
    assert!(log.contains("# seed: 42"));
}

#[test]
fn config_errors_exit_2_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "s.json", &SWEEP.replace(r#""k1": [1, 3]"#, r#""k1": [1, 3], "gain": 2"#));
    let res = simulate(&sc, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("observer.gain"));

    let hydro = r#"{
        "name": "h",
        "plant": {"kind": "hydro", "a1": 1, "a2": 1, "a3": 1, "theta1": 0.4, "theta2": 1, "vartheta": 100},
        "observer": {"k1_auto": true, "x3hat": true},
        "controller": {"open_loop": {"kind": "sine"}}
    }"#;
    let sc = write(tmp.path(), "h.json", hydro);
    let res = simulate(&sc, &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("observer.theta2_upper"));
}

#[test]
fn missing_input_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let res = simulate(&tmp.path().join("nope.json"), &tmp.path().join("out"));
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn divergence_exits_3_and_keeps_partial_log() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
        "name": "blowup",
        "plant": {"kind": "mech", "theta1": 0.4, "theta2": 1.0, "vartheta": 100},
        "observer": {"k1": 1},
        "init": {"x1": 1, "x2": 5},
        "sim": {"t_end": 100, "dt": 0.5, "log_every": 1}
    }"#;
    let sc = write(tmp.path(), "s.json", text);
    let out = tmp.path().join("out");
    let res = simulate(&sc, &out);
    assert_eq!(res.status.code(), Some(3));
    let log = fs::read_to_string(out.join("k1_1/log.csv")).unwrap();
    assert!(log.lines().last().unwrap().starts_with("# DIVERGED at t="));
    let manifest = Manifest::load(&out.join("manifest.json")).unwrap();
    assert!(manifest.runs[0].diverged_at.is_some());
}

#[test]
fn analyze_and_plot_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "s.json", SWEEP);
    let out = tmp.path().join("out");
    assert_eq!(simulate(&sc, &out).status.code(), Some(0));
    let log = out.join("k1_1/log.csv");
    let csv = tmp.path().join("pe.csv");
    let res = fricobs(&[
        "analyze-excitation", log.to_str().unwrap(), "--mode", "pe", "--window", "0.5",
        "--mu", "1e-3", "--stride", "0.25", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# mode: pe"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 7);

    let res = fricobs(&["analyze-excitation", log.to_str().unwrap(), "--mode", "conservative"]);
    assert_eq!(res.status.code(), Some(2));

    let manifest = out.join("manifest.json");
    let script = tmp.path().join("t.gp");
    let res = fricobs(&["plot", manifest.to_str().unwrap(), "--figure", "tracking", "--out", script.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert!(fs::read_to_string(&script).unwrap().contains("'k1_3/log.csv' using 't':'x1'"));
    let res = fricobs(&["plot", manifest.to_str().unwrap(), "--figure", "bode"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn plot_reports_missing_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
        "name": "open",
        "plant": {"kind": "mech", "theta1": 0.4, "theta2": 1.0, "vartheta": 100},
        "observer": {"k1": 1},
        "controller": {"open_loop": {"kind": "constant", "value": 0.5}},
        "sim": {"t_end": 0.1}
    }"#;
    let sc = write(tmp.path(), "s.json", text);
    let out = tmp.path().join("out");
    assert_eq!(simulate(&sc, &out).status.code(), Some(0));
    let res = fricobs(&["plot", out.join("manifest.json").to_str().unwrap(), "--figure", "control"]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("u_star"));
}

#[test]
fn shipped_scenarios_parse_and_roundtrip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = parse_scenario(&fs::read(&path).unwrap()).unwrap_or_else(|e| panic!("{path:?}: {e}"));
        assert_eq!(parse_scenario(s.to_json().as_bytes()).unwrap(), s);
        n += 1;
    }
    assert!(n >= 4);
}
