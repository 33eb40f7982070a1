use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use causal_cli::{parse_pairs, read_pair_file, write_report, Report};
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn causal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causal")).args(args).output().expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = causal(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn pair_file_examples() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pair.txt");
    fs::write(&p, "1 2\n3 4\n").unwrap();
    assert_eq!(read_pair_file(&p).unwrap(), (vec![1.0, 3.0], vec![2.0, 4.0]));
    fs::write(&p, "1 2\n3 4\n\n").unwrap();
    assert_eq!(read_pair_file(&p).unwrap(), (vec![1.0, 3.0], vec![2.0, 4.0]));
    fs::write(&p, "1 2 3\n").unwrap();
    let e = read_pair_file(&p).unwrap_err();
    assert!(e.message.contains("line 1"), "{}", e.message);
    assert!(read_pair_file(&dir.path().join("missing.txt")).is_err());
    // tabs and scientific notation are fine
    assert_eq!(parse_pairs("1e-3\t-2\n").unwrap(), (vec![1e-3], vec![-2.0]));
}

#[test]
fn report_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    let r = Report::new("x", &serde_json::json!({"n": 3}), 9, &serde_json::json!({"p": 0.25})).unwrap();
    write_report(&r, &p).unwrap();
    let back: Report = serde_json::from_slice(&fs::read(&p).unwrap()).unwrap();
    assert_eq!(back, r);
    assert!(write_report(&r, &dir.path().join("no/such/dir/r.json")).is_err());
}

#[test]
fn simulate_is_seeded() {
    let spec = data("random_flip.json");
    let s = spec.to_str().unwrap();
    let a = stdout_of(&["simulate", "--spec", s, "-n", "50", "--seed", "4"]);
    let b = stdout_of(&["simulate", "--spec", s, "-n", "50", "--seed", "4"]);
    let c = stdout_of(&["simulate", "--spec", s, "-n", "50", "--seed", "5"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with("X,Y\n"));
    assert_eq!(a.lines().count(), 51);
}

#[test]
fn spec_seed_is_default() {
    let s = data("stork.json");
    let s = s.to_str().unwrap();
    let a = stdout_of(&["simulate", "--spec", s, "-n", "20"]);
    let b = stdout_of(&["simulate", "--spec", s, "-n", "20", "--seed", "11"]);
    assert_eq!(a, b);
}

#[test]
fn intervene_fixes_column() {
    let s = data("stork.json");
    let csv = stdout_of(&["intervene", "--spec", s.to_str().unwrap(), "-n", "100", "--do", "X=1"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("Z,X,Y"));
    assert!(lines.all(|l| l.split(',').nth(1) == Some("1")));
}

#[test]
fn dsep_and_markov_reports() {
    let s = data("stork.json");
    let s = s.to_str().unwrap();
    let r: Value = serde_json::from_str(&stdout_of(&["dsep", "--spec", s, "--x", "X", "--y", "Y", "--given", "Z"])).unwrap();
    assert_eq!(r["results"]["d_separated"], Value::Bool(true));
    let r: Value = serde_json::from_str(&stdout_of(&["dsep", "--spec", s, "--x", "X", "--y", "Y"])).unwrap();
    assert_eq!(r["results"]["d_separated"], Value::Bool(false));
    let r: Value = serde_json::from_str(&stdout_of(&["markov", "--spec", s])).unwrap();
    assert_eq!(r["results"]["all_hold"], Value::Bool(true));
    assert_eq!(r["command"], "markov");
}

#[test]
fn reports_differ_only_in_seed_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pair.txt");
    let text: String = (0..200)
        .map(|i| {
            let x = -1.0 + 2.0 * ((i * 37) % 200) as f64 / 199.0;
            format!("{x} {}\n", x * x * x + 0.05 * ((i * 91) % 17) as f64)
        })
        .collect();
    fs::write(&p, text).unwrap();
    let p = p.to_str().unwrap();
    let a = stdout_of(&["discover-pair", p, "--seed", "1"]);
    let b = stdout_of(&["discover-pair", p, "--seed", "1"]);
    let c = stdout_of(&["discover-pair", p, "--seed", "2"]);
    assert_eq!(a, b);
    let (a, c): (Value, Value) = (serde_json::from_str(&a).unwrap(), serde_json::from_str(&c).unwrap());
    assert_eq!(c["seed"], 2);
    for key in ["command", "config", "version"] {
        assert_eq!(a[key], c[key], "{key}");
    }
    let keys = |v: &Value| v.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    assert_eq!(keys(&a), ["command", "config", "results", "seed", "version"]);
    assert_eq!(keys(&a), keys(&c));
}

#[test]
fn discover_dir_scores_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut meta = String::new();
    for k in 0..3 {
        let pair = causal_core::cause_effect::synthetic::monotone_pair(300, k);
        let text: String = pair.x.iter().zip(&pair.y).map(|(x, y)| format!("{x} {y}\n")).collect();
        fs::write(dir.path().join(format!("p{k}.txt")), text).unwrap();
        let d = if pair.truth == causal_core::cause_effect::Direction::XtoY { "->" } else { "<-" };
        meta.push_str(&format!("p{k} {d}\n"));
    }
    fs::write(dir.path().join("pairmeta.txt"), meta).unwrap();
    let r: Value =
        serde_json::from_str(&stdout_of(&["discover-dir", dir.path().to_str().unwrap(), "--method", "igci"])).unwrap();
    assert_eq!(r["results"]["total"], 3);
    assert_eq!(r["results"]["method"], "igci");
    assert_eq!(r["config"]["method"], "igci");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"steps": 5, "n_bits": 256, "ones_start": 96, "ones_len": 64}"#).unwrap();
    let csv = stdout_of(&["second-law", "--config", cfg.to_str().unwrap(), "--steps", "3"]);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("step,bits\n0,"));
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| causal(args).status.code();
    let cyc = data("cycle.json");
    let out = causal(&["simulate", "--spec", cyc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[cycle]"));
    assert_eq!(code(&["no-such-command"]), Some(2));
    assert_eq!(code(&["simulate"]), Some(2));
    assert_eq!(code(&["ssl-bench", "--seeds", "3"]), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "1 2\n3\n").unwrap();
    let out = causal(&["discover-pair", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let syntax = dir.path().join("s.json");
    fs::write(&syntax, "{\"nodes\": [").unwrap();
    let out = causal(&["markov", "--spec", syntax.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[syntax]"));
    // a constant column is a data problem, not a numeric one
    let flat = dir.path().join("flat.txt");
    fs::write(&flat, (0..50).map(|i| format!("{i} 1\n")).collect::<String>()).unwrap();
    assert_eq!(code(&["discover-pair", flat.to_str().unwrap()]), Some(3));
}

#[test]
fn run_from_maps_argument_errors() {
    let e = causal_cli::run_from(["causal", "simulate"]).unwrap_err();
    assert_eq!(e.code, causal_cli::ErrorCode::Usage);
    assert_eq!(e.code.exit_status(), 2);
}
