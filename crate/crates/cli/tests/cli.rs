use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn ui_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ui-lab"))
        .args(args)
        .env_remove("UI_LAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_object(o: &Output) -> Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    let v: Value = serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"));
    v["error"].clone()
}

#[test]
fn every_protocol_runs_with_defaults() {
    for cmd in [
        "two-ref",
        "multi-ref",
        "weak",
        "recovery-rounds",
        "same-unknown",
        "splitting-compare",
        "noise-rates",
        "optimality-sweep",
        "gaussian-integral-check",
    ] {
        let o = ui_lab(&[cmd]);
        assert!(
            o.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let text = stdout(&o);
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.split(',').all(|h| !h.is_empty()), "{cmd}: {header}");
        let width = header.split(',').count();
        for line in lines {
            assert_eq!(line.split(',').count(), width, "{cmd}: {line}");
            assert!(
                line.split(',')
                    .all(|x| x == "NaN" || x.parse::<f64>().is_ok()),
                "{cmd}: {line}"
            );
        }
    }
}

#[test]
fn csv_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let json = dir.path().join("t.json");
    let base = ["noise-rates", "--shots", "5000", "--seed", "4"];
    assert!(
        ui_lab(&[&base[..], &["--out", csv.to_str().unwrap()]].concat())
            .status
            .success()
    );
    let o = ui_lab(
        &[
            &base[..],
            &["--format", "json", "--out", json.to_str().unwrap()],
        ]
        .concat(),
    );
    assert!(o.status.success());
    assert!(o.stdout.is_empty());

    let table: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(table["metadata"]["seed"], 4);
    assert_eq!(table["metadata"]["shots"], 5000);
    assert_eq!(table["metadata"]["config"]["protocol"], "noise_rates");
    let text = fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let names: Vec<&str> = table["columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(header, names);
    let second: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    for (i, c) in table["columns"].as_array().unwrap().iter().enumerate() {
        assert_eq!(c["values"][0].as_f64().unwrap(), second[i]);
    }
}

#[test]
fn seed_precedence() {
    let run = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_ui-lab"));
        cmd.args(args).env_remove("UI_LAB_SEED");
        if let Some(s) = env {
            cmd.env("UI_LAB_SEED", s);
        }
        let o = cmd.output().unwrap();
        assert!(o.status.success());
        stdout(&o)
    };
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"parameters": {"delta": 1.5}, "shots": 3000, "seed": 7}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_config = run(&["weak", "--config", cfg], None);
    let explicit7 = run(&["weak", "--config", cfg, "--seed", "7"], None);
    let env8 = run(&["weak", "--config", cfg], Some("8"));
    let flag8 = run(&["weak", "--config", cfg, "--seed", "8"], None);
    let flag_over_env = run(&["weak", "--config", cfg, "--seed", "7"], Some("8"));
    assert_eq!(from_config, explicit7);
    assert_eq!(env8, flag8);
    assert_eq!(flag_over_env, from_config);
    assert_ne!(from_config, env8);
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "two-ref", "--shots", "4000", "--seed", "21", "--format", "json",
    ];
    let (a, b) = (ui_lab(&args), ui_lab(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");

    fs::write(&path, r#"{"parameters": {"sigma": 0.1, "bogus": 1}}"#).unwrap();
    let o = ui_lab(&["noise-rates", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_object(&o);
    assert_eq!(e["kind"], "ConfigError");
    assert_eq!(e["key"], "parameters.bogus");

    fs::write(&path, r#"{"protocol": "weak"}"#).unwrap();
    let e = error_object(&ui_lab(&["two-ref", "--config", path.to_str().unwrap()]));
    assert_eq!(e["key"], "protocol");

    fs::write(
        &path,
        r#"{"sweep": {"parameter": "delta", "min": 0, "max": 1}}"#,
    )
    .unwrap();
    let e = error_object(&ui_lab(&["weak", "--config", path.to_str().unwrap()]));
    assert_eq!(e["key"], "steps");

    fs::write(&path, "{not json").unwrap();
    let e = error_object(&ui_lab(&["weak", "--config", path.to_str().unwrap()]));
    assert_eq!(e["kind"], "ConfigError");
}

#[test]
fn domain_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("neg.json");
    fs::write(&path, r#"{"parameters": {"sigma": -0.5}}"#).unwrap();
    let o = ui_lab(&["noise-rates", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_object(&o)["kind"], "DomainError");

    let o = ui_lab(&["weak", "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_object(&o)["kind"], "UsageError");

    let o = ui_lab(&["weak", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_object(&o)["kind"], "IoError");
}

#[test]
fn shots_zero_is_analytic_only() {
    let o = ui_lab(&["two-ref", "--shots", "0"]);
    assert!(o.status.success());
    assert!(!stdout(&o).lines().next().unwrap().contains("mc_"));
    let o = ui_lab(&["two-ref", "--shots", "100"]);
    let header = stdout(&o).lines().next().unwrap().to_string();
    assert!(header.contains("mc_p_total,mc_p_total_se"), "{header}");
}

#[test]
fn verify_reports_every_check() {
    let o = ui_lab(&["verify", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let checks = v.as_array().unwrap();
    assert!(checks.len() >= 9);
    for c in checks {
        assert!(
            c["status"] == "pass" || c["name"] == "recovery_not_below_splitting",
            "{c}"
        );
    }
}
