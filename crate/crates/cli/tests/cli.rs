use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn relclock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relclock")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const ZERO_STRENGTH: &str = r#"
[[experiment]]
name = "free"
scenario = "external_measurement"

[experiment.pulse]
strength = 0.0
"#;

#[test]
fn list_scenarios_names_every_scenario_once() {
    let o = relclock(&["list-scenarios"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("external_measurement"));
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names.len(), 6);
    let dir = tempfile::tempdir().unwrap();
    for n in names {
        let cfg = write(dir.path(), "one.toml", &format!("[[experiment]]\nscenario = \"{n}\"\n"));
        let v = relclock(&["validate", cfg.to_str().unwrap()]);
        assert!(v.status.success(), "{n}: {}", stdout(&v));
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = relclock(&["validate", path.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", path.display(), stdout(&o));
            count += 1;
        }
    }
    assert!(count >= 6);
}

#[test]
fn validate_reports_positivity_and_pulse_support() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "[[experiment]]\nscenario = \"external_measurement\"\n[experiment.pointer]\np_mean = 0.5\np_sigma = 0.25\n",
    );
    let o = relclock(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("experiment[0].pointer.p_mean") && text.contains("positivity"), "{text}");

    let cfg = write(
        dir.path(),
        "long.toml",
        "[[experiment]]\nscenario = \"internal_measurement\"\n[experiment.pulse]\ntau = 30.0\n",
    );
    let o = relclock(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("experiment[0].pulse.tau"), "{}", stdout(&o));
}

#[test]
fn unreadable_or_malformed_input_is_a_usage_error() {
    let o = relclock(&["validate", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "broken.toml", "[[experiment]\n");
    assert_eq!(relclock(&["validate", cfg.to_str().unwrap()]).status.code(), Some(2));
    let out = dir.path().join("out");
    let cfg = write(dir.path(), "typo.toml", "[[experiment]]\nscenario = \"external\"\n");
    let o = relclock(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_strength_run_flows_freely() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "free.toml", ZERO_STRENGTH);
    let out = dir.path().join("out");
    let o = relclock(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let summary = read_json(&out.join("summary.json"));
    let exp = &summary["experiments"][0];
    assert_eq!(exp["status"], "passed");
    let duration = exp["scalars"]["duration_internal"].as_f64().unwrap();
    let tau = exp["scalars"]["tau"].as_f64().unwrap();
    assert!((duration - tau).abs() < 1e-3, "{duration} vs {tau}");

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["verdicts"]["free"]["flow_law"], true);
    assert!(manifest["runtime_seconds"].as_f64().unwrap() >= 0.0);
    // The hash is the SHA-256 of the compact, key-sorted JSON of the stored resolved configs.
    use sha2::Digest;
    let compact = serde_json::to_string(&manifest["resolved_config"]).unwrap();
    let hash = format!("{:x}", sha2::Sha256::digest(compact.as_bytes()));
    assert_eq!(manifest["config_hash"], hash.as_str());

    let csv = std::fs::read_to_string(out.join("free.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "t,exp_TB,var_TB,exp_TA,var_TA,exp_QE,exp_HR,eta_norm,flow_rate,hermiticity_defect");
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 10));
}

#[test]
fn impossible_tolerance_fails_with_the_verdict_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{ZERO_STRENGTH}\n[experiment.tolerances]\nflow_law = 0.0\n");
    let cfg = write(dir.path(), "strict.toml", &text);
    let out = dir.path().join("out");
    let o = relclock(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["passed"], false);
    let verdicts = summary["experiments"][0]["verdicts"].as_array().unwrap();
    let flow = verdicts.iter().find(|v| v["name"] == "flow_law").unwrap();
    assert_eq!(flow["passed"], false);
    assert_eq!(flow["tolerance"], 0.0);
    assert!(out.join("free.csv").exists());
}

#[test]
fn disabled_experiments_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{ZERO_STRENGTH}\n[[experiment]]\nscenario = \"multiclock\"\nenabled = false\n");
    let cfg = write(dir.path(), "mixed.toml", &text);
    let out = dir.path().join("out");
    let o = relclock(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["experiments"][1]["status"], "skipped");
    assert!(!out.join("multiclock.csv").exists());
}

#[test]
fn reruns_reproduce_the_csv_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped("multiclock.toml");
    let mut outputs = Vec::new();
    for (k, jobs) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = relclock(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs, "--seed", "3"]);
        assert!(o.status.success(), "{}", stdout(&o));
        outputs.push((std::fs::read(out.join("multiclock.csv")).unwrap(), read_json(&out.join("manifest.json"))));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    assert_eq!(outputs[0].1["config_hash"], outputs[1].1["config_hash"]);
    assert_eq!(outputs[0].1["resolved_config"][0]["seed"], 3);
}

#[test]
fn csv_numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "free.toml", ZERO_STRENGTH);
    let out = dir.path().join("out");
    assert!(relclock(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let csv = std::fs::read_to_string(out.join("free.csv")).unwrap();
    for cell in csv.lines().skip(1).flat_map(|l| l.split(',').map(str::to_owned).collect::<Vec<_>>()) {
        if !cell.is_empty() {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(format!("{v:e}"), cell);
        }
    }
}
