use std::path::Path;
use std::process::{Command, Output};

fn truncperc(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_truncperc"));
    cmd.args(args);
    cmd.env_remove("TRUNCPERC_WORKERS");
    if let Some(w) = workers {
        cmd.env("TRUNCPERC_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const PERC: &str = r#"
model = "perc"
k = [1, 2, 4]
horizon = 30.0
replicas = 300
seed0 = 9

[family]
kind = "power-law"
c = 0.9
s = 1.0
"#;

#[test]
fn perc_sweep_prints_csv() {
    let out = truncperc(&["perc", "--k", "1,2", "--replicas", "20", "--horizon", "5"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("model,k,T,N,theta_hat,ci_lo,ci_hi,seed0,wall_time"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn sweep_output_is_independent_of_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PERC);
    let mut outputs = Vec::new();
    for w in ["1", "4"] {
        let out_dir = dir.path().join(format!("w{w}"));
        let out = truncperc(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap()], Some(w));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(out_dir.join("sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 4);
}

#[test]
fn decreasing_ranges_are_a_config_error() {
    let out = truncperc(&["perc", "--k", "3,2"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("bogus = 1\n{PERC}"));
    assert_eq!(truncperc(&["sweep", "--config", &cfg], None).status.code(), Some(2));
    let cfg = write_config(dir.path(), &format!("{PERC}levle = 0.5\n"));
    assert_eq!(truncperc(&["sweep", "--config", &cfg], None).status.code(), Some(2));
}

#[test]
fn sweep_requires_a_config() {
    assert_eq!(truncperc(&["sweep"], None).status.code(), Some(2));
}

#[test]
fn bad_worker_count_is_rejected() {
    let out = truncperc(&["perc", "--k", "1", "--replicas", "5", "--horizon", "2"], Some("zero"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn contact_json_output() {
    let out = truncperc(
        &["contact", "--k", "1,2", "--replicas", "20", "--horizon", "1", "--format", "json"],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["model"], "contact");
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
model = "renorm"
horizon = 10.0
epsilon = 0.45
delta = 0.2
replicas = 20
j_max = 4

[family]
kind = "dense-epsilon"
level = 0.5

[verify]
traces = 10
aniso_seeds = 10
contact_realizations = 10
monotone_seeds = 20
"#,
    );
    let ok = truncperc(&["verify", "--config", &cfg], None);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = truncperc(&["verify", "--config", &cfg, "--sabotage", "0.05"], None);
    assert_eq!(bad.status.code(), Some(1));
}
