use std::path::Path;
use std::process::Command;

fn projlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_projlab"));
    c.env_remove("PROJLAB_THREADS");
    c
}

fn run(dir: &Path, config: &str, out: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join(format!("{out}.json"));
    std::fs::write(&cfg, config).unwrap();
    let o = projlab()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(out))
        .args(extra)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn read(dir: &Path, out: &str, file: &str) -> String {
    std::fs::read_to_string(dir.join(out).join(file)).unwrap()
}

#[test]
fn marstrand_run_passes() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = run(d.path(), r#"{"experiment":"marstrand2d","delta":["2^-5"],"a":1,"seed":7}"#, "m", &[]);
    assert_eq!(code, 0, "{err}");
    let csv = read(d.path(), "m", "results.csv");
    assert!(csv.starts_with("delta,a,a_meas,s_min,gap,pass_fraction\n"));
    assert_eq!(csv.lines().count(), 2);
    let summary: serde_json::Value = serde_json::from_str(&read(d.path(), "m", "summary.json")).unwrap();
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert!(d.path().join("m/timing.json").exists());
}

#[test]
fn exceptional_example_within_bound() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = run(d.path(), r#"{"experiment":"exceptional","alpha":1.5,"s":1.0,"delta":["2^-8"]}"#, "e", &[]);
    assert_eq!(code, 0, "{err}");
    let s: serde_json::Value = serde_json::from_str(&read(d.path(), "e", "summary.json")).unwrap();
    let m = &s["results"][0]["metrics"];
    assert!(m["E_dim"].as_f64().unwrap() <= 0.7);
    assert!(m["bound"].as_f64().unwrap() > 0.4);
}

#[test]
fn malformed_config_leaves_no_output() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = run(d.path(), "{\n  \"experiment\": \"incidence\",\n  \"delta\": [0.25\n", "bad", &[]);
    assert_eq!(code, 1);
    assert!(err.contains("line"), "{err}");
    assert!(!d.path().join("bad").exists());
    let (code, err) = run(d.path(), "{\n  \"experiment\": \"incidence\",\n  \"delta\": 0.3,\n  \"s\": 1\n}", "bad2", &[]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
    assert!(!d.path().join("bad2").exists());
}

#[test]
fn threshold_failure_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"marstrand2d","delta":"2^-5","a":1,"seed":7,"thresholds":{"gap_min":0.5}}"#;
    let (code, _) = run(d.path(), cfg, "t", &[]);
    assert_eq!(code, 2);
    assert!(read(d.path(), "t", "summary.json").contains("\"pass\": false"));
}

#[test]
fn empty_list_gives_header_only() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = run(d.path(), r#"{"experiment":"incidence","delta":[],"s":1}"#, "z", &[]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(d.path(), "z", "results.csv"), "delta,s,n_theta,n_tubes,n_heavy,threshold,ratio,pass\n");
}

#[test]
fn sweep_rows_follow_enumeration_order() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"marstrand2d","delta":["2^-4","2^-5"],"a":[0.5,1],"seed":3}"#;
    let (code, err) = run(d.path(), cfg, "s", &["--threads", "2"]);
    assert!(code == 0 || code == 2, "{err}");
    let csv = read(d.path(), "s", "results.csv");
    let keys: Vec<String> = csv.lines().skip(1).map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(keys, vec!["0.0625,0.5", "0.0625,1", "0.03125,0.5", "0.03125,1"]);
}

#[test]
fn reruns_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"incidence","delta":["2^-4","2^-5"],"s":[0.5,1.5],"seed":1}"#;
    let a = run(d.path(), cfg, "a", &["--threads", "2"]);
    let b = run(d.path(), cfg, "b", &["--threads", "2"]);
    assert_eq!(a.0, b.0);
    for f in ["results.csv", "summary.json"] {
        assert_eq!(read(d.path(), "a", f), read(d.path(), "b", f), "{f}");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"marstrand2d","delta":"2^-6","a":0.7,"seed":1}"#;
    run(d.path(), cfg, "x", &["--seed", "99"]);
    let s: serde_json::Value = serde_json::from_str(&read(d.path(), "x", "summary.json")).unwrap();
    assert_eq!(s["config"]["seed"], 99);
}

#[test]
fn dump_field_writes_raw_complex() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"experiment":"highlow","delta":"2^-3","K":2,"s":1,"seed":2}"#;
    let (code, err) = run(d.path(), cfg, "h", &["--dump-field"]);
    assert!(code == 0 || code == 2, "{err}");
    let bytes = std::fs::read(d.path().join("h/field_000.bin")).unwrap();
    // complex64: two little-endian f32 per sample
    assert_eq!(bytes.len(), 64 * 64 * 64 * 8);
    let side: serde_json::Value = serde_json::from_str(&read(d.path(), "h", "field_000.json")).unwrap();
    assert_eq!(side["N"], 64);
}

#[test]
fn list_experiments_names_all() {
    let o = projlab().arg("--list-experiments").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["exceptional", "positivity", "incidence", "covering", "highlow", "decoupling", "marstrand2d"] {
        assert!(text.contains(name));
    }
    assert!(text.contains("n_theta,n_tubes,n_heavy"));
}
