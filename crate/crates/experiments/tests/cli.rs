use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn brwepi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brwepi")).args(args).output().expect("spawn brwepi")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const SMALL_LOCAL_TIME: &str = "mode = \"local_time\"\nd = 2\nladder = [4, 16]\nreplicates = 1000\nks_resolution = 0.2\nseed = 3\n";

#[test]
fn missing_config_fails_with_message() {
    let out = brwepi(&["converge", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "mode = \"bounds_suite\"\nd = 2\nbogus = 1\n");
    let out = brwepi(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mode_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_LOCAL_TIME);
    let out = brwepi(&["threshold", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("local_time"));
}

#[test]
fn too_few_replicates_for_ks_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "mode = \"local_time\"\nd = 2\nladder = [4, 16]\nreplicates = 10\n");
    let out = brwepi(&["converge", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient replicates"));
}

#[test]
fn bounds_suite_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "mode = \"bounds_suite\"\nd = 2\n");
    let o = dir.path().join("o");
    let out = brwepi(&["bounds", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "bounds.csv", "baseline.json"] {
        assert!(o.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&read(&o.join("report.json"))).unwrap();
    assert_eq!(report["mode"], "bounds_suite");
    assert_eq!(report["schema_version"], 1);
}

#[test]
fn csv_is_byte_identical_across_reruns_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_LOCAL_TIME);
    let mut outputs = Vec::new();
    for (i, w) in ["1", "2", "1"].iter().enumerate() {
        let o = dir.path().join(format!("o{i}"));
        let out = brwepi(&["converge", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "--workers", w]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((read(&o.join("replicates.csv")), read(&o.join("report.json"))));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_LOCAL_TIME);
    let mut csv = Vec::new();
    for seed in ["3", "4"] {
        let o = dir.path().join(format!("s{seed}"));
        let out = brwepi(&["converge", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), "--seed", seed]);
        assert!(out.status.success());
        csv.push(read(&o.join("replicates.csv")));
    }
    assert_ne!(csv[0], csv[1]);
}

#[test]
fn single_level_ladder_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "mode = \"local_time\"\nd = 2\nladder = [16]\nreplicates = 1000\nks_resolution = 0.2\n");
    let o = dir.path().join("o");
    let out = brwepi(&["converge", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&read(&o.join("report.json"))).unwrap();
    let ks: Vec<_> = report["checks"].as_array().unwrap().iter().filter(|c| c["name"].as_str().unwrap().starts_with("ks_non_increasing")).collect();
    assert!(!ks.is_empty());
    assert!(ks.iter().all(|c| c["verdict"] == "INCONCLUSIVE"));
}

#[test]
fn empty_family_gives_zero_occupation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "mode = \"occupation_time\"\nd = 2\nladder = [4, 16]\nfamily = \"empty\"\nreplicates = 50\n");
    let o = dir.path().join("o");
    let out = brwepi(&["occupation", "--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap()]);
    assert!(out.status.code().is_some_and(|c| c <= 1), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&o.join("replicates.csv"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn kernel_subcommand_writes_cache_and_reuses_it() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("k.bin");
    for _ in 0..2 {
        let out = brwepi(&["kernel", "--d", "2", "--n-max", "20", "--out", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(std::fs::metadata(&p).unwrap().len() > 0);
}

#[test]
fn brw_and_sir_subcommands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("brw");
    let out = brwepi(&["brw", "--d", "2", "--mass", "3", "--horizon", "5", "--replicates", "4", "--out", b.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&b.join("summary.csv")).lines().count(), 5);
    assert!(read(&b.join("trajectory.csv")).lines().count() >= 1);

    let s = dir.path().join("sir");
    let out = brwepi(&["sir", "--village", "100", "--horizon", "5", "--replicates", "3", "--mass", "5", "--out", s.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&s.join("sir_summary.csv")).lines().count(), 4);
}

#[test]
fn exact_subcommand_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    let out = brwepi(&["exact", "--n", "2", "--quantity", "second", "--out", p.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(&p)).unwrap();
    assert!((v["scalar"].as_f64().unwrap() - 7.0 / 25.0).abs() < 1e-12);

    let out = brwepi(&["exact", "--n", "3", "--quantity", "cumulant", "--psi", "-0.2", "--out", p.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(&p)).unwrap();
    assert_eq!(v["grids"].as_array().unwrap().len(), 2);
}
