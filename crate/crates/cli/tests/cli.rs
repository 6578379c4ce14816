use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qannulus(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qannulus")).args(args).arg("--out").arg(out).output().unwrap()
}

fn config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn default_verify_succeeds_and_writes_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = qannulus(&["verify"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    for name in ["lem1.csv", "lem2.csv", "roundtrip.csv", "identities.csv", "covariance.csv", "closure.csv", "summary.json"] {
        assert!(tmp.path().join(name).exists(), "{name} missing");
    }
    let lem1 = std::fs::read_to_string(tmp.path().join("lem1.csv")).unwrap();
    assert!(lem1.starts_with("check,indices,computed,error,majorant,margin,satisfied,flagged\n"), "{lem1:.80}");
}

#[test]
fn divergent_parameters_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "[params]\ngamma = 1.5\n");
    let out = qannulus(&["decay", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("γ > a"));
}

#[test]
fn malformed_config_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "[params]\ngama = 1.5\n");
    let out = qannulus(&["verify", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gama"));
}

#[test]
fn empty_decay_range_is_not_an_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "[decay]\nn_min = 3\nn_max = 2\n");
    let out = qannulus(&["decay", "--json", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert!(out.status.success());
    let decay = std::fs::read_to_string(tmp.path().join("out/decay.csv")).unwrap();
    assert_eq!(decay, "n,hs_norm,bound\n");
}

#[test]
fn single_site_window_has_known_spectrum() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(&tmp, "[spectrum]\nwindows = [0]\nmodes = 0\n");
    let out = qannulus(&["spectrum", "--config", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert!(out.status.success());
    let svd = std::fs::read_to_string(tmp.path().join("out/svd_w0.csv")).unwrap();
    // Q₀ on the single site l = 0 is 1/β(0) = 2 and D₀ is β(0) = 1/2.
    assert_eq!(svd, "k,sigma_q,sigma_d\n1,2.0000000000000000e0,5.0000000000000000e-1\n");
}

#[test]
fn json_summary_carries_schema() {
    let tmp = TempDir::new().unwrap();
    let out = qannulus(&["kernels", "--json", "--seed", "3"], tmp.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["seed"], 3);
    assert_eq!(v["command"], "kernels");
}

#[test]
fn same_seed_gives_identical_csv_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let dir = tmp.path().join(threads);
        let out = Command::new(env!("CARGO_BIN_EXE_qannulus"))
            .args(["verify", "--seed", "11", "--out"])
            .arg(&dir)
            .env("QANNULUS_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        runs.push(csv_bytes(&dir));
    }
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn different_seeds_change_sampled_outputs() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(qannulus(&["verify", "--seed", "1"], &a).status.success());
    assert!(qannulus(&["verify", "--seed", "2"], &b).status.success());
    let read = |d: &Path| std::fs::read(d.join("roundtrip.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}
