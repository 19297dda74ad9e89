use std::path::Path;
use std::process::Command;

use helicore::cli_io::{sha256_hex, RunManifest, MANIFEST_NAME};

const CONFIG: &str = "\
# small run
h = 1
kappa = 1
r_star = 1
R = 2
eps = 0.1
a = 1
b = 0
Lambda = 30
n_r = 48
n_theta = 48
max_iters = 200
";

fn helicore(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_helicore")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_NAME)).unwrap()).unwrap()
}

fn check_inventory(dir: &Path) -> RunManifest {
    let m = manifest(dir);
    let mut on_disk: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != MANIFEST_NAME)
        .collect();
    on_disk.sort();
    let listed: Vec<String> = m.files.iter().map(|f| f.path.clone()).collect();
    assert_eq!(listed, on_disk);
    for f in &m.files {
        let bytes = std::fs::read(dir.join(&f.path)).unwrap();
        assert_eq!((bytes.len(), sha256_hex(&bytes)), (f.bytes, f.sha256.clone()), "{}", f.path);
    }
    m
}

#[test]
fn solve_then_evolve_and_reconstruct_from_the_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let solve = tmp.path().join("solve");
    let out = helicore(&["solve", "--config", &cfg, "--out", solve.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = check_inventory(&solve);
    assert_eq!(m.command, "solve");
    for f in ["zeta.csv", "psi.csv", "state_v.csv", "state_w.csv", "maximizer.json", "config.txt"] {
        assert!(m.files.iter().any(|e| e.path == f), "{f}");
    }

    let evo = tmp.path().join("evolve");
    let out = helicore(&[
        "evolve",
        "--config",
        &cfg,
        "--out",
        evo.to_str().unwrap(),
        "--snapshot",
        solve.to_str().unwrap(),
        "--t-end",
        "0.05",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = check_inventory(&evo);
    assert!(m.files.iter().any(|e| e.path == "trajectory.json"));

    let rec = tmp.path().join("rec");
    let out = helicore(&[
        "reconstruct",
        "--config",
        &cfg,
        "--out",
        rec.to_str().unwrap(),
        "--snapshot",
        solve.to_str().unwrap(),
        "--samples",
        "200",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = check_inventory(&rec);
    assert!(m.files.iter().any(|e| e.path == "samples.csv"));
    let body = std::fs::read_to_string(rec.join("samples.csv")).unwrap();
    assert_eq!(body.lines().count(), 201);
}

#[test]
fn identical_runs_write_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        let out = helicore(&["solve", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let (a, b) = (manifest(&dirs[0]), manifest(&dirs[1]));
    assert_eq!(a.files, b.files);
}

#[test]
fn bad_configs_fail_with_exit_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("o");
    for (text, needle) in [
        (format!("{CONFIG}colour = 3\n"), "colour"),
        (CONFIG.replace("kappa = 1\n", ""), "kappa"),
        (CONFIG.replace("eps = 0.1", "eps = 0.1\neps = 0.2"), "eps"),
        (CONFIG.replace("Lambda = 30", "Lambda = 0"), "Lambda"),
    ] {
        let cfg = write_config(tmp.path(), &text);
        let out = helicore(&["solve", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{err}");
    }
}

#[test]
fn green_probe_records_its_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let d = tmp.path().join("g");
    let out = helicore(&["green-probe", "--config", &cfg, "--out", d.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = check_inventory(&d);
    assert!(m.files.iter().any(|e| e.path == "green.json"));
}
