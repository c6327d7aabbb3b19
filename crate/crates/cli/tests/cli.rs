use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qbohm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbohm")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn lists_all_experiments() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbohm(&["list-experiments"], dir.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["evolve", "trajectories", "relax", "rankine", "clebsch-check"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn rankine_run_writes_profile_orbits_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "rankine", "--n", "1", "--eps", "3.0", "--xi0", "1.0", "--tau-max", "8", "--d-tau", "1e-3", "--output-dir", "out"];
    let out = qbohm(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let base = dir.path().join("out");
    let profile = fs::read_to_string(base.join("rankine_profile.csv")).unwrap();
    assert!(profile.starts_with("tau,G,W,U_eff\n"));
    assert_eq!(profile.lines().count(), 8002);
    let traj = fs::read_to_string(base.join("rankine_traj.csv")).unwrap();
    assert!(traj.starts_with("trajectory_id,t,x,y\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(base.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["experiment"], "rankine");
    assert_eq!(manifest["results"]["derived"]["n_prime"], 1.0);
    assert!(manifest["results"]["bessel_match"]["residual"].as_f64().unwrap() < 1e-6);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);

    let out = qbohm(&["verify", "out/manifest.json", "--rerun"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(base.join("rankine_traj.csv"), traj.replacen("0,", "1,", 1)).unwrap();
    let out = qbohm(&["verify", "out/manifest.json"], dir.path());
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rankine_traj.csv"));
}

#[test]
fn unknown_key_is_rejected_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"experiment": "rankine", "parameters": {"eps": 3.0, "epsilon": 1.0}, "output_dir": "out"}"#,
    )
    .unwrap();
    let out = qbohm(&["run", "--config", "cfg.json"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
    assert!(!dir.path().join("out").exists());

    fs::write(dir.path().join("top.json"), r#"{"experiment": "rankine", "sede": 1}"#).unwrap();
    assert_eq!(code(&qbohm(&["run", "--config", "top.json"], dir.path())), 2);
    assert_eq!(code(&qbohm(&["run", "rankine", "--eps", "-1", "--output-dir", "neg"], dir.path())), 2);
    assert!(!dir.path().join("neg").exists());
}

#[test]
fn relax_needs_a_seed_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["run", "relax", "--modes", "4x4", "--n-traj", "3000", "--cells", "16x16", "--t-end", "0.4", "--outputs", "2"];
    assert_eq!(code(&qbohm(&base, dir.path())), 2);
    let mut a = base.to_vec();
    a.extend(["--seed", "7", "--output-dir", "a"]);
    let out = qbohm(&a, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut b = base.to_vec();
    b.extend(["--seed", "7", "--output-dir", "b"]);
    assert_eq!(code(&qbohm(&b, dir.path())), 0);
    let ra = fs::read(dir.path().join("a/relaxation.csv")).unwrap();
    let rb = fs::read(dir.path().join("b/relaxation.csv")).unwrap();
    assert_eq!(ra, rb);
    let text = String::from_utf8(ra).unwrap();
    assert!(text.starts_with("t,H,KS,captured_count\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn config_file_with_flag_override_and_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("traj.json"),
        r#"{
  "experiment": "trajectories",
  "parameters": {
    "field": {"kind": "point-vortex", "winding": 1, "mass": 1.0},
    "starts": [[1.0, 0.0], [2.0, 0.0]],
    "t_end": 1.0,
    "dt": 0.01
  },
  "output_dir": "t"
}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qbohm"))
        .args(["run", "--config", "traj.json", "--record-every", "10"])
        .env("QBOHM_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("t/trajectories.csv")).unwrap();
    assert!(csv.starts_with("trajectory_id,t,q_1,q_2,status\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 11);

    let bad = Command::new(env!("CARGO_BIN_EXE_qbohm"))
        .args(["list-experiments"])
        .env("QBOHM_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn failed_checks_exit_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let ok = qbohm(&["run", "clebsch-check", "--seed", "5", "--output-dir", "ok"], dir.path());
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let strict = qbohm(&["run", "clebsch-check", "--seed", "5", "--tolerance", "1e-300", "--output-dir", "strict"], dir.path());
    assert_eq!(code(&strict), 3);
    let report = fs::read_to_string(dir.path().join("strict/clebsch_check.csv")).unwrap();
    assert!(report.contains(",false"));
}

#[test]
fn evolve_reports_dispersion() {
    let dir = tempfile::tempdir().unwrap();
    let out = qbohm(&["run", "evolve", "--steps", "1000", "--record-every", "500", "--output-dir", "e"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("e/evolve_moments.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let var: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!((var - 1.25).abs() < 1e-3, "{var}");
    assert!(dir.path().join("e/psi_final.json").exists());
}
