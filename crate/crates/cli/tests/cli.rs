use std::path::Path;
use std::process::{Command, Output};

fn curvflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curvflow")).args(args).current_dir(dir).output().unwrap()
}

const ALPHA: &str = r#"
experiment = "alpha-growth"
n = 3
seed = 9
dt = 0.01
horizon = 0.5
replicas = 200
"#;

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.toml"), ALPHA).unwrap();
    for out in ["one", "two"] {
        let o = curvflow(&["run", "a.toml", "--out", out], dir.path());
        assert!(o.status.code().unwrap() == 0 || o.status.code().unwrap() == 3, "{o:?}");
    }
    for f in ["series.csv", "report.json", "plot.dat"] {
        let a = std::fs::read(dir.path().join("one").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("two").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let csv = std::fs::read_to_string(dir.path().join("one/series.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "t,ensemble_mean,std_error,alive");
    assert_eq!(csv.lines().count(), 2 + 21);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("one/report.json")).unwrap()).unwrap();
    assert_eq!(r["schema"], "curvflow.report/1");
    assert_eq!(r["provenance"]["seed"], 9);
    assert_eq!(r["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(r["rate"]["predicted_exact"], "4/15");
}

#[test]
fn config_out_key_is_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("cfg")).unwrap();
    std::fs::write(dir.path().join("cfg/a.toml"), format!("out = \"res\"\n{ALPHA}")).unwrap();
    let o = curvflow(&["run", "cfg/a.toml"], dir.path());
    assert!(o.status.code().unwrap() != 2, "{o:?}");
    assert!(dir.path().join("cfg/res/report.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("bad.toml"), ALPHA.replace("replicas = 200", "replicas = 10")).unwrap();
    assert_eq!(curvflow(&["run", "bad.toml"], p).status.code(), Some(2));
    std::fs::write(p.join("typo.toml"), format!("{ALPHA}\nhorizn = 1.0\n")).unwrap();
    assert_eq!(curvflow(&["run", "typo.toml"], p).status.code(), Some(2));
    assert_eq!(curvflow(&["run", "missing.toml"], p).status.code(), Some(1));
    // negative Gauss curvature: the ensemble mean of the product is negative and cannot be fitted
    let neg = "experiment = \"trace-growth\"\nk = 2\nseed = 1\ndt = 0.01\nhorizon = 0.5\nreplicas = 100\n\
               [preset]\nkind = \"curvatures\"\nvalues = [1.0, -1.0]\n";
    std::fs::write(p.join("neg.toml"), neg).unwrap();
    let o = curvflow(&["run", "neg.toml"], p);
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    assert_eq!(curvflow(&["frobnicate"], p).status.code(), Some(2));
}

#[test]
fn fixtures_round_trip_through_lk_and_tube() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = curvflow(&["fixtures", "icosphere", "--level", "3", "--output", "s.off"], p);
    assert!(o.status.success(), "{o:?}");
    let o = curvflow(&["lk", "s.off"], p);
    let lk: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(lk["convention"], "tube-normalized");
    assert!((lk["L"][0].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(lk["genus"], 0);
    let o = curvflow(&["tube", "s.off", "--rho", "0.1", "--samples", "200000"], p);
    assert!(o.status.success(), "{o:?}");
    let t: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let v = t["volume"].as_f64().unwrap();
    assert!((v - 2.5216).abs() < 0.1, "{v}");
    let o = curvflow(&["tube", "s.off", "--rho", "0.6"], p);
    assert_eq!(o.status.code(), Some(2), "radius above half the reach");

    let o = curvflow(&["fixtures", "polygon", "--vertices", "64"], p);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 64);
    let o = curvflow(&["fixtures", "polygon", "--vertices", "4"], p);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn audit_noise_uses_the_config_spectral_measure() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cfg = format!(
        "{ALPHA}\n[spectral]\nkind = \"point\"\nrho = 2.0\n\n[audit]\ndims = [2, 3]\noracle_samples = 20000\n\
         trace_samples = 1000\ncontraction_samples = 20000\nindependence_samples = 20000\nisotropy_rotations = 3\n\
         quadrature_nodes = 5000\n"
    );
    std::fs::write(p.join("a.toml"), cfg.replace("alpha-growth", "noise-audit")).unwrap();
    let o = curvflow(&["audit-noise", "a.toml", "--out", "audit"], p);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("audit/report.json")).unwrap()).unwrap();
    assert_eq!(r["experiment"], "noise-audit");
    assert!(r["checks"].as_array().unwrap().len() >= 8);
    assert_eq!(o.status.code(), Some(if r["passed"].as_bool().unwrap() { 0 } else { 3 }));
}
