use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ri(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ri")).current_dir(root()).arg("--out").arg(out).args(args).output().unwrap()
}

fn json(p: PathBuf) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn coproduct_of_worked_example() {
    let d = tempfile::tempdir().unwrap();
    let o = ri(d.path(), &["coproduct", "(O() K(H()))", "--rule", "configs/pam3d.json", "--eps", "1/100", "--p", "inf"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(d.path().join("coproduct.json"));
    assert_eq!(v["terms"].as_array().unwrap().len(), 2);
    let o = ri(d.path(), &["coproduct", "(O() K(H()))", "--rule", "configs/pam3d.json", "--eps", "1/100", "--p", "5"]);
    assert!(o.status.success());
    assert_eq!(json(d.path().join("coproduct.json"))["terms"].as_array().unwrap().len(), 5);
    let m = json(d.path().join("manifest.json"));
    assert_eq!(m["outputs"][0]["file"], "coproduct.json");
}

#[test]
fn errors_map_to_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(ri(d.path(), &["coproduct", "(Z())", "--rule", "configs/pam3d.json"]).status.code(), Some(1));
    assert_eq!(ri(d.path(), &["verify", "hopf", "configs/missing.json"]).status.code(), Some(1));
    let o = ri(d.path(), &["verify", "comparison", "configs/numeric_3d.json", "--tol=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("verification failed"));
}

#[test]
fn sector_and_phase() {
    let d = tempfile::tempdir().unwrap();
    assert!(ri(d.path(), &["sector", "gen", "configs/rule2d.json"]).status.success());
    let s = json(d.path().join("sector.json"));
    assert!(s.is_object());
    assert!(ri(d.path(), &["phase", "configs/pam3d.json", "--eps", "0"]).status.success());
    let v: serde_json::Value = serde_json::from_slice(&ri(d.path(), &["phase", "configs/pam3d.json", "--eps", "0"]).stdout).unwrap();
    assert!(v["epsilon0"].is_null());
    assert!(v["epsilon0Error"].as_str().unwrap().contains("genericity"));
    assert_eq!(v["I_eps"], serde_json::json!(["3/1", "6/1", "inf"]));
}

#[test]
fn algebraic_verifiers() {
    let d = tempfile::tempdir().unwrap();
    assert!(ri(d.path(), &["verify", "hopf", "configs/rule2d.json"]).status.success());
    assert!(ri(d.path(), &["verify", "triangularity", "configs/rule2d.json"]).status.success());
    let good = d.path().join("c.json");
    std::fs::write(&good, r#"{"(O() K(O()))": "1/2"}"#).unwrap();
    let o = ri(d.path(), &["prep", "verify", good.to_str().unwrap(), "--rule", "configs/rule2d.json"]);
    assert!(o.status.success());
    let bad = d.path().join("bad.json");
    std::fs::write(&bad, r#"{"(O())": "1/2"}"#).unwrap();
    let o = ri(d.path(), &["prep", "verify", bad.to_str().unwrap(), "--rule", "configs/rule2d.json"]);
    assert_eq!(o.status.code(), Some(1));
}
