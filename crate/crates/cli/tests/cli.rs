use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stacked-minimal"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn catalog_piped_into_check_is_balanced() {
    let cat = bin().args(["config", "catalog", "twin-rPD"]).output().unwrap();
    assert!(cat.status.success());
    let mut child = bin().args(["config", "check", "-"]).stdin(Stdio::piped()).stdout(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(&cat.stdout).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(json(&out)["balanced"], true);
}

#[test]
fn unknown_catalog_name_is_a_usage_error() {
    let out = bin().args(["config", "catalog", "gyroid"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("rPD") && msg.contains("twin-rPD"), "{msg}");
}

#[test]
fn malformed_arguments_exit_two() {
    assert_eq!(bin().args(["hecke", "solve", "--tau", "0"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["surface", "solve", "missing.json", "--t", "0.01"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["hecke", "solve", "--tau", "-0.5,-1"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn bad_schema_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"tau": [0, 1]}"#).unwrap();
    assert_eq!(run(&["config", "check", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn hexagonal_hecke_count() {
    let out = bin().args(["hecke", "solve", "--tau", "0.5,0.8660254037844386", "--C", "0,0"]).output().unwrap();
    assert_eq!(json(&out)["count"], 5);
}

#[test]
fn atlas_csv_shape() {
    let out = bin().args(["hecke", "atlas", "--re", "0,0", "--im", "1,2", "--steps", "1,3"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau_re,tau_im,count");
    assert_eq!(lines.len(), 4);
    for l in &lines[1..] {
        let n: usize = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!((1..=5).contains(&n));
    }
}

#[test]
fn solve_then_mesh_rpd() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = run(&["config", "catalog", "rPD"], d);
    std::fs::write(d.join("rpd.json"), &cfg.stdout).unwrap();
    for name in ["a.json", "b.json"] {
        let o = run(&["surface", "solve", "rpd.json", "--t", "0.01", "--out", name], d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(d.join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.json")).unwrap());
    let state: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(state["report"]["final_residual"].as_f64().unwrap() < 1e-9);

    let o = run(&["surface", "mesh", "a.json", "--layers", "-1..2", "--copies", "2", "--out", "m.obj", "--grid", "24", "--rings", "4", "--spokes", "16"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("m.obj.json")).unwrap()).unwrap();
    let heights: Vec<f64> = side["frames"].as_array().unwrap().iter().map(|f| f["position"][2].as_f64().unwrap()).collect();
    assert_eq!(heights.len(), 4);
    assert!(heights.windows(2).all(|w| w[1] > w[0]), "{heights:?}");
    let obj = std::fs::read_to_string(d.join("m.obj")).unwrap();
    let nv = obj.lines().filter(|l| l.starts_with("v ")).count();
    assert_eq!(nv as u64, side["vertex_count"].as_u64().unwrap());
    assert!(!d.join("m.obj.tmp").exists());
}
