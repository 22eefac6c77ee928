use std::path::Path;
use std::process::{Command, Output};

fn horolab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_horolab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const SMALL: [&str; 4] = ["-R", "6", "-D", "3"];

fn small<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = SMALL.to_vec();
    v.extend_from_slice(extra);
    v
}

#[test]
fn build_space_exports_manifest_and_edges() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = json(&horolab(dir.path(), &small(&["--export-space", "space.json", "build-space"])));
    assert_eq!(manifest["R"], 6);
    assert_eq!(manifest["D"], 3);
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("space.json")).unwrap()).unwrap();
    assert_eq!(written, manifest);
    let edges = std::fs::read_to_string(dir.path().join("space.json.edges")).unwrap();
    let mut lines = edges.lines();
    assert_eq!(lines.next().unwrap().parse::<u64>().unwrap(), manifest["vertex_count"].as_u64().unwrap());
    assert_eq!(lines.count() as u64, manifest["edge_count"].as_u64().unwrap());
}

#[test]
fn delta_on_a_free_group_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("free.json"), r#"{"rank": 2, "peripherals": []}"#).unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"name": "tree", "R": 6, "D": 1, "delta_samples": 80}"#).unwrap();
    let report = json(&horolab(dir.path(), &["--config", "cfg.json", "--presentation", "free.json", "estimate-delta"]));
    assert_eq!(report["delta"], 0);
    assert_eq!(report["kind"], "delta");
    let csv = std::fs::read_to_string(dir.path().join("tree.points.csv")).unwrap();
    assert_eq!(csv.lines().count(), 81);
    assert!(csv.starts_with("a,b,c,slimness,thinness,flags"));
    assert!(dir.path().join("tree.report.json").exists());
}

#[test]
fn identity_distortion_is_isometric() {
    let dir = tempfile::tempdir().unwrap();
    let report = json(&horolab(
        dir.path(),
        &small(&["--samples", "30", "distortion", "--mode", "qm", "--map", "identity"]),
    ));
    for side in ["forward", "inverse"] {
        assert!(report["fits"][side]["a"].as_f64().unwrap() <= 1.0 + 1e-9);
        assert!(report["fits"][side]["b"].as_f64().unwrap() <= 1e-9);
    }
    let csv = std::fs::read_to_string(dir.path().join("qm.points.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
}

#[test]
fn map_file_is_loaded() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("twist.json"),
        r#"{"images": {"a": "a", "b": "ba"}, "peripheral_match": [{"src": 0, "dst": 0, "power": 1, "conjugator": ""}]}"#,
    )
    .unwrap();
    let report = json(&horolab(
        dir.path(),
        &small(&["--samples", "20", "distortion", "--mode", "exit", "--map", "twist.json"]),
    ));
    assert_eq!(report["kind"], "exit-distortion");
    assert_eq!(report["fits"]["forward"]["n"], 20);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing_map = horolab(dir.path(), &small(&["distortion", "--mode", "qm"]));
    assert_eq!(missing_map.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_map.stderr).contains("map"));

    std::fs::write(dir.path().join("bad.json"), r#"{"R": "ten"}"#).unwrap();
    assert_eq!(horolab(dir.path(), &["--config", "bad.json", "exit-sets"]).status.code(), Some(2));

    std::fs::write(dir.path().join("crowded.json"), r#"{"pool_size": 5000, "threshold": 1}"#).unwrap();
    let starved = horolab(dir.path(), &small(&["--config", "crowded.json", "cross-ratio"]));
    assert_eq!(starved.status.code(), Some(3));
}

#[test]
fn compare_reports() {
    let dir = tempfile::tempdir().unwrap();
    json(&horolab(dir.path(), &small(&["--name", "a", "--samples", "20", "exit-sets"])));
    json(&horolab(dir.path(), &small(&["--name", "b", "--samples", "20", "cross-ratio", "--min-of-three"])));
    let same = json(&horolab(dir.path(), &["compare", "a.report.json", "a.report.json"]));
    assert_eq!(same["max_constant_drift"], 0.0);
    assert_eq!(same["exceeded"], false);
    let mismatch = horolab(dir.path(), &["compare", "a.report.json", "b.report.json"]);
    assert_eq!(mismatch.status.code(), Some(7));
}

#[test]
fn stability_reruns_at_a_larger_radius() {
    let dir = tempfile::tempdir().unwrap();
    let report = json(&horolab(
        dir.path(),
        &small(&["--samples", "20", "stability", "--kind", "exit-sets", "--compare-radius", "7"]),
    ));
    assert_eq!(report["kind"], "stability");
    let csv = std::fs::read_to_string(dir.path().join("stability.points.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("C1,")));
}

#[test]
fn runs_are_reproducible_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = json(&horolab(dir.path(), &small(&["--name", "one", "--samples", "25", "cross-ratio"])));
    let mut b = json(&horolab(dir.path(), &small(&["--name", "one", "--samples", "25", "--jobs", "3", "cross-ratio"])));
    for r in [&mut a, &mut b] {
        r["wall_clock_seconds"] = 0.into();
        r["config"]["jobs"] = 0.into();
    }
    assert_eq!(a, b);
}
