use std::path::Path;
use std::process::{Command, Output};

fn gazeguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazeguard"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gazeguard(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_privatize_identify_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let private = dir.path().join("private.csv");
    let ids = dir.path().join("ids.csv");
    ok(&["synth", "--users", "4", "--trials", "2", "--duration", "20", "--seed", "3", "--out", p(&raw)]);
    ok(&[
        "privatize", "--input", p(&raw), "--mechanism", "spatial", "--l", "144", "--output", p(&private),
    ]);
    let text = std::fs::read_to_string(&private).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 2 * 20 * 72);

    ok(&["identify", "--query", p(&raw), "--reference", p(&raw), "--out", p(&ids)]);
    let report = std::fs::read_to_string(&ids).unwrap();
    assert!(report.starts_with("query_trial,reference_trial,user_id,predicted,correct"));

    let sweep = ok(&[
        "--jobs", "2", "sweep", "--input", p(&raw), "--mechanism", "gaussian", "--strengths", "1,20",
    ]);
    let lines: Vec<_> = sweep.lines().collect();
    assert_eq!(lines[0], "mechanism,strength,id_accuracy,aoi_f1");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("gaussian,1,"));
}

#[test]
fn validate_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.csv");
    // Gaze parked on the centre target for the whole schedule.
    let mut csv = String::from("user_id,trial_id,frame,timestamp_s,theta_deg,psi_deg\n");
    for i in 0..18 * 72 {
        csv.push_str(&format!("v,1,{i},{},0,0\n", i as f64 / 72.0));
    }
    std::fs::write(&rec, csv).unwrap();
    let out = ok(&["validate", "--recording", p(&rec)]);
    assert!(out.contains("mean"), "{out}");

    let bench = ok(&["bench", "--mechanism", "spatial", "--samples", "20000"]);
    assert!(bench.contains("spatial"), "{bench}");
}

#[test]
fn errors_name_their_class() {
    let out = gazeguard(&["privatize", "--input", "/nonexistent.csv", "--output", "/tmp/x.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[IoError]"));

    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    ok(&["synth", "--users", "2", "--trials", "2", "--duration", "10", "--out", p(&raw)]);
    let out = gazeguard(&["privatize", "--input", p(&raw), "--mechanism", "gaussian", "--output", "/tmp/x.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[InvalidParameter]"));
}
