use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CALIB: &str = "P2: 7.215377e+02 0 6.095593e+02 4.485728e+01 0 7.215377e+02 1.72854e+02 2.163791e-01 0 0 1 2.745884e-03\n";

fn dataset(dir: &Path) {
    fs::create_dir_all(dir.join("calib")).unwrap();
    fs::create_dir_all(dir.join("label")).unwrap();
    let frames = [
        (
            "000001",
            "Car 0 0 0 0 0 0 0 1.5 1.6 3.9 -3.0 1.65 12.0 0.3\n\
             Car 0 0 0 0 0 0 0 1.4 1.7 4.1 2.5 1.65 25.0 -1.2\n\
             DontCare -1 -1 -10 0 0 1 1 -1 -1 -1 -1000 -1000 -1000 -10\n",
        ),
        (
            "000002",
            "Car 0 0 0 0 0 0 0 1.6 1.6 3.9 1.0 1.65 35.0 1.5\n\
             Pedestrian 0 0 0 0 0 0 0 1.8 0.6 0.8 -1.0 1.65 9.0 0.0\n\
             Car 0 0 0 0 0 0 0 1.45 1.6 3.7 -4.0 1.65 18.0 2.9\n",
        ),
    ];
    for (id, labels) in frames {
        fs::write(dir.join("calib").join(format!("{id}.txt")), CALIB).unwrap();
        fs::write(dir.join("label").join(format!("{id}.txt")), labels).unwrap();
    }
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compdepth")).args(args).current_dir(dir).output().unwrap()
}

fn oracle(dir: &Path, noise: &[&str]) -> Output {
    let mut args = vec!["oracle", "--calib-dir", "calib", "--label-dir", "label", "--out", "p.jsonl", "--seed", "3"];
    args.extend_from_slice(noise);
    run(&args, dir)
}

#[test]
fn oracle_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path());
    let o = oracle(tmp.path(), &["--noise-h-rel", "0.1"]);
    assert!(matches!(o.status.code(), Some(0) | Some(3)), "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(tmp.path().join("p.jsonl")).unwrap();
    assert!(text.lines().any(|l| l == "# seed=3"));
    let records = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(records, 5, "DontCare is skipped");

    let e = run(
        &["eval", "--predictions", "p.jsonl", "--calib-dir", "calib", "--label-dir", "label", "--format", "json"],
        tmp.path(),
    );
    assert!(matches!(e.status.code(), Some(0) | Some(3)), "{}", String::from_utf8_lossy(&e.stderr));
    let v: serde_json::Value = serde_json::from_slice(&e.stdout).unwrap();
    let s = v.to_string();
    assert!(s.contains("key0") && s.contains("comp0"));

    let csv = run(&["eval", "--predictions", "p.jsonl", "--format", "csv"], tmp.path());
    let out = String::from_utf8(csv.stdout).unwrap();
    assert!(out.lines().any(|l| l == "metric,branch,partner,lower,upper,value,count,note"));
    assert!(out.lines().any(|l| l.starts_with("# command=eval")));
}

#[test]
fn reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path());
    let noise = ["--noise-h-rel", "0.05", "--noise-px", "1"];
    oracle(tmp.path(), &noise);
    let first = fs::read(tmp.path().join("p.jsonl")).unwrap();
    oracle(tmp.path(), &noise);
    assert_eq!(first, fs::read(tmp.path().join("p.jsonl")).unwrap());

    let lab = ["lab", "--mode", "disturb", "--n-objects", "500", "--seed", "9", "--format", "csv"];
    assert_eq!(run(&lab, tmp.path()).stdout, run(&lab, tmp.path()).stdout);
}

#[test]
fn lab_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let flip = run(&["lab", "--n-objects", "1000", "--branches", "b0,b1"], tmp.path());
    assert_eq!(flip.status.code(), Some(0), "{}", String::from_utf8_lossy(&flip.stderr));
    let v: serde_json::Value = serde_json::from_slice(&flip.stdout).unwrap();
    assert!(v.to_string().contains("b1"));

    let mf = run(&["lab", "--mode", "multiflip", "--n-objects", "1000", "--format", "csv"], tmp.path());
    let out = String::from_utf8(mf.stdout).unwrap();
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(rows[0].starts_with("k,mae,count"));
    assert_eq!(rows.len(), 6);

    let bad = run(&["lab", "--coupling-rate", "0.2"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
    let unknown = run(&["lab", "--branches", "nope"], tmp.path());
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn plane_on_flat_ground() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path());
    let p = run(
        &["plane", "--calib-dir", "calib", "--label-dir", "label", "--heatmap-dir", "maps", "--format", "csv"],
        tmp.path(),
    );
    assert!(matches!(p.status.code(), Some(0) | Some(3)), "{}", String::from_utf8_lossy(&p.stderr));
    assert!(tmp.path().join("maps").read_dir().unwrap().count() >= 1);
    let out = String::from_utf8(p.stdout).unwrap();
    assert!(out.contains("000001") && out.contains("000002"));
}

#[test]
fn input_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = run(&["eval", "--predictions", "nope.jsonl"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    fs::write(tmp.path().join("bad.jsonl"), "{\"frame\":\"a\",\"index\":0,\"branches\":[]}\n{oops\n").unwrap();
    let bad = run(&["eval", "--predictions", "bad.jsonl"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains('2'));

    dataset(tmp.path());
    fs::write(tmp.path().join("label/000002.txt"), "Car 0 0 0 0 0 0 0 1.5\n").unwrap();
    let o = oracle(tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}
