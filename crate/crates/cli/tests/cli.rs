use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn shear(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shear")).args(args).output().unwrap()
}

fn shear_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shear")).args(args).env("SHEAR_THREADS", threads).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn cfe_of_three_sevenths() {
    let out = stdout(&shear(&["cfe", "3/7"]));
    assert_eq!(data_lines(&out), ["x,word,len,orbit,convergents", "3/7,\"[0;2,3]\",2,3/7 1/3,1/2 3/7"]);
    assert!(out.contains("# command=cfe\n"));
    assert!(out.contains(&format!("# version={}\n", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn orbit_measure_of_two_is_one_atom() {
    let out = stdout(&shear(&["orbit-measure", "--m", "2", "--mode", "orbit-uniform"]));
    let rows = data_lines(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("2,orbit_uniform,1/2,1,"));
}

#[test]
fn coprime_count_over_full_period() {
    let out = stdout(&shear(&["coprime", "--m", "15"]));
    assert_eq!(data_lines(&out)[1], "15,0,15,8,8,0,4,4,true");
}

#[test]
fn output_is_byte_identical_and_thread_independent() {
    let runs = [
        vec!["coprime", "--m", "2..=40", "--intervals", "20", "--seed", "9"],
        vec!["shear", "--n", "3", "--m", "31,37", "--spu", "300", "--seed", "4"],
        vec!["horocycle", "--t", "1,3", "--N", "3000", "--seed", "2", "--format", "json"],
        vec!["padic", "--primes", "3,5", "--pairs", "50", "--instances", "20"],
    ];
    for args in runs {
        let a = shear_env(&args, "1");
        let b = shear_env(&args, "1");
        let c = shear_env(&args, "3");
        assert_eq!(stdout(&a), stdout(&b), "{args:?}");
        assert_eq!(stdout(&a), stdout(&c), "{args:?} with 3 threads");
    }
}

#[test]
fn json_mirrors_csv() {
    let args = ["mirror", "--m", "5..=9"];
    let csv = stdout(&shear(&args));
    let json: Value = serde_json::from_str(&stdout(&shear(&[&args[..], &["--format", "json"]].concat()))).unwrap();
    let lines = data_lines(&csv);
    assert_eq!(lines[0], json["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect::<Vec<_>>().join(","));
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), lines.len() - 1);
    for (line, row) in lines[1..].iter().zip(rows) {
        let cells: Vec<String> = row.as_array().unwrap().iter().map(|v| v.to_string()).collect();
        assert_eq!(*line, cells.join(","));
    }
    for meta in csv.lines().filter_map(|l| l.strip_prefix("# ")) {
        let (k, v) = meta.split_once('=').unwrap();
        assert_eq!(json["metadata"][k], v);
    }
    assert_eq!(json["metadata"]["sign"], "+1");
}

#[test]
fn out_file_is_written_only_on_success() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfe.csv");
    let p = path.to_str().unwrap();
    let ok = shear(&["cfe", "2/5", "--out", p]);
    assert!(ok.status.success());
    assert!(std::fs::read_to_string(&path).unwrap().contains("[0;2,2]"));

    let bad = dir.path().join("bad.csv");
    let o = shear(&["cfe", "2/5", "5/2", "--out", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    assert!(!bad.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "stray temporary files");
}

#[test]
fn config_errors_exit_one() {
    for args in [
        vec!["cfe"],
        vec!["cfe", "1/0"],
        vec!["orbit-measure", "--m", "1"],
        vec!["coprime", "--m", "x"],
        vec!["shear", "--n", "1,2", "--m", "5,7,11"],
        vec!["padic", "--primes", "4"],
        vec!["nonsense"],
    ] {
        let o = shear(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?} printed output");
    }
    assert_eq!(shear_env(&["cfe", "1/2"], "0").status.code(), Some(1));
    assert_eq!(shear(&["--help"]).status.code(), Some(0));
}

fn checkpoint_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn checkpoints_resume_and_report_stored_violations() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().to_str().unwrap();
    let args = ["coprime", "--m", "6,7", "--intervals", "5", "--seed", "1", "--checkpoint-dir", ck];
    let first = stdout(&shear(&args));
    assert_eq!(checkpoint_files(dir.path()), ["coprime-6.json", "coprime-7.json"]);
    assert_eq!(stdout(&shear(&args)), first);

    // A stored unit is reused as is, so a recorded violation surfaces as exit 2.
    let path = dir.path().join("coprime-7.json");
    let mut v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    v["violations"] = serde_json::json!(["planted"]);
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    let o = shear(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("planted"));

    // A different seed does not reuse the stored units.
    let other = ["coprime", "--m", "6,7", "--intervals", "5", "--seed", "2", "--checkpoint-dir", ck];
    assert!(shear(&other).status.success());
}
