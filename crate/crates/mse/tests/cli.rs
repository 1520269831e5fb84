use std::io::Write;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mse").chain(args.iter().copied());
    let code = mse::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn estimate_reports_stepwise_point() {
    let v = json(&["estimate", "--data", "new_orleans", "--nboot", "0"]);
    assert_eq!(v["model"], serde_json::json!(["D:E"]));
    let est = v["estimate"].as_f64().unwrap();
    assert!((est - 1183.69).abs() < 0.01, "{est}");
    assert!(v["bootstrap"].is_null());
}

#[test]
fn fit_accepts_pairs_and_models() {
    let v = json(&["fit", "--data", "western", "--pairs", "A:E"]);
    assert!((v["estimate"].as_f64().unwrap() - 2483.38).abs() < 0.01);
    let main = json(&["fit", "--data", "new_orleans", "--model", "main"]);
    assert!((main["estimate"].as_f64().unwrap() - 996.66).abs() < 0.01);
    let coefs = main["coefficients"].as_array().unwrap();
    assert_eq!(coefs[0]["term"], "(intercept)");
    assert!(coefs.iter().all(|c| c["estimate"].is_number()));
    let (code, _, err) = run(&["fit", "--data", "western", "--pairs", "A:E", "--model", "full"]);
    assert_eq!(code, 1);
    assert!(err.contains("either --pairs or --model"));
}

#[test]
fn nonoverlapping_pairs_print_minus_infinity() {
    let v = json(&["fit", "--data", "uk", "--model", "full"]);
    let inf: Vec<&str> = v["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["estimate"] == "-inf")
        .map(|c| c["term"].as_str().unwrap())
        .collect();
    assert_eq!(inf, ["LA:GP", "LA:NCA"]);
}

#[test]
fn check_exit_codes_follow_verdict() {
    let (code, out, _) = run(&["check", "--data", "artificial3", "--pairs", "B:C"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdict"], "ok");
    assert_eq!(v["s_max"].as_f64().unwrap(), 3.0);

    let (code, out, _) = run(&["check", "--data", "artificial3", "--pairs", "A:B"]);
    assert_eq!(code, 2);
    assert!(out.contains("nonexistent_mle"));

    let (code, out, _) = run(&["check", "--data", "artificial3", "--model", "full"]);
    assert_eq!(code, 2);
    assert!(out.contains("unidentifiable"));

    let (code, _, err) = run(&["fit", "--data", "artificial3", "--pairs", "A:B"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error:"));
}

#[test]
fn check_all_lists_failures() {
    let (code, out, _) = run(&["check-all", "--data", "artificial3"]);
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["all_ok"], false);
    let models: Vec<Value> = v["failures"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["model"].clone())
        .collect();
    assert!(models.contains(&serde_json::json!(["A:B"])));

    let v = json(&["check-all", "--data", "uk"]);
    assert_eq!(v["all_ok"], true);
    assert_eq!(v["initial_sweep"], 4);
}

#[test]
fn stepwise_table_and_json() {
    let (code, out, _) = run(&["stepwise", "--data", "western"]);
    assert_eq!(code, 0);
    assert!(out.lines().next().unwrap().contains("candidate"));
    assert!(out.contains("A:E") && out.contains("add") && out.contains("stop"));
    assert!(out.contains("2483.38"));

    let v = json(&[
        "stepwise",
        "--data",
        "new_orleans",
        "--pthresh",
        "0.01",
        "--format",
        "json",
    ]);
    assert_eq!(v["trail"]["model"], serde_json::json!([]));
    assert!((v["estimate"].as_f64().unwrap() - 996.66).abs() < 0.01);
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["fit", "--data", "no_such_dataset"][..],
        &["stepwise", "--data", "western", "--pthresh", "1.5"],
        &["fit", "--data", "western", "--pairs", "A:Q"],
        &["bootstrap", "--data", "western", "--nboot", "0"],
        &["bootstrap", "--data", "western", "--levels", "1.2"],
        &["simulate", "deviance-qq", "--format", "table"],
        &["frobnicate"],
    ] {
        let (code, _, err) = run(args);
        assert_eq!(code, 1, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("check-all"));
}

#[test]
fn reads_csv_files() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(file, "A,B,C,count\n1,0,0,40\n0,1,0,30\n0,0,1,20\n1,1,0,6\n").unwrap();
    let path = file.path().to_str().unwrap();
    let v = json(&["check", "--data", path, "--pairs", "A:C,B:C"]);
    assert_eq!(v["s_max"].as_f64().unwrap(), 6.0);

    let (code, out, _) = run(&["datasets", "artificial3", "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out, "A,B,C,count\n1,0,0,40\n0,1,0,30\n0,0,1,20\n1,1,0,6\n");
}

#[test]
fn bootstrap_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dump = dir.path().join(format!("reps{threads}.txt"));
        let (code, out, err) = run(&[
            "bootstrap",
            "--data",
            "western",
            "--nboot",
            "120",
            "--seed",
            "7",
            "--threads",
            threads,
            "--dump-replicates",
            dump.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert!(err.contains("seed: 7"));
        let reps = std::fs::read_to_string(&dump).unwrap();
        assert_eq!(reps.lines().count(), 120);
        outputs.push((out, reps));
    }
    assert_eq!(outputs[0], outputs[1]);
    let v: Value = serde_json::from_str(&outputs[0].0).unwrap();
    assert_eq!(v["seed"], 7);
    assert_eq!(v["intervals"].as_array().unwrap().len(), 2);
}

#[test]
fn simulations_are_thread_independent() {
    let qq = |threads: &str| run(&["simulate", "deviance-qq", "--nsims", "300", "--threads", threads]);
    let (a, b) = (qq("1"), qq("4"));
    assert_eq!(a.0, 0);
    assert_eq!(a.1, b.1);
    assert!(a.1.starts_with("reduction,chi2_quantile\n"));

    let study = |threads: &str| {
        run(&[
            "simulate",
            "threshold-study",
            "--datasets",
            "western,uk5",
            "--nsims",
            "25",
            "--threads",
            threads,
        ])
    };
    let (a, b) = (study("1"), study("2"));
    assert_eq!(a.0, 0, "{}", a.2);
    assert_eq!(a.1, b.1);
    let lines: Vec<&str> = a.1.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("Mean,"));
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_mse");
    let status = Command::new(bin)
        .args(["check", "--data", "artificial3", "--pairs", "A:B,B:C"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let status = Command::new(bin).args(["datasets"]).output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stdout).contains("new_orleans"));
}
