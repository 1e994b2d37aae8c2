//! Drives the installed binary end to end: exit codes, file layout, manifest
//! embedding, and byte-level determinism across working directories.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csp2nn"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(dir: &Path, rel: &str) -> String {
    fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("reading {rel}: {e}"))
}

#[test]
fn missing_required_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["gen", "--mode", "planted", "--k", "3"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn conflicting_reduce_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "reduce", "--target", "fc-normal", "--sample", "x.txt", "--mode", "planted",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mutually exclusive"));
}

#[test]
fn gen_planted_emits_realizable_sample_filter_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "gen", "--mode", "planted", "--nvars", "20", "--k", "2", "--seed", "7", "--out",
            "g", "--prefix", "run",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("provenance realizable"));

    let sample = read(dir.path(), "g/run.sample.txt");
    assert!(sample.starts_with("# manifest {"));
    let formula = read(dir.path(), "g/run.formula.txt");
    assert!(formula.contains("c planted "));
    assert!(dir.path().join("g/run.filter.txt").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "g/run.manifest.json")).unwrap();
    assert_eq!(manifest["subcommand"], "gen");
    assert_eq!(manifest["params"]["mode"], "planted");
    assert!(manifest["argv"].as_array().unwrap().len() >= 10);
}

#[test]
fn gen_random_is_scattered_and_skips_the_filter_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "gen", "--mode", "random", "--nvars", "20", "--k", "2", "--seed", "3", "--out",
            "g",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("provenance scattered"));
    assert!(!dir.path().join("g/run.filter.txt").exists());
}

#[test]
fn gen_sat_route_writes_the_source_formula() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "gen", "--mode", "planted", "--nvars", "20", "--k", "2", "--groups", "20",
            "--route", "sat", "--sat-clauses", "2000", "--seed", "11", "--out", "g",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sat = read(dir.path(), "g/run.sat.txt");
    assert!(sat.contains("p cnf 20 2000"));
    assert!(dir.path().join("g/run.sample.txt").exists());
}

#[test]
fn full_reduce_run_exits_0_and_reports_realizable() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "reduce", "--target", "fc-normal", "--mode", "planted", "--nvars", "12", "--k",
            "1", "--groups", "30", "--seed", "5", "--out", "o",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("verdict: ok"), "{text}");
    assert!(text.contains("realizability: residual"));
    for f in [
        "o/run.sat.txt",
        "o/run.formula.txt",
        "o/run.gadget.sample.txt",
        "o/run.reduced.sample.txt",
        "o/run.weights.txt",
        "o/run.chain.bin",
        "o/run.report.json",
        "o/run.manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "o/run.report.json")).unwrap();
    assert_eq!(report["realizability"]["realizable"], true);
    assert_eq!(report["realizability"]["labels_exact"], true);
}

#[test]
fn identical_invocations_are_byte_identical_across_directories() {
    let args = [
        "reduce",
        "--target",
        "fc-gaussian",
        "--cov",
        "ar1:0.4",
        "--mode",
        "planted",
        "--nvars",
        "12",
        "--k",
        "1",
        "--groups",
        "30",
        "--seed",
        "21",
        "--out",
        "o",
        "--csv",
        "o/run.norms.csv",
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_in(a.path(), &args)), 0);
    assert_eq!(code(&run_in(b.path(), &args)), 0);

    let mut names: Vec<String> = fs::read_dir(a.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 9, "{names:?}");
    for name in names {
        let lhs = fs::read(a.path().join("o").join(&name)).unwrap();
        let rhs = fs::read(b.path().join("o").join(&name)).unwrap();
        assert_eq!(lhs, rhs, "{name} differs between runs");
    }
}

#[test]
fn impossible_cond_cap_exits_1_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "reduce", "--target", "fc-normal", "--mode", "random", "--nvars", "12", "--k",
            "1", "--groups", "30", "--max-cond", "1.0001", "--retry-cap", "4", "--seed", "9",
            "--out", "o",
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("stage transform: FAILED"));
    let report: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "o/run.report.json")).unwrap();
    let stages = report["stages"].as_array().unwrap();
    assert!(stages
        .iter()
        .any(|s| s["stage"] == "transform" && s["status"].get("Failed").is_some()));
    assert!(!dir.path().join("o/run.reduced.sample.txt").exists());
}

#[test]
fn gen_reduce_verify_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run_in(
        dir.path(),
        &[
            "gen", "--mode", "planted", "--nvars", "20", "--k", "2", "--seed", "7", "--out",
            "g",
        ],
    );
    assert_eq!(code(&gen), 0);

    let reduce = run_in(
        dir.path(),
        &[
            "reduce", "--target", "cnn-uniform", "--sample", "g/run.sample.txt", "--filter",
            "g/run.filter.txt", "--seed", "2", "--out", "r",
        ],
    );
    assert_eq!(code(&reduce), 0, "{}", String::from_utf8_lossy(&reduce.stderr));

    let verify = run_in(
        dir.path(),
        &[
            "verify", "realizable", "--sample", "r/run.reduced.sample.txt", "--weights",
            "r/run.weights.txt", "--json", "v.json",
        ],
    );
    assert_eq!(code(&verify), 0, "{}", String::from_utf8_lossy(&verify.stderr));
    assert!(stdout(&verify).contains("pass"));

    let dist = run_in(
        dir.path(),
        &[
            "verify", "distribution", "--weights", "r/run.weights.txt", "--family",
            "iid-uniform",
        ],
    );
    assert_eq!(code(&dist), 0, "{}", stdout(&dist));
}

#[test]
fn verify_realizable_fails_on_mismatched_weights() {
    let dir = tempfile::tempdir().unwrap();
    let planted = run_in(
        dir.path(),
        &[
            "gen", "--mode", "planted", "--nvars", "20", "--k", "2", "--seed", "7", "--out",
            "p",
        ],
    );
    assert_eq!(code(&planted), 0);
    let random = run_in(
        dir.path(),
        &[
            "gen", "--mode", "random", "--nvars", "20", "--k", "2", "--seed", "3", "--out",
            "s",
        ],
    );
    assert_eq!(code(&random), 0);

    let scattered = run_in(
        dir.path(),
        &["verify", "scattered", "--sample", "s/run.sample.txt"],
    );
    assert_eq!(code(&scattered), 0, "{}", stdout(&scattered));

    let wrong = run_in(
        dir.path(),
        &[
            "verify", "realizable", "--sample", "s/run.sample.txt", "--weights",
            "p/run.filter.txt",
        ],
    );
    assert_eq!(code(&wrong), 1);
    assert!(stdout(&wrong).contains("FAIL"));
}

#[test]
fn smin_tail_writes_csv_and_json_and_honors_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "verify", "smin-tail", "--family", "iid-normal", "--nvars", "8", "--k", "4",
            "--trials", "100", "--seed", "1", "--csv", "tail.csv", "--json", "tail.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("exceedance"));

    let csv = read(dir.path(), "tail.csv");
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# manifest {"));
    assert_eq!(lines.next().unwrap(), "trial,smin");
    assert_eq!(lines.count(), 100);

    let doc: serde_json::Value = serde_json::from_str(&read(dir.path(), "tail.json")).unwrap();
    assert_eq!(doc["tail"]["trials"], 100);

    // Exceedance can never beat a bound of zero unless no trial fell below.
    let bound = run_in(
        dir.path(),
        &[
            "verify", "smin-tail", "--family", "iid-normal", "--nvars", "8", "--k", "4",
            "--trials", "100", "--seed", "1", "--exceedance-bound", "1.0",
        ],
    );
    assert_eq!(code(&bound), 0);
}

#[test]
fn distinguish_memorizing_reports_scattered() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run_in(
        dir.path(),
        &[
            "gen", "--mode", "random", "--nvars", "20", "--k", "2", "--groups", "300",
            "--seed", "13", "--out", "g",
        ],
    );
    assert_eq!(code(&gen), 0);

    let out = run_in(
        dir.path(),
        &[
            "verify", "distinguish", "--learner", "memorizing", "--sample",
            "g/run.sample.txt", "--budget", "10", "--json", "d.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("verdict: scattered"), "{}", stdout(&out));

    let rendered = run_in(dir.path(), &["report", "--input", "d.json"]);
    assert_eq!(code(&rendered), 0);
    assert!(stdout(&rendered).contains("verdict: scattered"));
}

#[test]
fn report_renders_saved_documents_and_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run_in(
        dir.path(),
        &[
            "gen", "--mode", "planted", "--nvars", "20", "--k", "2", "--seed", "7", "--out",
            "g",
        ],
    );
    assert_eq!(code(&gen), 0);
    let verify = run_in(
        dir.path(),
        &[
            "verify", "realizable", "--sample", "g/run.sample.txt", "--weights",
            "g/run.filter.txt", "--json", "v.json",
        ],
    );
    assert_eq!(code(&verify), 0);

    let table = run_in(dir.path(), &["report", "--input", "v.json", "--csv", "v.csv"]);
    assert_eq!(code(&table), 0);
    assert!(stdout(&table).contains("realizable"));
    let csv = read(dir.path(), "v.csv");
    assert!(csv.starts_with("test,outcome,statistic,p_value,sample_size,threshold,note"));
    assert!(csv.contains("realizable,pass"));

    let reduce = run_in(
        dir.path(),
        &[
            "reduce", "--target", "cnn-sphere", "--radius", "2", "--sample",
            "g/run.sample.txt", "--filter", "g/run.filter.txt", "--seed", "4", "--out", "r",
        ],
    );
    assert_eq!(code(&reduce), 0);
    let rendered = run_in(dir.path(), &["report", "--input", "r/run.report.json"]);
    assert_eq!(code(&rendered), 0);
    assert!(stdout(&rendered).contains("verdict: ok"));
    assert!(stdout(&rendered).contains("norm 2.0"));

    let rejected = run_in(
        dir.path(),
        &["report", "--input", "r/run.report.json", "--csv", "x.csv"],
    );
    assert_eq!(code(&rejected), 1);
}

#[test]
fn replaying_a_manifest_argv_reproduces_outputs_bitwise() {
    let first = tempfile::tempdir().unwrap();
    let out = run_in(
        first.path(),
        &[
            "reduce", "--target", "cnn-bernoulli", "--radius", "0.5", "--mode", "planted",
            "--nvars", "12", "--k", "1", "--groups", "40", "--seed", "4", "--out", "o",
        ],
    );
    assert_eq!(code(&out), 0);

    let manifest: serde_json::Value =
        serde_json::from_str(&read(first.path(), "o/run.manifest.json")).unwrap();
    let argv: Vec<String> = manifest["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();

    let replay = tempfile::tempdir().unwrap();
    let args: Vec<&str> = argv.iter().map(String::as_str).collect();
    assert_eq!(code(&run_in(replay.path(), &args)), 0);

    for entry in fs::read_dir(first.path().join("o")).unwrap() {
        let name = entry.unwrap().file_name();
        let lhs = fs::read(first.path().join("o").join(&name)).unwrap();
        let rhs = fs::read(replay.path().join("o").join(&name)).unwrap();
        assert_eq!(lhs, rhs, "{name:?} differs after replay");
    }
}
