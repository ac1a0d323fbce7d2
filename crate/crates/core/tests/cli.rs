use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flowlab::{DyadicBrownianPath, DriftSpec};
use serde_json::Value;

fn flowlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("FLOWLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn zero_drift_moments_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowlab(
        &["run", "--experiment", "verify-moments", "--drift", "zero", "--a", "4", "--seeds", "100", "--check", "--out", "o"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json_file(&dir.path().join("o/verify-moments.summary.json"));
    let c = s["summary"]["estimate"]["fitted_C"].as_f64().unwrap();
    assert!(c < 1.0, "fitted_C = {c}");
}

#[test]
fn hypothesis_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"experiment": "verify-defect", "drift.id": "holder:0.2,0.1,1", "drift.truncation": 4, "drift.q1": 3, "drift.q2": 3}"#,
    )
    .unwrap();
    let o = flowlab(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("β/p₁ + 1/p₂ > 1"), "{}", stderr(&o));
    // nothing simulated or written
    assert!(!dir.path().join("o").exists());
}

#[test]
fn config_errors_exit_1_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"experiment": "gen-path", "levels.nope": 1}"#, "levels.nope"),
        (r#"{"experiment": "gen-path", "seeds.count": "many"}"#, "seeds.count"),
        (r#"{"experiment": "teleport"}"#, "experiment"),
        (r#"{"experiment": "verify-kolmogorov", "kolmogorov.oracle": "psychic", "seeds.count": 2}"#, "kolmogorov.oracle"),
        (r#"[1, 2]"#, "config"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let p = dir.path().join(format!("c{i}.json"));
        fs::write(&p, text).unwrap();
        let o = flowlab(&["run", "--config", p.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(stderr(&o).contains(key), "{text}: {}", stderr(&o));
    }
    let o = flowlab(&["run", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = flowlab(&["run", "--experiment", "gen-path", "--set", "seeds.count=0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("seeds.count"));
}

#[test]
fn failed_check_exits_3_only_with_check() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--experiment", "verify-uniqueness", "--seeds", "3", "--set", "gap.m_fine=12", "--set", "gap.m_min=7"];
    // m_max = 12 would need m_fine >= 16; use a shorter ladder with a strict theta demand
    let mut with = args.to_vec();
    with.extend(["--set", "gap.m_max=8", "--out", "o"]);
    let o = flowlab(&with, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = json_file(&dir.path().join("o/run_record.json"));
    let passed = rec["passed"].as_bool().unwrap();
    with.push("--check");
    let o = flowlab(&with, dir.path());
    assert_eq!(o.status.code(), Some(if passed { 0 } else { 3 }));

    // too few levels for the oracle's exponent window: fails its checks
    let o = flowlab(
        &["run", "--experiment", "verify-kolmogorov", "--seeds", "20", "--set", "levels.n_max=6", "--check", "--out", "k"],
        dir.path(),
    );
    let rec = json_file(&dir.path().join("k/run_record.json"));
    assert!(!rec["passed"].as_bool().unwrap());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn outputs_embed_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowlab(&["run", "--experiment", "verify-uniqueness", "--seeds", "4", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rec = json_file(&dir.path().join("o/run_record.json"));
    let hash = rec["config_hash"].as_str().unwrap().to_owned();
    assert_eq!(hash.len(), 16);
    let csv = fs::read_to_string(dir.path().join("o/verify-uniqueness.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# flowlab verify-uniqueness config={hash}"));
    let jsonl = fs::read_to_string(dir.path().join("o/verify-uniqueness.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 4);
    for line in jsonl.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["config_hash"], hash.as_str());
        assert_eq!(v["schema"], 1);
    }
    let summary = json_file(&dir.path().join("o/verify-uniqueness.summary.json"));
    assert_eq!(summary["config_hash"], hash.as_str());
    assert!(rec["wall_time_s"].as_f64().is_some());

    // a different output directory does not change the hash; a different seed base does
    let o = flowlab(&["run", "--experiment", "verify-uniqueness", "--seeds", "4", "--out", "p"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_file(&dir.path().join("p/run_record.json"))["config_hash"], hash.as_str());
    assert_eq!(
        fs::read(dir.path().join("o/verify-uniqueness.jsonl")).unwrap(),
        fs::read(dir.path().join("p/verify-uniqueness.jsonl")).unwrap()
    );
    let o = flowlab(
        &["run", "--experiment", "verify-uniqueness", "--seeds", "4", "--base-seed", "9", "--out", "q"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(json_file(&dir.path().join("q/run_record.json"))["config_hash"], hash.as_str());
}

#[test]
fn summarize_merges_groups_and_checks_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (out, base) in [("a", "0"), ("b", "100")] {
        let o = flowlab(
            &["run", "--experiment", "verify-uniqueness", "--seeds", "3", "--base-seed", base, "--out", out],
            d,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = flowlab(&["run", "--experiment", "gen-path", "--seeds", "2", "--m", "6", "--out", "g"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    // one file: metrics echoed
    let one = d.join("one.jsonl");
    let first = fs::read_to_string(d.join("a/verify-uniqueness.jsonl")).unwrap();
    fs::write(&one, first.lines().next().unwrap()).unwrap();
    let o = flowlab(&["summarize", "one.jsonl", "--out", "one.json"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = json_file(&d.join("one.json"));
    let rec: Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let section = &rep["experiments"]["verify-uniqueness"];
    assert_eq!(section["records"], 1);
    for (k, v) in rec["metrics"].as_object().unwrap() {
        let m = &section["metrics"][k];
        assert_eq!(m["count"], 1);
        for q in ["min", "p10", "p50", "p90", "max", "mean"] {
            assert_eq!(m[q].as_f64(), v.as_f64(), "{k} {q}");
        }
    }

    // two runs with different base seeds: doubled counts
    let o = flowlab(&["summarize", "a/*.jsonl", "b/*.jsonl", "--out", "two.json"], d);
    assert_eq!(o.status.code(), Some(0));
    let rep = json_file(&d.join("two.json"));
    let section = &rep["experiments"]["verify-uniqueness"];
    assert_eq!(section["records"], 6);
    assert_eq!(section["distinct_seeds"], 6);
    assert_eq!(section["metrics"]["sup_gap.m=6"]["count"], 6);

    // mixed experiments: one section each, sorted
    let o = flowlab(&["summarize", "*/*.jsonl"], d);
    assert_eq!(o.status.code(), Some(0));
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    let names: Vec<&String> = rep["experiments"].as_object().unwrap().keys().collect();
    assert_eq!(names, ["gen-path", "verify-uniqueness"]);
    assert_eq!(rep["experiments"]["gen-path"]["records"], 2);
    let again = flowlab(&["summarize", "*/*.jsonl"], d);
    assert_eq!(again.stdout, o.stdout);

    // schema mismatch
    fs::write(d.join("old.jsonl"), r#"{"schema": 0, "experiment": "x", "config_hash": "h", "seed": 1, "metrics": {}}"#)
        .unwrap();
    let o = flowlab(&["summarize", "old.jsonl"], d);
    assert_eq!(o.status.code(), Some(4));
    let o = flowlab(&["summarize", "nothing-*.jsonl"], d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gen_path_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowlab(&["run", "--experiment", "gen-path", "--seeds", "2", "--base-seed", "5", "--m", "7", "--dim", "2", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for seed in [5u64, 6] {
        let bytes = fs::read(dir.path().join(format!("o/paths/seed-{seed}.flbm"))).unwrap();
        let read = DyadicBrownianPath::read_from(&bytes[..]).unwrap();
        let direct = DyadicBrownianPath::generate(seed, 2, 1.0, 7).unwrap();
        assert_eq!(read.values(), direct.values());
    }
    let csv = fs::read_to_string(dir.path().join("o/gen-path.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "seed,t_num,t_level,w0,w1");
    assert_eq!(csv.lines().count(), 2 + 2 * 129);
}

#[test]
fn run_flow_writes_readable_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowlab(
        &["run", "--experiment", "run-flow", "--seeds", "1", "--m", "8", "--n", "3", "--set", "flow.half_width=4", "--check", "--out", "o"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let f = fs::File::open(dir.path().join("o/run-flow.seed-0.csv")).unwrap();
    let table = flowlab::flow::FlowTable::read_csv(std::io::BufReader::new(f), &DriftSpec::sign(1, None)).unwrap();
    assert_eq!(table.num_points(), 9);
    let path = DyadicBrownianPath::generate(0, 1, 1.0, 8).unwrap();
    assert_eq!(table.max_residual(&path).unwrap(), 0.0);
}

#[test]
fn drift_command_echoes_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowlab(&["drift", "--drift", "holder:0.5,0.1,1", "--truncation", "4", "--q1", "6", "--q2", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let gamma = v["exponents"]["gamma"].as_f64().unwrap();
    assert!((gamma - 1.0 / 12.0).abs() < 1e-12);
    assert!((v["exponents"]["delta"].as_f64().unwrap() - gamma / 2.0).abs() < 1e-12);
    let o = flowlab(&["drift", "--drift", "holder:0.2,0.1,1", "--truncation", "4", "--q1", "3", "--q2", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn schema_dump_and_usage() {
    let dir = tempfile::tempdir().unwrap();
    let o = flowlab(&["--schema"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["csv"]["verify-oscillation"].as_str().unwrap().starts_with("j,l,seed"));
    assert_eq!(v["exit_codes"].as_object().unwrap().len(), 5);
    assert_eq!(flowlab(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(flowlab(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(flowlab(&[], dir.path()).status.code(), Some(1));
    let bad = Command::new(env!("CARGO_BIN_EXE_flowlab"))
        .args(["run", "--experiment", "gen-path"])
        .current_dir(dir.path())
        .env("FLOWLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
