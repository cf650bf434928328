use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn prefusion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prefusion"))
        .args(args)
        .env_remove("CI")
        .stdin(Stdio::null())
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = prefusion(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path, count: &str, seed: &str) -> std::path::PathBuf {
    let p = dir.join(format!("corpus-{count}-{seed}.ndjson"));
    ok(&[
        "gen-corpus",
        "--count",
        count,
        "--events",
        "2",
        "--frame-size",
        "8",
        "--seed",
        seed,
        "-o",
        path(&p),
    ]);
    p
}

fn event_of(report: &Value) -> String {
    report["source"].as_str().unwrap().to_owned()
}

#[test]
fn gen_corpus_is_deterministic_per_seed() {
    let a = ok(&["gen-corpus", "--count", "20", "--seed", "4"]);
    let b = ok(&["gen-corpus", "--count", "20", "--seed", "4"]);
    let c = ok(&["gen-corpus", "--count", "20", "--seed", "5"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(lines(&a).len(), 20);
}

#[test]
fn exit_codes_follow_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    // Validation: K below 2 and an unknown flag.
    assert_eq!(prefusion(&["bench", "--k", "1", "--runs", "1"]).status.code(), Some(1));
    assert_eq!(prefusion(&["bench", "--bogus"]).status.code(), Some(1));
    assert_eq!(prefusion(&["--help"]).status.code(), Some(0));
    // I/O: missing input file.
    let missing = dir.path().join("missing.ndjson");
    assert_eq!(
        prefusion(&["cluster", "--input", path(&missing), "--k", "2"])
            .status
            .code(),
        Some(3)
    );
    // No convergence: a single temperature step cannot saturate.
    let input = corpus(dir.path(), "12", "1");
    let out = prefusion(&[
        "cluster",
        "--input",
        path(&input),
        "--k",
        "2",
        "--max-outer",
        "1",
        "--max-inner",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["converged"], Value::Bool(false));
}

#[test]
fn cluster_prototypes_classify_chain() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), "24", "3");
    let partition = dir.path().join("partition.json");
    let table = dir.path().join("table.json");
    ok(&[
        "cluster",
        "--input",
        path(&input),
        "--k",
        "2",
        "--seed",
        "3",
        "-o",
        path(&partition),
    ]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&partition).unwrap()).unwrap();
    assert_eq!(doc["converged"], Value::Bool(true));
    assert_eq!(doc["metaconflict"].as_f64(), Some(0.0));

    ok(&[
        "prototypes",
        "--partition",
        path(&partition),
        "--input",
        path(&input),
        "--n",
        "3",
        "--threshold",
        "0.5",
        "-o",
        path(&table),
    ]);
    let records = lines(&ok(&["classify", "--table", path(&table), "--input", path(&input)]));
    let reports = lines(&std::fs::read_to_string(&input).unwrap());
    assert_eq!(records.len(), reports.len());

    // Each event maps to one table cluster.
    let mut seen: HashMap<String, u64> = HashMap::new();
    for (rec, rep) in records.iter().zip(&reports) {
        assert_eq!(rec["id"], rep["id"]);
        assert_eq!(rec["verdict"], "assigned");
        assert_eq!(rec["combinations_used"].as_u64(), Some(2));
        let cluster = rec["cluster"].as_u64().unwrap();
        assert_eq!(*seen.entry(event_of(rep)).or_insert(cluster), cluster);
    }
    assert_eq!(seen.len(), 2);
    assert_ne!(seen.values().min(), seen.values().max());
}

#[test]
fn pipeline_run_routes_by_event() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), "10", "7");
    let log = dir.path().join("epochs.ndjson");
    let snap = dir.path().join("snap");
    let stdout = ok(&[
        "pipeline",
        "run",
        "--input",
        path(&input),
        "--threshold",
        "0.2",
        "--epoch-every",
        "5",
        "--seed",
        "7",
        "--log",
        path(&log),
        "--snapshot",
        path(&snap),
    ]);
    let routed = lines(&stdout);
    assert_eq!(routed.len(), 10);
    assert!(routed[..5].iter().all(|r| r["routing"] == "deferred"));
    let epochs = lines(&std::fs::read_to_string(&log).unwrap());
    assert_eq!(epochs.len(), 2);
    assert_eq!(epochs[0]["epoch"].as_u64(), Some(0));
    assert!(epochs.iter().all(|e| e["converged"] == Value::Bool(true)));
    assert!(snap.join("state.json").exists());

    // After the first epoch each event lands in a single subset.
    let reports = lines(&std::fs::read_to_string(&input).unwrap());
    let mut subsets: HashMap<String, u64> = HashMap::new();
    for (rec, rep) in routed[5..].iter().zip(&reports[5..]) {
        assert_eq!(rec["routing"], "subset", "{rec}");
        let s = rec["subset"].as_u64().unwrap();
        assert_eq!(*subsets.entry(event_of(rep)).or_insert(s), s);
    }
    assert_eq!(subsets.len(), 2);

    // Replays with the same seed are identical.
    let log2 = dir.path().join("epochs2.ndjson");
    let again = ok(&[
        "pipeline",
        "run",
        "--input",
        path(&input),
        "--threshold",
        "0.2",
        "--epoch-every",
        "5",
        "--seed",
        "7",
        "--log",
        path(&log2),
    ]);
    assert_eq!(stdout, again);
    assert_eq!(std::fs::read(&log).unwrap(), std::fs::read(&log2).unwrap());
}

#[test]
fn pipeline_requires_threshold_and_reports_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let input = corpus(dir.path(), "4", "2");
    assert_eq!(
        prefusion(&["pipeline", "run", "--input", path(&input)]).status.code(),
        Some(1)
    );

    let mut text = std::fs::read_to_string(&input).unwrap();
    text.push_str("not json\n");
    let bad = dir.path().join("bad.ndjson");
    std::fs::write(&bad, text).unwrap();
    let out = prefusion(&["pipeline", "run", "--input", path(&bad), "--threshold", "0.2"]);
    assert_eq!(out.status.code(), Some(1));
    let records = lines(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(records.len(), 5);
    assert_eq!(records[4]["line"].as_u64(), Some(5));
}

#[test]
fn bench_small_k() {
    let doc: Value = serde_json::from_str(&ok(&["bench", "--k", "2", "--runs", "2", "--seed", "1"])).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["K"].as_u64(), Some(2));
    assert_eq!(rows[0]["N"].as_u64(), Some(3));
    assert_eq!(doc["reference"]["executed"], Value::Bool(false));
}

#[test]
fn large_bench_needs_opt_in() {
    let out = prefusion(&["bench", "--k", "10", "--runs", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--allow-large"));
}

#[test]
fn ci_requires_explicit_seed() {
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_prefusion"))
            .args(args)
            .env("CI", "true")
            .output()
            .unwrap()
    };
    assert_eq!(run(&["gen-corpus", "--count", "2"]).status.code(), Some(1));
    assert_eq!(
        run(&["gen-corpus", "--count", "2", "--seed", "0"]).status.code(),
        Some(0)
    );
}

#[test]
fn text_format_renders_tables() {
    let text = ok(&["--format", "text", "bench", "--k", "2", "--runs", "1"]);
    assert!(text.contains("seed: 0"));
    assert!(text.lines().any(|l| l.trim_start().starts_with('K')));
    assert!(serde_json::from_str::<Value>(&text).is_err());
}
