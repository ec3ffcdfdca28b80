use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn fockmrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockmrf")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Compares against `tests/golden/<name>`; `FOCKMRF_BLESS=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("FOCKMRF_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden {name}");
}

#[test]
fn validate_exit_codes() {
    let ok = fockmrf(&["validate", data("single_node.json").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));

    let bad = fockmrf(&["validate", data("negative_weight.json").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("two_cliques[0].p[1][2]"), "{}", stderr(&bad));

    let missing = fockmrf(&["validate", data("no_such_file.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn normal_order_golden() {
    let out = fockmrf(&["normal-order", "A[1,1] A'[1,1] A'[1,2] - 1/2 * A[1,2]^2 A'[1,2]^2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    golden("normal_order.txt", &stdout(&out));

    let bad = fockmrf(&["normal-order", "A[1,1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn equilibrium_check() {
    let out = fockmrf(&["equilibrium-check", "--m", "3", "--n", "4", "--p", "1/2,1/3,1/6"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc, serde_json::json!({"lambda": "4", "residual": "0"}));

    let single = fockmrf(&["equilibrium-check", "--n", "1", "--p", "2/7,5/7"]);
    assert_eq!(single.status.code(), Some(0));
    assert!(stdout(&single).contains(r#""lambda":"1""#));

    let perturbed = fockmrf(&["equilibrium-check", "--m", "3", "--n", "4", "--p", "1/2,1/3,1/6", "--perturb"]);
    assert_eq!(perturbed.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&perturbed)).unwrap();
    assert_ne!(doc["residual"], "0");

    let mismatch = fockmrf(&["equilibrium-check", "--m", "2", "--n", "4", "--p", "1/2,1/3,1/6"]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn exact_stationary_golden() {
    let out =
        fockmrf(&["exact-stationary", "--spec", data("two_node_chain.json").to_str().unwrap(), "--totals", "1,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&stdout(&out)).unwrap();
    let total: f64 = rows.iter().map(|r| r["prob"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    // joint weights 3, 1, 1, 2 over 7
    let expected = [3.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0, 2.0 / 7.0];
    for (row, want) in rows.iter().zip(expected) {
        assert!((row["prob"].as_f64().unwrap() - want).abs() < 1e-12);
    }
    golden("exact_stationary_two_node.json", &stdout(&out));
}

#[test]
fn verify_conservation() {
    let spec = data("two_node_chain.json");
    let ok = fockmrf(&["verify-conservation", "--spec", spec.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(stdout(&ok), "node 1: conserved\nnode 2: conserved\n");

    let stray = fockmrf(&["verify-conservation", "--spec", spec.to_str().unwrap(), "--expr", "A'[1,1]"]);
    assert_eq!(stray.status.code(), Some(1));
    assert!(stdout(&stray).contains("node 1: residual -1 * A'[1,1]"));
}

#[test]
fn mcmc_run_writes_trace_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let args = |path: &Path| {
        fockmrf(&[
            "mcmc-run",
            "--spec",
            data("two_node_chain.json").to_str().unwrap(),
            "--seed",
            "42",
            "--steps",
            "60",
            "--burn-in",
            "10",
            "--thin",
            "5",
            "--totals",
            "2,1",
            "--out",
            path.to_str().unwrap(),
        ])
    };
    let run = args(&out);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let csv = std::fs::read_to_string(&out).unwrap();
    golden("trace_seed42.csv", &csv);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.csv.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed"], 42);
    assert_eq!(sidecar["records"], 10);

    let again = dir.path().join("again.csv");
    assert_eq!(args(&again).status.code(), Some(0));
    assert_eq!(std::fs::read(&again).unwrap(), csv.as_bytes());
}

#[test]
fn mcmc_run_several_chains() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let run = fockmrf(&[
        "mcmc-run",
        "--spec",
        data("single_node.json").to_str().unwrap(),
        "--steps",
        "500",
        "--totals",
        "3",
        "--chains",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    let traces: Vec<String> =
        (0..3).map(|k| std::fs::read_to_string(dir.path().join(format!("t.chain{k}.csv"))).unwrap()).collect();
    assert_ne!(traces[0], traces[1]);
    assert!(traces.iter().all(|t| t.starts_with("step,node1_bin1,node1_bin2,node1_bin3,node1_bin4\n")));
}

#[test]
fn compare_single_node_multinomial() {
    let out =
        fockmrf(&["compare", "--spec", data("single_node.json").to_str().unwrap(), "--totals", "8", "--seed", "3"]);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}{}", stderr(&out));
    assert!(text.contains("states: 165"));
    assert!(text.contains("1 closed class(es)"));
    assert!(text.contains("records: 100000"));
    assert!(text.contains("batch_se"));
}

#[test]
fn compare_two_node_chain() {
    let out = fockmrf(&[
        "compare",
        "--spec",
        data("two_node_chain.json").to_str().unwrap(),
        "--totals",
        "1,1",
        "--steps",
        "50000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn compare_reports_tolerance_failure() {
    let out = fockmrf(&[
        "compare",
        "--spec",
        data("single_node.json").to_str().unwrap(),
        "--totals",
        "4",
        "--steps",
        "200",
        "--tol",
        "0.0001",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("fail"));
}

#[test]
fn compare_reducible_exits_4() {
    let out = fockmrf(&["compare", "--spec", data("identity_coupling.json").to_str().unwrap(), "--totals", "1,1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("reducible"));
    assert!(stdout(&out).contains("closed class: [(1,0) (1,0)]"));
}

#[test]
fn capacity_guard_exits_4() {
    let out = Command::new(env!("CARGO_BIN_EXE_fockmrf"))
        .args(["exact-stationary", "--spec", data("single_node.json").to_str().unwrap(), "--totals", "8"])
        .env("FOCKMRF_MAX_STATES", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("165"), "{}", stderr(&out));
}

#[test]
fn diagram_expand_golden() {
    let out = fockmrf(&["diagram-expand", "--pieces", "2", "--power", "2", "--verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    golden("diagram_2_2.txt", &stdout(&out));

    let too_big = fockmrf(&["diagram-expand", "--pieces", "2", "--power", "13"]);
    assert_eq!(too_big.status.code(), Some(4));
}

#[test]
fn totals_default_to_one_sample_per_node() {
    let spec = data("two_node_chain.json");
    let implicit = fockmrf(&["exact-stationary", "--spec", spec.to_str().unwrap()]);
    let explicit = fockmrf(&["exact-stationary", "--spec", spec.to_str().unwrap(), "--totals", "1,1"]);
    assert_eq!(implicit.status.code(), Some(0), "{}", stderr(&implicit));
    assert_eq!(implicit.stdout, explicit.stdout);

    let run =
        fockmrf(&["mcmc-run", "--spec", spec.to_str().unwrap(), "--seed", "42", "--steps", "100", "--burn-in", "10"]);
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    assert_eq!(stdout(&run).lines().count(), 91);
}
