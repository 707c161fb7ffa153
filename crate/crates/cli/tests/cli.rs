use std::path::Path;
use std::process::{Command, Output};

use polyhe::extract::plan_depth;
use polyhe::netcore::{load_weights_csv, save_weights_csv, DenseLayer, Network, P2_ACTIVATION};
use polyhe::report::EvalReport;

fn polyhe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyhe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = polyhe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_small(dir: &Path) {
    ok(&[
        "train", "--function", "sigmoid", "--radius", "3", "--precision", "0.05", "--train-step", "0.1",
        "--layers", "2", "--width", "4", "--epochs", "5", "--seed", "1", "--out", s(dir),
    ]);
}

fn single_neuron(act: Vec<f64>) -> Network {
    let mut l0 = DenseLayer::zeros(1, 1);
    l0.weights[0] = 1.0;
    let mut l1 = DenseLayer::zeros(1, 1);
    l1.weights[0] = 1.0;
    Network::from_parts(vec![l0, l1], vec![act]).unwrap()
}

#[test]
fn train_writes_loadable_weights_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train_small(a.path());
    train_small(b.path());
    let net = load_weights_csv(a.path().join("weights.csv")).unwrap();
    assert_eq!((net.hidden_layers(), net.width(), net.activation_degree()), (2, 4, 2));
    let ra = std::fs::read(a.path().join("train_report.json")).unwrap();
    let rb = std::fs::read(b.path().join("train_report.json")).unwrap();
    assert_eq!(ra, rb);
    let json: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(json["train_points"], 61);
    assert_eq!(json["validation_points"], 60);
}

#[test]
fn missing_function_is_a_usage_error() {
    let out = polyhe(&["train", "--radius", "30"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn train_step_must_be_a_multiple_of_precision() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyhe(&[
        "train", "--function", "sigmoid", "--radius", "3", "--precision", "0.03", "--train-step", "0.1",
        "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_matches_plain_forward_and_plan_depth() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path());
    let weights = dir.path().join("weights.csv");
    let ev = dir.path().join("eval");
    ok(&[
        "eval", "--function", "sigmoid", "--radius", "30", "--weights", s(&weights), "--slots", "4096",
        "--out", s(&ev),
    ]);
    let net = load_weights_csv(&weights).unwrap();
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(ev.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.levels_consumed, plan_depth(&net.config).depth);
    // two chunks of 4096 slots
    assert_eq!(report.ct_mults, 2 * plan_depth(&net.config).ct_mults);
    let csv = std::fs::read_to_string(ev.join("predictions.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y_true,y_pred,abs_err"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6001);
    for r in &rows {
        let f = net.forward(r[0]).unwrap();
        assert!((r[2] - f).abs() <= 1e-12 * (1.0 + f.abs()));
        assert_eq!(r[3], (r[2] - r[1]).abs());
    }
}

#[test]
fn eval_reports_exhausted_levels() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path());
    let weights = dir.path().join("weights.csv");
    let args = [
        "eval", "--function", "sigmoid", "--radius", "3", "--weights", s(&weights), "--max-level", "5",
        "--out", s(dir.path()),
    ];
    assert_eq!(polyhe(&args).status.code(), Some(4));
    let mut boot = args.to_vec();
    boot.push("--auto-bootstrap");
    ok(&boot);
    let report: EvalReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.bootstraps > 0);
    assert_eq!(report.levels_consumed, 7);
}

#[test]
fn extract_identity_and_p2() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("id.csv");
    let p = dir.path().join("id.txt");
    save_weights_csv(&single_neuron(vec![0.0, 1.0, 0.0]), &w).unwrap();
    let stdout = ok(&["extract", "--weights", s(&w), "--out", s(&p)]);
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "0\n1");
    assert!(stdout.contains("degree 2\n"));
    assert!(stdout.contains("depth 4\n"));

    save_weights_csv(&single_neuron(P2_ACTIVATION.to_vec()), &w).unwrap();
    ok(&["extract", "--weights", s(&w), "--out", s(&p)]);
    assert_eq!(
        std::fs::read_to_string(&p).unwrap(),
        "1.1110537229\n0.5\n0.054235537"
    );
}

#[test]
fn extract_prints_degree_bound_and_enforces_cap() {
    let dir = tempfile::tempdir().unwrap();
    train_small(dir.path());
    let w = dir.path().join("weights.csv");
    let p = dir.path().join("p.txt");
    let stdout = ok(&["extract", "--weights", s(&w), "--out", s(&p)]);
    assert!(stdout.starts_with("degree 4\n"));
    assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 5);
    let out = polyhe(&["extract", "--weights", s(&w), "--cap", "3", "--out", s(&p)]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn fourier_command_reports_both_errors() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "fourier", "--function", "sigmoid", "--radius", "30", "--precision", "0.1", "--fourier-n", "16",
        "--subintervals", "8192", "--out", s(dir.path()),
    ]);
    let report: EvalReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.config["N"], 16);
    assert_eq!(report.config["l"], 40.0);
    assert_eq!(report.config["offset"], 0.5);
    assert!(report.config["encrypted_vs_plain_max"].as_f64().unwrap() <= 1e-6);
    assert_eq!(report.levels_consumed, (7 + 10 + 2) + 15 + 2);
    let series = std::fs::read_to_string(dir.path().join("series.txt")).unwrap();
    assert!(series.starts_with("4.0000000000000000e1,16\n"));
    assert_eq!(series.lines().count(), 17);
}

#[test]
fn baseline_schemes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for scheme in ["horner", "ps"] {
        let out = dir.path().join(scheme);
        ok(&[
            "baseline", "--function", "tanh", "--radius", "4", "--precision", "0.05", "--degree", "15",
            "--scheme", scheme, "--out", s(&out),
        ]);
        let r: EvalReport = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        reports.push(r);
    }
    assert!((reports[0].max_abs_error - reports[1].max_abs_error).abs() < 1e-9);
    assert_eq!(reports[0].ct_mults, 15);
    assert!(reports[1].ct_mults < 15);
}

#[test]
fn report_merges_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mk = |name: &str, method: &str, radius: f64, ct: u64| {
        let r = EvalReport {
            ct_mults: ct,
            ..EvalReport::from_predictions(method, radius, &[0.0], &[0.1])
        };
        let p = dir.path().join(name);
        std::fs::write(&p, serde_json::to_string(&r).unwrap()).unwrap();
        p
    };
    let a = mk("a.json", "network", 70.0, 5);
    let b = mk("b.json", "fourier", 30.0, 7);
    let c = mk("c.json", "network", 30.0, 11);
    let single = ok(&["report", s(&a)]);
    assert_eq!(single.lines().count(), 2);
    let table = ok(&["report", s(&a), s(&b), s(&c)]);
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert!(rows[0].starts_with("30,fourier,"));
    assert!(rows[1].starts_with("30,network,"));
    assert!(rows[2].starts_with("70,network,"));
    let total: u64 = rows.iter().map(|r| r.split(',').nth(5).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 23);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(polyhe(&["report", s(&a), s(&bad)]).status.code(), Some(2));
}
