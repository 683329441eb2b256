use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_median-consensus"));
    cmd.env("MEDIAN_CONSENSUS_THREADS", "2");
    cmd
}

fn call(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn result(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stdout).expect("json report");
    assert_eq!(v["tool"], "median-consensus");
    v["result"].clone()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn generate(dir: &TempDir, name: &str, args: &[&str]) -> String {
    let p = path(dir, name);
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", &p]);
    let out = call(&full);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = path(dir, name);
    fs::write(&p, text).unwrap();
    p
}

// Fano plane: every 2-colouring leaves a line monochromatic.
const FANO: &str = "p nae3sat 7 7\n1 2 3\n1 4 5\n1 6 7\n2 4 6\n2 5 7\n3 4 7\n3 5 6\n";
const SMALL_SAT: &str = "c two clauses\np nae3sat 3 2\n1 2 3\n1 2 3\n";

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&call(&["--help"])), 0);
    assert_eq!(code(&call(&["--version"])), 0);
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(code(&call(&["frobnicate"])), 1);
    assert_eq!(code(&call(&["simulate", "--no-such-flag"])), 1);
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "missing.json");
    let out = call(&["analyze", "--network", &missing]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
    // no initial state given
    let net = generate(&dir, "k4.json", &["complete-no-loops", "--n", "4"]);
    assert_eq!(code(&call(&["simulate", "--network", &net])), 1);
}

#[test]
fn malformed_network_exits_one() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.csv", "2\n1/2,1/2\n1/2,1/3\n");
    let out = call(&["analyze", "--network", &bad]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row"));
}

#[test]
fn simulate_converges_and_reports() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "k6.json", &["complete-no-loops", "--n", "6"]);
    let out = call(&["simulate", "--network", &net, "--grid", "4", "--seed", "3"]);
    assert_eq!(code(&out), 0);
    let r = result(&out);
    assert_eq!(r["converged"], true);
    assert_eq!(r["consensus"], true);
    assert!(r["steps"].is_array());
}

#[test]
fn simulate_budget_exhaustion_exits_three() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "k5.json", &["complete-no-loops", "--n", "5"]);
    let out = call(&["simulate", "--network", &net, "--distinct", "--budget", "0"]);
    assert_eq!(code(&out), 3);
    let r = result(&out);
    assert_eq!(r["converged"], false);
    assert_eq!(r["steps_used"], 0);
}

#[test]
fn simulate_from_consensus_takes_no_steps() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "ring.json", &["ring", "--n", "5"]);
    let init = write(&dir, "x0.txt", "1/2 1/2 1/2 1/2 1/2");
    let out = call(&["simulate", "--network", &net, "--initial", &init]);
    assert_eq!(code(&out), 0);
    assert_eq!(result(&out)["steps_used"], 0);
}

#[test]
fn simulate_writes_trajectory_and_grid() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "lat.json", &["lattice", "--rows", "3", "--cols", "4"]);
    let traj = path(&dir, "traj.csv");
    let grid = path(&dir, "final.csv");
    let out = call(&[
        "simulate", "--network", &net, "--labels", "2", "--out", &traj, "--emit", "csv", "--final-grid", &grid,
        "--cols", "4",
    ]);
    assert!(matches!(code(&out), 0 | 3));
    assert!(fs::read_to_string(&traj).unwrap().starts_with("time,node,old,new"));
    let rows: Vec<String> = fs::read_to_string(&grid).unwrap().lines().map(String::from).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').count() == 4));
    assert!(result(&out)["steps"].is_null());
}

#[test]
fn schedule_file_replays_exactly() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "k3.json", &["complete", "--n", "3"]);
    let init = write(&dir, "x0.json", "[0, 0, 1]");
    let sched = write(&dir, "s.json", "[2]");
    let out = call(&["simulate", "--network", &net, "--initial", &init, "--schedule", &sched]);
    assert_eq!(code(&out), 0);
    let r = result(&out);
    assert_eq!(r["terminal"], serde_json::json!(["0", "0", "0"]));
}

#[test]
fn reports_are_byte_stable() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "br.json", &["bridged", "--n", "3", "--bridge", "1/3"]);
    for args in [
        vec!["ensemble", "--network", &net, "--distinct", "--replicas", "40", "--seed", "9"],
        vec!["classify", "--network", &net],
        vec!["simulate", "--network", &net, "--grid", "10", "--seed", "5"],
    ] {
        let a = call(&args);
        let b = bin().env("MEDIAN_CONSENSUS_THREADS", "1").args(&args).output().unwrap();
        assert_eq!(code(&a), code(&b));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn ensemble_counts_add_up() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "cl.json", &["cliques", "--sizes", "3,3"]);
    let out = call(&["ensemble", "--network", &net, "--labels", "2", "--replicas", "30"]);
    assert_eq!(code(&out), 0);
    let e = &result(&out)["ensemble"];
    assert_eq!(e["replicas"], 30);
    assert_eq!(e["converged"].as_u64().unwrap() + e["budget_exhausted"].as_u64().unwrap(), 30);
    let census: u64 = e["census"].as_array().unwrap().iter().map(|c| c["count"].as_u64().unwrap()).sum();
    assert_eq!(census, e["converged"].as_u64().unwrap());
}

#[test]
fn classify_consensus_and_dissensus() {
    let dir = TempDir::new().unwrap();
    let k = generate(&dir, "k5.json", &["complete-no-loops", "--n", "5"]);
    let r = result(&call(&["classify", "--network", &k]));
    assert_eq!(r["consensus_certain"], true);
    assert_eq!(r["consensus_reachable"], true);

    let cl = generate(&dir, "cl.json", &["cliques", "--sizes", "3,2"]);
    let r = result(&call(&["classify", "--network", &cl]));
    assert_eq!(r["consensus_certain"], false);
    assert_eq!(r["dissensus_certain"], true);
    assert_eq!(r["consensus_reachable"], false);
    assert!(r["dissensus_witness"].is_object());
}

#[test]
fn classify_beyond_bounds_reports_undecided() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "k8.json", &["complete-no-loops", "--n", "8"]);
    let out = call(&["classify", "--network", &net, "--cohesion-bound", "4", "--bound", "4", "--replicas", "20"]);
    assert_eq!(code(&out), 0);
    let r = result(&out);
    assert!(r["consensus_certain"].is_null());
    assert_eq!(r["scope"]["cohesion_enumerated"], false);
    assert_eq!(r["scope"]["reachability"]["method"], "monte_carlo_falsification");
}

#[test]
fn analyze_reports_structure_and_exports_dot() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "star.json", &["star"]);
    let r = result(&call(&["analyze", "--network", &net]));
    assert!(r["decisive_edges"].is_array());
    assert!(r["maximal_cohesive_sets"].is_array());
    let dot = call(&["analyze", "--network", &net, "--emit", "dot"]);
    assert_eq!(code(&dot), 0);
    let text = String::from_utf8(dot.stdout).unwrap();
    assert!(text.starts_with("digraph"));
    assert!(text.contains("decisive="));
    let r = result(&call(&["analyze", "--network", &net, "--bound", "1"]));
    assert!(r["maximal_cohesive_sets"].is_null());
}

#[test]
fn csv_networks_load() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "k3.csv", &["complete", "--n", "3", "--emit", "csv"]);
    let r = result(&call(&["analyze", "--network", &net]));
    assert_eq!(r["n"], 3);
    let renamed = path(&dir, "k3.txt");
    fs::copy(&net, &renamed).unwrap();
    assert_eq!(code(&call(&["analyze", "--network", &renamed, "--format", "csv"])), 0);
}

#[test]
fn equilibria_lists_fixed_points() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "cl.json", &["cliques", "--sizes", "2,2"]);
    let r = result(&call(&["equilibria", "--network", &net, "--labels", "2"]));
    assert_eq!(r["structural_check_agrees"], true);
    assert!(r["non_consensus"].as_u64().unwrap() > 0);
    let r = result(&call(&["equilibria", "--network", &net, "--values", "-1,1/2"]));
    assert_eq!(r["labels"], serde_json::json!(["-1", "1/2"]));
    let out = call(&["equilibria", "--network", &net, "--labels", "3", "--bound", "10"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sequence_reaches_equilibrium() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "br.json", &["bridged", "--n", "3", "--bridge", "1/3"]);
    let out = call(&["sequence", "--network", &net, "--distinct", "--seed", "4"]);
    assert_eq!(code(&out), 0);
    let r = result(&out);
    let len = r["length"].as_u64().unwrap();
    assert!(len <= 6 * 6);
}

#[test]
fn decide_writes_checkable_certificate() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "k4.json", &["complete-no-loops", "--n", "4"]);
    let cert = path(&dir, "cert.json");
    let out = call(&["decide", "--network", &net, "--order-type", "--cert-out", &cert]);
    assert_eq!(code(&out), 0);
    let r = result(&out);
    assert_eq!(r["decision"]["reachable"], true);
    assert_eq!(r["agree"], true);
    assert_eq!(code(&call(&["verify-cert", "--network", &net, "--cert", &cert])), 0);
}

#[test]
fn reduce_solves_satisfiable_instance() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "sat.cnf", SMALL_SAT);
    let svc = path(&dir, "svc.json");
    let cert = path(&dir, "cert.json");
    let out = call(&["reduce", "--instance", &inst, "--solve", "--check", "--out", &svc, "--cert-out", &cert]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = result(&out);
    assert_eq!(r["nodes"], 2 * 3 + 2 + 1);
    assert_eq!(r["solve"]["satisfiable"], true);
    assert_eq!(r["roundtrip"]["agree"], true);
    assert!(r["network"].is_null());

    assert_eq!(code(&call(&["verify-cert", "--network", &svc, "--cert", &cert])), 0);
    let out = call(&["reduce", "--instance", &inst, "--verify-cert", &cert]);
    assert_eq!(code(&out), 0);
    assert_eq!(result(&out)["verification"]["valid"], true);
}

#[test]
fn reduce_unsatisfiable_exits_four() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "fano.cnf", FANO);
    let out = call(&["reduce", "--instance", &inst, "--solve"]);
    assert_eq!(code(&out), 4);
    let r = result(&out);
    assert_eq!(r["solve"]["satisfiable"], false);
    assert!(r["network"].is_object());
}

#[test]
fn tampered_certificate_exits_five() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "sat.cnf", SMALL_SAT);
    let cert = path(&dir, "cert.json");
    assert_eq!(code(&call(&["reduce", "--instance", &inst, "--solve", "--cert-out", &cert])), 0);

    let mut c: Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    let seq = c["sequence"].as_array_mut().unwrap();
    seq.pop();
    c["target_time"] = Value::from(seq.len());
    let bad = write(&dir, "bad.json", &c.to_string());
    let out = call(&["reduce", "--instance", &inst, "--verify-cert", &bad]);
    assert_eq!(code(&out), 5);
    assert_eq!(result(&out)["verification"]["valid"], false);

    let garbage = write(&dir, "garbage.json", "{\"initial\": 3}");
    assert_eq!(code(&call(&["reduce", "--instance", &inst, "--verify-cert", &garbage])), 1);
}

#[test]
fn instance_with_repeated_variable_is_rejected() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "trip.cnf", "p nae3sat 1 1\n1 1 1\n");
    assert_eq!(code(&call(&["reduce", "--instance", &inst])), 1);
}

#[test]
fn outputs_are_atomic_files() {
    let dir = TempDir::new().unwrap();
    let net = generate(&dir, "k4.json", &["complete", "--n", "4"]);
    let rep = path(&dir, "report.json");
    assert_eq!(code(&call(&["classify", "--network", &net, "--out", &rep])), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(v["config"]["command"]["name"], "classify");
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
    assert!(Path::new(&rep).exists());
}
