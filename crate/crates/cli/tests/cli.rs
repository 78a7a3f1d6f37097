use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn perfstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfstab"))
        .args(args)
        .env_remove("PERFSTAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const EXAMPLE: &str = r#"{"domain": {"type": "hypercube", "lower": [-1, -1], "upper": [1, 1]},
                          "shift": {"type": "negation"}}"#;

#[test]
fn rrm_on_the_negation_example_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "example.json", EXAMPLE);
    let report = dir.path().join("report.json");
    let out = perfstab(&[
        "solve",
        "--instance",
        &inst,
        "--solver",
        "rrm",
        "--x0",
        "0.5,0.5",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(report["status"], "cycling");
    assert!((report["fpGap"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn halpern_on_the_negation_example_converges() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "example.json", EXAMPLE);
    let out = perfstab(&[
        "solve",
        "--instance",
        &inst,
        "--solver",
        "halpern",
        "--x0",
        "-0.3,0.8",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["status"], "converged");
}

#[test]
fn default_output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "example.json", EXAMPLE);
    let status = Command::new(env!("CARGO_BIN_EXE_perfstab"))
        .args([
            "solve",
            "--instance",
            &inst,
            "--solver",
            "ellipsoid",
            "--eps",
            "1e-8",
        ])
        .env("PERFSTAB_OUT_DIR", dir.path().join("runs"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("runs/solve_report.json")).unwrap(),
    )
    .unwrap();
    assert!(report["fpGap"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn planted_sperner_instance_matches_brute_force() {
    let out = perfstab(&["sperner", "--n", "4", "--k", "16", "--coloring", "planted"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = stdout_json(&out);
    assert_eq!(v["matches"], true);
    assert!(v["bruteForce"].as_array().unwrap().contains(&v["triangle"]));
}

#[test]
fn triangle_graph_gives_a_cut_of_weight_two() {
    let dir = tempfile::tempdir().unwrap();
    let graph = write(
        dir.path(),
        "k3.json",
        r#"{"vertices": ["a", "b", "c"], "edges": [{"u": "a", "v": "b"}, {"u": "b", "v": "c"}, {"u": "a", "v": "c"}]}"#,
    );
    let out = perfstab(&["stratclass", "--graph", &graph, "--starts", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["cutWeight"], 2.0);
    assert_eq!(v["allLocalMaxCuts"], true);
    assert_eq!(v["runs"].as_array().unwrap().len(), 20);
}

#[test]
fn reductions_record_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "example.json", EXAMPLE);
    let out = perfstab(&[
        "reduce",
        "--from",
        "vi",
        "--input",
        &inst,
        "--eps",
        "1e-3",
        "--eps-prime",
        "1e-2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["provenance"]["lambda"], 0.1);
    assert_eq!(v["provenance"]["epsPrime"], 0.01);
    assert_eq!(v["instance"]["shift"]["M"][0][0], 1.1);

    let game = write(
        dir.path(),
        "game.json",
        r#"{"A": [[1, 0], [0, 1]], "B": [[0, 1], [1, 0]]}"#,
    );
    let out = perfstab(&["reduce", "--from", "game", "--input", &game, "--m", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["provenance"]["M"], 100.0);
    assert_eq!(v["instance"]["star_costs"][0][0], 100.0);

    let general = write(dir.path(), "general.json", r#"{"A": [[0.5]], "B": [[1]]}"#);
    let out = perfstab(&["reduce", "--from", "game", "--input", &general]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_csv_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "sweep.json",
        r#"{"rhoMin": 0.5, "rhoMax": 1.5, "steps": 3, "dim": 2, "family": "negation-scaled",
            "solvers": ["rrm", "halpern"], "eps": 1e-6, "maxIter": 1000, "seed": 4}"#,
    );
    let csv = dir.path().join("out/sweep.csv");
    let out = perfstab(&[
        "--threads",
        "2",
        "sweep",
        "--spec",
        &spec,
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("instance_id,rho,solver,seed,iterations,erm_queries,final_fp_gap,final_stab_gap,status,wall_ms")
    );
    let statuses: Vec<&str> = lines.map(|l| l.split(',').nth(8).unwrap()).collect();
    assert_eq!(statuses[0], "converged");
    assert_eq!(statuses[2], "cycling");
    let prov: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("out/sweep.provenance.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(prov["spec"]["seed"], 4);
    assert!(prov["generator"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        perfstab(&["solve", "--instance", "/no/such/file", "--solver", "rrm"])
            .status
            .code(),
        Some(2)
    );
    let inst = write(dir.path(), "example.json", EXAMPLE);
    let wrong_dim = perfstab(&[
        "solve",
        "--instance",
        &inst,
        "--solver",
        "rrm",
        "--x0",
        "0.1,0.2,0.3",
    ]);
    assert_eq!(wrong_dim.status.code(), Some(2));
    let outside = perfstab(&[
        "solve",
        "--instance",
        &inst,
        "--solver",
        "rrm",
        "--x0",
        "3,0",
    ]);
    assert_eq!(outside.status.code(), Some(2));
    let bad_spec = write(
        dir.path(),
        "bad.json",
        r#"{"rhoMin": 2, "rhoMax": 1, "steps": 3, "dim": 2,
        "family": "negation-scaled", "solvers": ["rrm"], "eps": 1e-6, "maxIter": 10, "seed": 0}"#,
    );
    assert_eq!(
        perfstab(&["sweep", "--spec", &bad_spec]).status.code(),
        Some(2)
    );
}

#[test]
fn budget_exhaustion_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(
        dir.path(),
        "slow.json",
        r#"{"domain": {"type": "hypercube", "lower": [-1, -1], "upper": [1, 1]},
            "shift": {"type": "affine", "M": [[0.99, 0], [0, 0.99]], "c": [0, 0]}}"#,
    );
    let out = perfstab(&[
        "solve",
        "--instance",
        &inst,
        "--solver",
        "rrm",
        "--x0",
        "1,1",
        "--max-iter",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["status"], "budget_exhausted");
}
