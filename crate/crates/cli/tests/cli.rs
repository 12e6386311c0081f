use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn iss(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iss"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| {
            r.unwrap()
                .iter()
                .map(|s| s.parse::<f64>().unwrap())
                .collect()
        })
        .collect();
    (header, rows)
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn simulate_example1_writes_both_files() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run.csv");
    let o = iss(
        &[
            "simulate",
            "--config",
            &config("example1.json"),
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());

    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t", "x_1", "w_1", "norm_x", "V", "V1", "V2"]);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 50.0);
    assert!(last[3] < 1e-3);
    // Round trip: the norm column is reproduced from the state columns.
    for r in &rows {
        assert_eq!(r[1].abs(), r[3]);
        assert!((r[4] - (r[5] + r[6])).abs() <= 1e-12 * r[4].abs().max(1e-300));
    }

    let (eh, events) = read_csv(&dir.path().join("run_events.csv"));
    assert_eq!(eh, ["k", "t_k", "pre_norm", "post_norm", "jump_norm"]);
    assert_eq!(events.len(), 23);
    assert_eq!(events[0][0], 1.0);
    assert!((events[0][1] - 2.1).abs() < 1e-12);
    // one pre-jump row per event on top of the grid rows
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(
        times.iter().filter(|&&t| (t - 2.1).abs() < 1e-12).count(),
        2
    );
}

#[test]
fn simulate_example2_converges() {
    let dir = TempDir::new().unwrap();
    let o = iss(
        &["simulate", "--config", &config("example2.json")],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("example2.csv"));
    assert_eq!(header.len(), 1 + 6 + 1 + 1 + 3);
    let norm_col = header.iter().position(|h| h == "norm_x").unwrap();
    let first = rows[0][norm_col];
    let last = rows.last().unwrap()[norm_col];
    assert!(last <= 1e-2 * first, "{last} vs {first}");
}

#[test]
fn simulate_config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad_step = write(
        &dir,
        "step.json",
        r#"{"scenario": {"kind": "example1"}, "integration": {"step": 0.0, "t_end": 1.0}}"#,
    );
    assert_eq!(
        code(&iss(&["simulate", "--config", &bad_step], dir.path())),
        2
    );
    let unknown = write(
        &dir,
        "unknown.json",
        r#"{"scenario": {"kind": "example1"}, "integration": {"step": 0.01, "t_end": 1.0}, "colour": "red"}"#,
    );
    let o = iss(&["simulate", "--config", &unknown], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert_eq!(
        code(&iss(&["simulate", "--config", "missing.json"], dir.path())),
        2
    );
}

#[test]
fn simulate_divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "blowup.json",
        r#"{"scenario": {"kind": "linear", "params": {"a": [[5.0]], "x0": [1.0]}},
            "integration": {"step": 0.01, "t_end": 10.0}}"#,
    );
    assert_eq!(code(&iss(&["simulate", "--config", &cfg], dir.path())), 3);
}

#[test]
fn linear_scenario_with_delayed_jumps() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "lin.json",
        r#"{"scenario": {"kind": "linear", "params": {
                "a": [[0.0]], "jump": [[-0.5]], "x0": [1.0]}},
            "schedule": {"kind": "periodic", "delta": 1.0},
            "integration": {"step": 0.1, "t_end": 5.5},
            "output": {"trajectory": "lin.csv"}}"#,
    );
    assert_eq!(code(&iss(&["simulate", "--config", &cfg], dir.path())), 0);
    let (_, rows) = read_csv(&dir.path().join("lin.csv"));
    assert_eq!(rows.last().unwrap()[1], 0.03125);
}

#[test]
fn certify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let t3 = iss(
        &[
            "certify",
            "--theorem",
            "3",
            "--rho1",
            "0",
            "--rho2",
            "0",
            "--kappa",
            "0.5",
            "--mu",
            "1",
            "--delta",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&t3), 0);
    let rep = json(&t3);
    assert!((rep["delta_star"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-15);

    let t4 = iss(
        &[
            "certify",
            "--theorem",
            "4",
            "--rho1",
            "0.5",
            "--rho2",
            "0.5",
            "--kappa",
            "0",
        ],
        dir.path(),
    );
    assert_eq!(code(&t4), 1);
    assert_eq!(json(&t4)["combo"].as_f64().unwrap(), 1.0);

    let t1 = iss(
        &[
            "certify",
            "--theorem",
            "1",
            "--rho1",
            "5.43656",
            "--rho2",
            "0.1875",
            "--mu",
            "0.4",
            "--r",
            "1",
            "--delta",
            "2.1",
        ],
        dir.path(),
    );
    assert_eq!(code(&t1), 1);
    let rep = json(&t1);
    assert!(rep["margin_at_query"].as_f64().unwrap() < 0.0);
    let diag = rep["diagnostics"].as_array().unwrap();
    assert!(diag.iter().any(|d| d.as_str().unwrap().contains("2.06")));

    let missing = iss(&["certify", "--theorem", "1", "--mu", "0.4"], dir.path());
    assert_eq!(code(&missing), 2);
    assert!(missing.stdout.is_empty());
    let bad = iss(
        &[
            "certify",
            "--theorem",
            "3",
            "--rho1",
            "1.5",
            "--rho2",
            "0",
            "--kappa",
            "0",
            "--mu",
            "1",
            "--delta",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(code(&bad), 2);
    assert_eq!(code(&iss(&["certify", "--theorem", "5"], dir.path())), 2);
}

#[test]
fn verify_iss_example2_passes() {
    let dir = TempDir::new().unwrap();
    let o = iss(
        &[
            "verify-iss",
            "--config",
            &config("example2.json"),
            "--ensemble",
            "5",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&o);
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["per_run"].as_array().unwrap().len(), 15);
    assert!(rep["envelope"]["lambda"].as_f64().unwrap() > 0.0);
    assert!(rep["zero_input"]["max_ratio"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn verify_iss_failures() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&iss(
            &[
                "verify-iss",
                "--config",
                &config("example2.json"),
                "--ensemble",
                "0"
            ],
            dir.path()
        )),
        2
    );
    let o = iss(
        &[
            "verify-iss",
            "--config",
            &config("example2_open_loop.json"),
            "--ensemble",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 4);
    let rep = json(&o);
    assert_eq!(rep["pass"], false);
    assert!(rep["error"].as_str().unwrap().contains("no ISS witness"));
}

fn sweep_rows(args: &[&str], dir: &Path) -> Vec<Vec<String>> {
    let o = iss(args, dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_reader(o.stdout.as_slice());
    rd.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn sweep_delta_crosses_at_closed_form() {
    let dir = TempDir::new().unwrap();
    let rows = sweep_rows(
        &[
            "sweep",
            "--config",
            &config("example2.json"),
            "--param",
            "delta",
            "--from",
            "0.001",
            "--to",
            "0.02",
            "--steps",
            "39",
        ],
        dir.path(),
    );
    assert_eq!(rows.len(), 39);
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            (
                r[0].parse().unwrap(),
                r[2].parse().unwrap(),
                r[4].parse().unwrap(),
            )
        })
        .collect();
    let star = pts[0].2;
    let cross = pts
        .windows(2)
        .find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0)
        .expect("sign change");
    assert!(
        cross[0].0 < star && star <= cross[1].0,
        "{cross:?} vs {star}"
    );
    assert!(pts.iter().all(|p| (p.0 < star) == (p.1 > 0.0)));
}

#[test]
fn sweep_kappa_boundary_and_single_point() {
    let dir = TempDir::new().unwrap();
    let rows = sweep_rows(
        &[
            "sweep",
            "--config",
            &config("theorem4.json"),
            "--param",
            "kappa",
            "--from",
            "0",
            "--to",
            "0.99",
            "--steps",
            "100",
        ],
        dir.path(),
    );
    // combo = 0.3 + 0.8 kappa reaches 1 at kappa = 0.875
    for r in &rows {
        let k: f64 = r[0].parse().unwrap();
        assert_eq!(r[3] == "true", 0.3 + 0.8 * k < 1.0, "{r:?}");
    }
    let single = sweep_rows(
        &[
            "sweep",
            "--config",
            &config("theorem4.json"),
            "--param",
            "rho2",
            "--from",
            "0.2",
            "--to",
            "0.9",
            "--steps",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(single.len(), 1);
    assert_eq!(single[0][0], "0.2");
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let dir = TempDir::new().unwrap();
    let o = iss(
        &[
            "sweep",
            "--config",
            &config("theorem4.json"),
            "--param",
            "gamma",
            "--from",
            "0",
            "--to",
            "1",
            "--steps",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
}

#[test]
fn sweep_to_file() {
    let dir = TempDir::new().unwrap();
    let out: PathBuf = dir.path().join("sweep.csv");
    let o = iss(
        &[
            "sweep",
            "--config",
            &config("example1.json"),
            "--param",
            "epsilon",
            "--from",
            "1",
            "--to",
            "9",
            "--steps",
            "5",
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("value,theorem,margin,admissible,delta_star\n"));
    assert_eq!(text.lines().count(), 6);
    // eps = 5 is the documented choice; eps = 9 drives mu negative.
    assert!(text.contains("\n5,T1,"));
    assert!(text.lines().last().unwrap().starts_with("9,T1,,false,"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("preconditions"));
}
