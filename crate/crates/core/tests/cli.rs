use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streetperc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn small(out: &Path) -> Vec<String> {
    vec![
        "--window-side".into(),
        "300".into(),
        "--reps".into(),
        "3".into(),
        "--out".into(),
        out.display().to_string(),
    ]
}

fn with<'a>(head: &[&'a str], tail: &'a [String]) -> Vec<&'a str> {
    head.iter()
        .copied()
        .chain(tail.iter().map(String::as_str))
        .collect()
}

#[test]
fn validate_reports_reference_statistics() {
    let o = run(&["validate", "--reps", "60"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("pass").count(), 3, "{text}");
}

#[test]
fn validate_follows_a_denser_street_process() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dense.toml");
    let intensity = 4.0 * 4.0 / 90_000.0;
    fs::write(
        &cfg,
        format!("replications = 60\n[params]\nstreet_intensity = {intensity}\n"),
    )
    .unwrap();
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(
        stdout(&o).contains("expected   5.000000e1"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn bad_parameters_fail_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[params]\nthreshold = -1.0\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--param",
        "U",
        "--from",
        "0",
        "--to",
        "1",
        "--steps",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("threshold"));
    assert!(!out.exists());

    fs::write(&cfg, "colour = 3\n").unwrap();
    assert_eq!(
        code(&run(&["validate", "--config", cfg.to_str().unwrap()])),
        1
    );
    assert_eq!(code(&run(&["validate", "--set", "tau=0"])), 1);
    assert_eq!(
        code(&run(&[
            "sweep", "--param", "gamma", "--from", "0", "--to", "1", "--steps", "2"
        ])),
        1
    );
    assert_eq!(code(&run(&["sweep", "--param", "U"])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn sweeps_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let args = small(out);
        let o = run(&with(
            &[
                "sweep", "--seed", "11", "--param", "U", "--from", "0", "--to", "4", "--steps", "5",
            ],
            &args,
        ));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["sweep.csv", "aggregate.csv", "fit.json"] {
        assert_eq!(
            fs::read_to_string(a.join(name)).unwrap(),
            fs::read_to_string(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let strip = |dir: &Path| {
        let mut m = json(&dir.join("manifest.json"));
        m["config"]["out"] = Value::Null;
        m
    };
    assert_eq!(strip(&a), strip(&b));
    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("param,value,reps,successes,prob,ci_low,ci_high,status")
    );
    assert_eq!(lines.count(), 5);
    assert!(csv.contains("U,1.0000000000000000e0,3,"));
    let agg = fs::read_to_string(a.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("param_value,replications,successes,probability,ci_low,ci_high,seed\n"));
    assert!(agg.lines().nth(1).unwrap().ends_with(",11"));
    assert!(json(&a.join("fit.json")).is_array());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 5\nreplications = 2\nwindow_side = 300.0\nusers_per_street = 2.0\n\
         [sweep]\nparam = \"theta\"\nfrom = 0.0\nto = 0.01\nsteps = 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "7",
        "--steps",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["command"], "sweep");
    assert_eq!(m["config"]["seed"], 7);
    assert_eq!(m["config"]["replications"], 2);
    assert_eq!(m["config"]["sweep"]["param"], "theta");
    assert_eq!(m["config"]["sweep"]["steps"], 2);
    assert_eq!(m["config"]["users_per_street"], 2.0);
}

#[test]
fn inadmissible_grid_points_are_reported_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = small(&out);
    let o = run(&with(
        &[
            "sweep", "--param", "tau", "--from", "0", "--to", "1", "--steps", "3",
        ],
        &args,
    ));
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows[0].contains("error"), "{}", rows[0]);
    assert!(rows[1].ends_with(",ok"));
}

#[test]
fn phase_diagram_needs_thetas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = small(&out);
    assert_eq!(code(&run(&with(&["phase-diagram"], &args))), 1);

    let o = run(&with(
        &[
            "phase-diagram",
            "--thetas",
            "0.002,0.004",
            "--u-from",
            "0",
            "--u-to",
            "6",
            "--u-steps",
            "4",
            "--check-midpoint",
        ],
        &args,
    ));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("phase.csv")).unwrap();
    assert!(csv.starts_with("theta,u1_star,u2_star,status"));
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(json(&out.join("manifest.json"))["outputs"][0], "phase.csv");
}

#[test]
fn dump_writes_plot_ready_json() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&[
            "dump",
            "--window-side",
            "300",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let name = "realization-0.json";
    assert_eq!(
        fs::read_to_string(a.join(name)).unwrap(),
        fs::read_to_string(b.join(name)).unwrap()
    );
    let d = json(&a.join(name));
    let vertices = d["vertices"].as_array().unwrap();
    assert_eq!(d["relays"].as_array().unwrap().len(), vertices.len());
    assert!(d["users"].as_array().unwrap().is_empty());
    let v = &vertices[0];
    assert!(v["id"].is_u64() && v["x"].is_f64() && v["y"].is_f64());
    let s = &d["streets"][0];
    assert!(s["v1"].is_u64() && s["v2"].is_u64() && s["length"].is_f64());
    for verdict in d["verdicts"].as_array().unwrap() {
        let status = verdict["status"].as_str().unwrap();
        assert!(
            ["open-direct", "open-chain", "closed"].contains(&status),
            "{status}"
        );
    }
}

#[test]
fn dump_realizations_flag_writes_every_replication() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = small(&out);
    let o = run(&with(
        &[
            "sweep",
            "--param",
            "U",
            "--from",
            "1",
            "--to",
            "2",
            "--steps",
            "2",
            "--dump-realizations",
        ],
        &args,
    ));
    assert_eq!(code(&o), 0);
    let n = fs::read_dir(out.join("realizations")).unwrap().count();
    assert_eq!(n, 6);
    let d = json(&out.join("realizations/point-001-rep-00002.json"));
    assert_eq!(d["replication"], 2);
    assert!(
        !d["users"].as_array().unwrap().is_empty() || d["streets"].as_array().unwrap().is_empty()
    );
}
