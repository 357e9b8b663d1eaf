use std::path::Path;
use std::process::{Command, Output};

use sympinf_cli::{RunConfig, EXIT_OK, EXIT_TOLERANCE, EXIT_VALIDATION};

fn sympinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sympinf"))
        .args(args)
        .env_remove("SYMPINF_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_passes() {
    let o = sympinf(&["check", "--n", "8"]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report.is_object());
}

#[test]
fn counterexample_points_lie_on_the_ellipse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ce");
    let o = sympinf(&["counterexample", "--samples", "72", "--out", s(&out)]);
    assert_eq!(code(&o), EXIT_OK);
    let mut rdr = csv::Reader::from_path(out.join("ellipse.csv")).unwrap();
    let (a, b) = (2f64.sqrt() - 1.0, 2f64.sqrt() + 1.0);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[0].parse().unwrap();
        let y: f64 = rec[1].parse().unwrap();
        assert!(((x / a).powi(2) + (y / b).powi(2) - 1.0).abs() < 1e-10);
        rows += 1;
    }
    assert_eq!(rows, 72);
    assert!(out.join("matrix.json").exists());
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = sympinf(&[
            "simulate",
            "--n",
            "3",
            "--t",
            "0.1",
            "--dt",
            "0.01",
            "--paths",
            "4",
            "--seed",
            "7",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
        (
            std::fs::read(out.join("summary.json")).unwrap(),
            std::fs::read(out.join("paths").join("path_00003.csv")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_sympinf"))
            .args([
                "simulate", "--n", "3", "--t", "0.1", "--dt", "0.01", "--paths", "8",
            ])
            .args(["--out", s(&out)])
            .env("SYMPINF_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), EXIT_OK);
        std::fs::read(out.join("summary.json")).unwrap()
    };
    assert_eq!(run("one", "1"), run("four", "4"));
    let o = Command::new(env!("CARGO_BIN_EXE_sympinf"))
        .args(["drift", "--n", "2"])
        .env("SYMPINF_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), EXIT_VALIDATION);
}

#[test]
fn validation_errors_exit_one() {
    for args in [
        &["embed", "--n", "8", "--grid", "31"][..],
        &["frobnicate"],
        &["drift", "--n", "0"],
        &["simulate", "--dt", "2", "--t", "1"],
        &[
            "simulate", "--scheme", "leapfrog", "--n", "2", "--t", "0.01", "--dt", "0.01",
        ],
        &["drift", "--tol", "nonsense=1"],
        &["drift", "--tol", "oracle"],
        &["drift", "--cov", "/nonexistent/q.json"],
    ] {
        assert_eq!(code(&sympinf(args)), EXIT_VALIDATION, "{args:?}");
    }
}

#[test]
fn tolerance_failure_exits_two() {
    let o = sympinf(&[
        "simulate",
        "--n",
        "3",
        "--t",
        "0.1",
        "--dt",
        "0.01",
        "--paths",
        "2",
        "--tol",
        "defect=1e-12",
    ]);
    assert_eq!(code(&o), EXIT_TOLERANCE);
}

#[test]
fn outputs_are_write_once() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let args = ["drift", "--n", "2", "--out", s(&out)];
    assert_eq!(code(&sympinf(&args)), EXIT_OK);
    let before = std::fs::read(out.join("drift.csv")).unwrap();
    assert_eq!(code(&sympinf(&args)), EXIT_VALIDATION);
    assert_eq!(std::fs::read(out.join("drift.csv")).unwrap(), before);
}

#[test]
fn bad_inputs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cov = dir.path().join("q.json");
    std::fs::write(&cov, r#"{"p": 2.0, "c": -0.5, "overrides": []}"#).unwrap();
    assert_eq!(
        code(&sympinf(&["drift", "--cov", s(&cov)])),
        EXIT_VALIDATION
    );

    let g = dir.path().join("g.json");
    std::fs::write(&g, r#"{"a": [1.2], "b": []}"#).unwrap();
    assert_eq!(
        code(&sympinf(&["embed", "--n", "4", "--diffeo", s(&g)])),
        EXIT_VALIDATION
    );

    let wrong = dir.path().join("w.json");
    std::fs::write(&wrong, r#"{"schema": "sympinf.matrix/1", "a": [0.1]}"#).unwrap();
    assert_eq!(
        code(&sympinf(&["embed", "--n", "4", "--diffeo", s(&wrong)])),
        EXIT_VALIDATION
    );

    let nan = dir.path().join("m.json");
    std::fs::write(
        &nan,
        r#"{"schema": "sympinf.matrix/1", "n_trunc": 1, "entries": [[1,0],[0,0],[0,0],[NaN,0]]}"#,
    )
    .unwrap();
    assert!(sympinf::io::load_matrix_json(&nan).is_err());
}

#[test]
fn embed_accepts_a_diffeo_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let d = sympinf::diffeo::Diffeo::with_shift(0.4, vec![0.1], vec![0.05]).unwrap();
    sympinf::io::save_diffeo(&g, &d).unwrap();
    let out = dir.path().join("e");
    let o = sympinf(&["embed", "--n", "8", "--diffeo", s(&g), "--out", s(&out)]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let a = sympinf::io::load_matrix_json(&out.join("matrix.json")).unwrap();
    let want = sympinf::diffeo::embed(&d, 8, 64).unwrap();
    assert!(a.max_abs_diff(&want) < 1e-15);
}

#[test]
fn written_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = sympinf(&[
        "simulate",
        "--n",
        "2",
        "--t",
        "0.02",
        "--dt",
        "0.01",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), EXIT_OK);
    let text = std::fs::read_to_string(out.join("config.json")).unwrap();
    let cfg: RunConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg.command, "simulate");
    assert_eq!(cfg.grid, 16);
    cfg.validate().unwrap();
    assert_eq!(serde_json::to_string_pretty(&cfg).unwrap(), text.trim_end());
}

#[test]
fn library_entry_point_matches_binary() {
    assert_eq!(sympinf_cli::run(["sympinf", "drift", "--n", "2"]), EXIT_OK);
    assert_eq!(sympinf_cli::run(["sympinf", "--help"]), EXIT_OK);
    assert_eq!(sympinf_cli::run(["sympinf"]), EXIT_VALIDATION);
}
