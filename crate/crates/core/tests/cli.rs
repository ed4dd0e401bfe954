use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn epd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epd"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

fn error_line(out: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

#[test]
fn ot_prints_the_fixture_values() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "birth,death\n0,1\n").unwrap();
    fs::write(dir.path().join("two.csv"), "birth,death\n0,1\n0,2\n").unwrap();
    fs::write(dir.path().join("empty.csv"), "birth,death\n").unwrap();

    let out = epd(&["ot", "a.csv", "empty.csv", "--p", "2"], dir.path());
    assert!(out.status.success());
    let value: f64 = stdout(&out).parse().unwrap();
    assert!((value - 0.5f64.sqrt()).abs() < 1e-12);

    let out = epd(
        &[
            "ot",
            "two.csv",
            "empty.csv",
            "--p",
            "1",
            "--plan",
            "plan.csv",
        ],
        dir.path(),
    );
    let value: f64 = stdout(&out).parse().unwrap();
    assert!((value - 3.0 / 2f64.sqrt()).abs() < 1e-12);
    let plan = fs::read_to_string(dir.path().join("plan.csv")).unwrap();
    assert!(plan.starts_with("source_idx,target_idx,mass,cost\n"));
    assert_eq!(plan.lines().filter(|l| l.contains(",-1,")).count(), 2);
}

#[test]
fn exit_codes_and_error_lines() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "birth,death\n0,1\n").unwrap();

    let out = epd(&["ot", "a.csv", "a.csv", "--p", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "validation");

    let out = epd(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    fs::write(dir.path().join("bad.csv"), "birth,death\n0,x\n").unwrap();
    let out = epd(&["ot", "a.csv", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(error_line(&out)["message"]
        .as_str()
        .unwrap()
        .contains("bad.csv"));

    let out = epd(&["ot", "a.csv", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "runtime");

    let out = epd(&["--help"], dir.path());
    assert!(out.status.success());
    let help = stdout(&out);
    for sub in [
        "sample",
        "ph",
        "estimate",
        "density-grid",
        "ot",
        "bound",
        "converge",
        "fit",
    ] {
        assert!(help.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn sample_ph_estimate_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("diagrams")).unwrap();
    for stream in 0..5 {
        let cloud = format!("cloud{stream}.csv");
        let stream = stream.to_string();
        let args = [
            "sample",
            "--shape",
            "circle",
            "--n",
            "40",
            "--noise-var",
            "0.01",
        ];
        let out = epd(
            &[
                &args[..],
                &["--seed", "2", "--stream", &stream, "--out", &cloud],
            ]
            .concat(),
            d,
        );
        assert!(out.status.success());
        let diagram = format!("diagrams/h1_{stream}.csv");
        let out = epd(
            &["ph", "--in", &cloud, "--degree", "1", "--out", &diagram],
            d,
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }

    let out = epd(
        &[
            "estimate", "--in", "diagrams", "--K", "auto", "--J", "auto", "--out", "est.json",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("K=3 J=3"));
    let est: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("est.json")).unwrap()).unwrap();
    assert_eq!(est["K"], 3);
    assert_eq!(est["J"], 3);
    assert_eq!(est["samples"], 5);

    let out = epd(
        &[
            "density-grid",
            "--estimator",
            "est.json",
            "--level",
            "3",
            "--out",
            "grid.csv",
        ],
        d,
    );
    assert!(out.status.success());
    let grid = fs::read_to_string(d.join("grid.csv")).unwrap();
    assert!(grid.starts_with("u,v,value\n"));
    assert_eq!(grid.lines().count(), 1 + 64);

    let out = epd(
        &[
            "bound",
            "diagrams/h1_0.csv",
            "diagrams/h1_1.csv",
            "--p",
            "2",
            "--J",
            "4",
        ],
        d,
    );
    assert!(out.status.success());
    assert!(stdout(&out).parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn converge_writes_records_fits_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("config.json"),
        r#"{"shape": {"kind": "circle", "radius": 1.0}, "n": 30, "noise_var": 0.01, "M": 24, "Ns": [4, 8], "replicates": 2}"#,
    )
    .unwrap();
    let args = [
        "converge",
        "--config",
        "config.json",
        "--Ns",
        "4,8,16,24",
        "--p",
        "1,2",
        "--tau",
        "0,1",
        "--seed",
        "3",
        "--threads",
        "1",
    ];
    for out_dir in ["run1", "run2"] {
        let out = epd(&[&args[..], &["--out-dir", out_dir]].concat(), d);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let records = fs::read_to_string(d.join("run1/records.csv")).unwrap();
    assert_eq!(
        records,
        fs::read_to_string(d.join("run2/records.csv")).unwrap()
    );
    let mut lines = records.lines();
    assert_eq!(
        lines.next(),
        Some("p,tau,N,replicate,error,nnz_coeffs,seconds")
    );
    // 2 p x 2 tau x 4 N x 2 replicates
    assert_eq!(lines.count(), 32);

    let fits: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("run1/fit.json")).unwrap()).unwrap();
    let fits = fits.as_array().unwrap();
    assert_eq!(fits.len(), 8);
    for key in ["p", "tau", "model", "a", "b", "residual"] {
        assert!(fits[0].get(key).is_some(), "missing {key}");
    }
    let reference: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("run1/reference.json")).unwrap()).unwrap();
    assert!(reference["quadrature_error"].as_array().unwrap().len() == 2);

    let out = epd(
        &[
            "fit",
            "--records",
            "run1/records.csv",
            "--model",
            "power_log",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let refit: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(refit.as_array().unwrap().len(), 4);
    assert_eq!(refit[0]["model"], "power_log");

    let out = epd(&["converge", "--config", "config.json", "--Ns", "4,100"], d);
    assert_eq!(out.status.code(), Some(1));
}
