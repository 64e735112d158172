//! End-to-end runs of the sol-lab binary: exit codes, report content,
//! argument merging, and output determinism.

use std::process::Command;
use std::sync::Arc;

use serde_json::{json, Value};
use sol_lab::lattice::{build_lattice, Sl2z};
use sol_lab::witness::curve_point;
use sol_lab::{Precision, WitnessConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sol-lab"))
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = bin().args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).expect("utf8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf8 stderr"),
    }
}

fn json_of(run: &Run) -> Value {
    serde_json::from_str(&run.stdout).expect("stdout is JSON")
}

#[test]
fn info_reports_eigen_data() {
    let r = run(&["lattice", "info", "--matrix", "2,1,1,1"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let doc = json_of(&r);
    assert_eq!(doc["char_poly"], "x^2-3x+1");
    assert_eq!(doc["discriminant"], 5);
    assert_eq!(doc["s"], "9.6242365011920694e-1");
    assert_eq!(doc["lambda"], json!({"u": "3/2", "v": "1/2", "D": 5}));
    assert_eq!(doc["p12_float"], "6.1803398874989490e-1");
    assert_eq!(doc["p21_float"], "-6.1803398874989490e-1");
}

#[test]
fn negative_trace_matrix_is_flipped() {
    let r = run(&["lattice", "info", "--matrix", "-2,-1,-1,-1"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let doc = json_of(&r);
    assert_eq!(doc["matrix"], json!([[2, 1], [1, 1]]));
    assert_eq!(doc["char_poly"], "x^2-3x+1");
}

#[test]
fn identity_matrix_rejected() {
    let r = run(&["lattice", "info", "--matrix", "1,0,0,1"]);
    assert_eq!(r.code, 2);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("trace must exceed 2"), "stderr: {}", r.stderr);
}

#[test]
fn determinant_violation_rejected() {
    let r = run(&["lattice", "info", "--matrix", "2,1,1,2"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("determinant"), "stderr: {}", r.stderr);
}

#[test]
fn malformed_matrix_rejected() {
    let r = run(&["lattice", "info", "--matrix", "2,1,1"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("4 comma-separated values"), "stderr: {}", r.stderr);
}

#[test]
fn unknown_flag_is_usage_error() {
    let r = run(&["lattice", "info", "--matrrix", "2,1,1,1"]);
    assert_eq!(r.code, 2);
}

#[test]
fn missing_matrix_is_reported() {
    let r = run(&["witness", "--point", "0,1,0.3"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("missing --matrix"), "stderr: {}", r.stderr);
}

#[test]
fn witness_nonblocked_exits_zero() {
    let r = run(&["witness", "--matrix", "2,1,1,1", "--point", "0,1,0.3", "--imax", "12"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let doc = json_of(&r);
    let report = &doc["report"];
    assert_eq!(report["verdict"], "NON_BLOCKED_AT_SCALE");
    assert_eq!(report["i0"], 1);
    assert_eq!(report["indices"].as_array().unwrap().len(), 12);
    assert_eq!(report["indices"][0]["t"], "5.0000000000000000e-1");
    assert_eq!(report["indices"][0]["integer"], false);
}

#[test]
fn witness_with_saturating_cosets_is_inconclusive() {
    // one coset per index, each sitting on its curve at t1, so every index
    // is captured and no escape witness exists
    let dir = tempfile::tempdir().unwrap();
    let lat = Arc::new(build_lattice(&Sl2z::new(2, 1, 1, 1).unwrap()).unwrap());
    let g = sol_lab::SolPoint::new(0.0, 1.0, 0.3);
    let cfg = WitnessConfig::new(lat, g, 3, 0.5, Precision::Double).unwrap();
    let cosets: Vec<[f64; 3]> = (1..=3)
        .map(|i| {
            let p = curve_point(&cfg, i, 0.5).unwrap();
            [p.x, p.y, p.z]
        })
        .collect();
    let path = dir.path().join("cosets.json");
    std::fs::write(&path, serde_json::to_string(&cosets).unwrap()).unwrap();

    let r = run(&[
        "witness",
        "--matrix",
        "2,1,1,1",
        "--point",
        "0,1,0.3",
        "--imax",
        "3",
        "--cosets",
        path.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 1, "stderr: {}", r.stderr);
    let doc = json_of(&r);
    assert_eq!(doc["report"]["verdict"], "INCONCLUSIVE");
    assert_eq!(doc["report"]["escape_witness"], Value::Null);
    for (i, coset) in doc["report"]["cosets"].as_array().unwrap().iter().enumerate() {
        let captures = coset["captures"].as_array().unwrap();
        assert!(
            captures.iter().any(|c| c["index"] == i + 1),
            "coset {i} misses its own index"
        );
    }
}

#[test]
fn verify_canonical_passes_and_tampered_fails() {
    let ok = run(&["lattice", "verify", "--matrix", "3,1,2,1"]);
    assert_eq!(ok.code, 0, "stderr: {}", ok.stderr);
    assert_eq!(json_of(&ok)["report"]["pass"], true);

    let dir = tempfile::tempdir().unwrap();
    let canonical = json_of(&run(&["lattice", "info", "--matrix", "3,1,2,1"]));
    let mut tau1: Vec<f64> = canonical["tau1"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().parse().unwrap())
        .collect();
    tau1[1] += 0.5;
    let pres = json!({
        "tau1": tau1,
        "tau2": canonical["tau2"],
        "tau3": canonical["tau3"],
    });
    let path = dir.path().join("pres.json");
    std::fs::write(&path, pres.to_string()).unwrap();

    let bad = run(&[
        "lattice",
        "verify",
        "--matrix",
        "3,1,2,1",
        "--presentation",
        path.to_str().unwrap(),
    ]);
    assert_eq!(bad.code, 1, "stderr: {}", bad.stderr);
    let doc = json_of(&bad);
    assert_eq!(doc["report"]["pass"], false);
    assert_eq!(doc["report"]["diagonalization_pass"], false);
}

#[test]
fn normalize_moves_height_generator_to_axis() {
    let dir = tempfile::tempdir().unwrap();
    let canonical = json_of(&run(&["lattice", "info", "--matrix", "2,1,1,1"]));
    let tau3: Vec<f64> = canonical["tau3"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().parse().unwrap())
        .collect();
    let pres = json!({
        "tau1": canonical["tau1"],
        "tau2": canonical["tau2"],
        "tau3": [tau3[0] + 0.4, tau3[1] - 0.2, tau3[2]],
    });
    let path = dir.path().join("pres.json");
    std::fs::write(&path, pres.to_string()).unwrap();

    let r = run(&[
        "lattice",
        "normalize",
        "--presentation",
        path.to_str().unwrap(),
        "--matrix",
        "2,1,1,1",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let doc = json_of(&r);
    let t3 = doc["presentation"]["tau3"].as_array().unwrap();
    let x: f64 = t3[0].as_str().unwrap().parse().unwrap();
    let y: f64 = t3[1].as_str().unwrap().parse().unwrap();
    assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
    assert_eq!(doc["report"]["pass"], true);
}

#[test]
fn json_args_fill_in_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("args.json");
    std::fs::write(
        &path,
        json!({"matrix": "2,1,1,1", "point": "0,1,0.3", "imax": 5}).to_string(),
    )
    .unwrap();

    let merged = run(&["witness", "--json-args", path.to_str().unwrap()]);
    assert_eq!(merged.code, 0, "stderr: {}", merged.stderr);
    assert_eq!(json_of(&merged)["report"]["imax"], 5);

    let overridden = run(&["witness", "--json-args", path.to_str().unwrap(), "--imax", "3"]);
    assert_eq!(json_of(&overridden)["report"]["imax"], 3);
}

#[test]
fn json_args_reject_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("args.json");
    std::fs::write(&path, json!({"matrx": "2,1,1,1"}).to_string()).unwrap();
    let r = run(&["lattice", "info", "--json-args", path.to_str().unwrap()]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("unknown argument"), "stderr: {}", r.stderr);
}

#[test]
fn environment_overrides_precision_flag() {
    let out = bin()
        .args(["witness", "--matrix", "2,1,1,1", "--point", "0,1,0.3", "--imax", "3"])
        .args(["--precision", "double"])
        .env("SOL_LAB_PRECISION", "big50")
        .output()
        .unwrap();
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["report"]["precision"], "big50");

    let bad = bin()
        .args(["witness", "--matrix", "2,1,1,1", "--point", "0,1,0.3"])
        .env("SOL_LAB_PRECISION", "quad")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_thread_counts() {
    let args = |threads: &'static str| {
        [
            "density",
            "--matrix",
            "2,1,1,1",
            "--window",
            "5,5,1",
            "--record-targets",
            "--threads",
            threads,
        ]
    };
    let a = run(&args("1"));
    let b = run(&args("4"));
    assert_eq!(a.code, 0, "stderr: {}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn density_reports_full_coverage_of_unit_box() {
    let r = run(&["density", "--matrix", "2,1,1,1", "--eps", "0.05", "--window", "13,13,2"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let doc = json_of(&r);
    assert_eq!(doc["report"]["coverage"], "1.0000000000000000e0");
    assert_eq!(doc["report"]["misses"].as_array().unwrap().len(), 0);
}

#[test]
fn csv_output_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.csv");
    let r = run(&[
        "curves",
        "log-set",
        "--matrix",
        "2,1,1,1",
        "--window",
        "1,1,1",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,q,r,a1,a2,a3");
    assert_eq!(lines.len(), 1 + 27);
    assert!(lines[1].starts_with("-1,-1,-1,"));
}

#[test]
fn block_with_midpoint_blockers_stops_axis_curves() {
    let r = run(&[
        "curves",
        "block",
        "--matrix",
        "2,1,1,1",
        "--point",
        "0,1,0.3",
        "--window",
        "2,2,5",
        "--tgrid",
        "101",
        "--midpoint-blockers",
        "3",
        "--threads",
        "2",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let doc = json_of(&r);
    assert_eq!(doc["blocker_count"], 3);
    let blocked = doc["report"]["blocked_curves"].as_array().unwrap();
    for want in 1..=3i64 {
        let hit = blocked
            .iter()
            .find(|h| h["p"] == 0 && h["q"] == 0 && h["r"] == want)
            .unwrap_or_else(|| panic!("axis curve r={want} not blocked"));
        assert_eq!(hit["t"], "5.0000000000000000e-1");
    }
    let evading = doc["report"]["evading_curves"].as_array().unwrap();
    for want in 4..=5i64 {
        assert!(
            evading.iter().any(|e| e[0] == 0 && e[1] == 0 && e[2] == want),
            "axis curve r={want} should evade"
        );
    }
}

#[test]
fn block_requires_exactly_one_blocker_source() {
    let neither = run(&["curves", "block", "--matrix", "2,1,1,1"]);
    assert_eq!(neither.code, 2);
    assert!(neither.stderr.contains("--blockers"), "stderr: {}", neither.stderr);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.json");
    std::fs::write(&path, "[[0.1, 0.1, 0.1]]").unwrap();
    let both = run(&[
        "curves",
        "block",
        "--matrix",
        "2,1,1,1",
        "--blockers",
        path.to_str().unwrap(),
        "--midpoint-blockers",
        "2",
    ]);
    assert_eq!(both.code, 2);
    assert!(both.stderr.contains("mutually exclusive"), "stderr: {}", both.stderr);
}

#[test]
fn export_plot_writes_one_file_per_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plots");
    let r = run(&[
        "export-plot",
        "--matrix",
        "2,1,1,1",
        "--point",
        "0,1,0.3",
        "--window",
        "1,1,1",
        "--tgrid",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let doc = json_of(&r);
    assert_eq!(doc["curves"], 27);
    assert_eq!(doc["samples_per_curve"], 5);

    let files: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), 27);
    let origin = std::fs::read_to_string(out.join("curve_0_0_0.csv")).unwrap();
    let lines: Vec<&str> = origin.lines().collect();
    assert_eq!(lines[0], "t,x,y,z");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0.0000000000000000e0,"));
    assert!(lines[5].starts_with("1.0000000000000000e0,"));
}

#[test]
fn export_plot_stdout_is_combined_table() {
    let r = run(&[
        "export-plot",
        "--matrix",
        "2,1,1,1",
        "--window",
        "1,1,1",
        "--tgrid",
        "3",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "p,q,r,t,x,y,z");
    assert_eq!(lines.len(), 1 + 27 * 5);
}

fn help_text(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn help_covers_every_subcommand() {
    let top = help_text(&["--help"]);
    for name in ["lattice", "curves", "witness", "density", "export-plot"] {
        assert!(top.contains(name), "top help misses {name}");
    }
    assert!(top.contains("Exit status"));
    let witness = help_text(&["witness", "--help"]);
    for flag in ["--matrix", "--point", "--imax", "--t1", "--precision", "--cosets"] {
        assert!(witness.contains(flag), "witness help misses {flag}");
    }
    assert!(witness.contains("SOL_LAB_PRECISION"));
}
