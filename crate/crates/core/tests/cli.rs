//! End-to-end tests of the `holonomy-sim` binary: exit codes, output
//! formats, and the file interfaces (sequence JSON, scan CSV, layout CSV).

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holonomy-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

#[test]
fn gate_report_has_expected_values() {
    let report = stdout_json(&["gate", "--theta", "2.356194490192345"]);
    let table = report["probability_table"].as_array().unwrap();
    for row in table {
        for cell in row.as_array().unwrap() {
            assert!((cell.as_f64().unwrap() - 0.5).abs() < 1e-6);
        }
    }
    assert!(report["fidelity_vs_analytic"].as_f64().unwrap() > 1.0 - 1e-9);
    assert_eq!(report["config"]["seed"].as_u64().unwrap(), 7);
    assert_eq!(report["config"]["command"].as_str().unwrap(), "gate");
}

#[test]
fn gate_accepts_degrees() {
    let rad = stdout_json(&["gate", "--theta", "2.356194490192345"]);
    let deg = stdout_json(&["gate", "--theta", "135", "--degrees"]);
    let a = rad["gate"]["theta"].as_f64().unwrap();
    let b = deg["gate"]["theta"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn gate_theta_zero_keeps_logical_identity_table() {
    let report = stdout_json(&["gate", "--theta", "0", "--envelope", "constant"]);
    let table = report["probability_table"].as_array().unwrap();
    assert!((table[0][0].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((table[1][1].as_f64().unwrap() - 1.0).abs() < 1e-6);
    // the unitary itself carries the −1 on the |1⟩ entry
    let u11 = &report["simulated_unitary"][2][2];
    assert!((u11[0].as_f64().unwrap() + 1.0).abs() < 1e-6);
}

#[test]
fn usage_errors_exit_2() {
    // unknown flag
    assert_eq!(run(&["gate", "--bogus"]).status.code(), Some(2));
    // missing required argument
    assert_eq!(run(&["gate"]).status.code(), Some(2));
    // malformed q grid
    assert_eq!(
        run(&["hom", "--theta", "1.0", "--q-grid", "zzz"]).status.code(),
        Some(2)
    );
    // neither file nor preset
    assert_eq!(run(&["sequence"]).status.code(), Some(2));
    // empty sequence file
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "[]").unwrap();
    assert_eq!(
        run(&["sequence", "--file", empty.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn computation_errors_exit_1() {
    // coupling exceeds the fit prefactor: full-cosine peak Ω with a tiny a
    let out = run(&[
        "layout",
        "--theta",
        "1.5707963267948966",
        "--envelope",
        "full-cosine",
        "--fit-a",
        "2.0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn sequence_file_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seq.json");
    std::fs::write(
        &path,
        r#"[
            {"type": "gate", "theta": 2.356194490192345},
            {"type": "inert", "length": 0.5},
            {"type": "gate", "theta": 2.356194490192345}
        ]"#,
    )
    .unwrap();
    let report = stdout_json(&["sequence", "--file", path.to_str().unwrap()]);
    // H then H through an inert section is the identity on the logical block
    let table = report["logical_table"].as_array().unwrap();
    assert!((table[0][0].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((table[1][1].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(report["max_deviation_from_analytic"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["elements"].as_array().unwrap().len(), 3);
}

#[test]
fn sequence_presets_report_game_and_commutator() {
    let flip = stdout_json(&["sequence", "--preset", "penny-flip"]);
    assert!((flip["q_win_probability"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let noflip = stdout_json(&["sequence", "--preset", "penny-noflip"]);
    assert!((noflip["q_win_probability"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let commutator = stdout_json(&["sequence", "--preset", "commutator"]);
    let diff = commutator["commutator"]["max_difference"].as_f64().unwrap();
    assert!((diff - 1.0).abs() < 1e-6);
}

#[test]
fn layout_csv_has_schema_and_symmetry() {
    let out = run(&[
        "layout",
        "--theta",
        "1.5707963267948966",
        "--envelope",
        "full-cosine",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "z_mm,x_L_um,x_C_um,x_R_um,segment");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 5);
        let x_l: f64 = fields[1].parse().unwrap();
        let x_r: f64 = fields[3].parse().unwrap();
        assert!((x_l + x_r).abs() < 1e-9, "mirror symmetry broken: {line}");
        assert_eq!(fields[4], "gate");
    }
}

#[test]
fn layout_from_scan_csv_echoes_fit() {
    let dir = tempfile::tempdir().unwrap();
    let scan = dir.path().join("scan.csv");
    let mut text = String::from("delta_um,kappa_per_cm\n");
    for i in 0..8 {
        let delta = 5.0 + 3.0 * i as f64;
        text.push_str(&format!("{delta},{}\n", 20.0 * (-0.2f64 * delta).exp()));
    }
    std::fs::write(&scan, text).unwrap();

    let report = stdout_json(&[
        "layout",
        "--theta",
        "1.5707963267948966",
        "--envelope",
        "full-cosine",
        "--scan",
        scan.to_str().unwrap(),
    ]);
    let a = report["metadata"]["fit"]["a"].as_f64().unwrap();
    let b = report["metadata"]["fit"]["b"].as_f64().unwrap();
    assert!((a - 20.0).abs() < 1e-9);
    assert!((b - 0.2).abs() < 1e-12);
    assert!(report["scan_fit_residual"].as_f64().unwrap() < 1e-10);
    assert!(report["metadata"]["cyclicity_residual"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn layout_sequence_marks_decoupled_regions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seq.json");
    std::fs::write(
        &path,
        r#"[
            {"type": "gate", "theta": 1.5707963267948966},
            {"type": "inert", "length": 0.6},
            {"type": "gate", "theta": 1.5707963267948966}
        ]"#,
    )
    .unwrap();
    let out = run(&[
        "layout",
        "--sequence-file",
        path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let labels: std::collections::HashSet<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert!(labels.contains("gate"));
    assert!(labels.contains("decoupled"));
}

#[test]
fn hom_reports_reference_benchmark() {
    let report = stdout_json(&["hom", "--theta", "2.356194490192345"]);
    assert!((report["visibility"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(
        (report["experimental_reference"]["visibility"].as_f64().unwrap() - 0.95).abs() < 1e-12
    );
    let curve = report["curve"].as_array().unwrap();
    assert_eq!(curve.len(), 21);
    assert!((curve[0]["coincidence"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!(curve[20]["coincidence"].as_f64().unwrap() < 1e-9);
}

#[test]
fn robustness_json_contains_trials() {
    let report = stdout_json(&[
        "robustness",
        "--theta",
        "2.356194490192345",
        "--kind",
        "weight-jitter",
        "--sigma",
        "0.0",
        "--trials",
        "4",
    ]);
    let stats = &report["statistics"];
    assert!((stats["mean_fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(stats["trials"].as_array().unwrap().len(), 4);
}

#[test]
fn show_config_prints_defaults_without_running() {
    let report = stdout_json(&["gate", "--theta", "1.0", "--show-config"]);
    assert_eq!(report["defaults"]["seed"].as_u64().unwrap(), 7);
    assert!(
        (report["defaults"]["fan_coupling_budget_rad"].as_f64().unwrap() - 0.01).abs() < 1e-12
    );
    assert!(report.get("probability_table").is_none());
}

#[test]
fn out_flag_writes_file_instead_of_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&[
        "gate",
        "--theta",
        "1.5707963267948966",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(written["config"]["command"].as_str().unwrap(), "gate");
}
