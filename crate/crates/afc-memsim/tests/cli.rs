//! CLI contract: subcommands, exit codes, output files, determinism.

use afc_memsim::cli::cli_main;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["afc-memsim"];
    argv.extend_from_slice(args);
    cli_main(argv)
}

#[test]
fn echo_runs_from_preset_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("echo");
    let code = run(&["echo", "--config", "paper_200ns", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let report = std::fs::read_to_string(out.join("echo_report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["experiment"], "echo");
    for key in ["config_hash", "seed", "version", "results"] {
        assert!(json.get(key).is_some(), "missing key {key}");
    }
}

#[test]
fn qpt_json_report_has_contracted_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("qpt");
    // Small trial count keeps the test fast; --trials overrides the preset.
    let code = run(&[
        "qpt",
        "--config",
        "paper_200ns",
        "--trials",
        "2000",
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let report = std::fs::read_to_string(out.join("qpt_report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    let results = &json["results"];
    for key in ["chi_real", "chi_imag", "f_p", "f_p_std", "f_avg"] {
        assert!(results.get(key).is_some(), "missing results key {key}");
    }
    assert_eq!(results["trials_per_setting"], 2000);
}

#[test]
fn csv_format_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("csv");
    let code = run(&[
        "qpt",
        "--config",
        "paper_200ns",
        "--trials",
        "2000",
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    for file in ["qpt_report.json", "chi_mle.csv", "chi_linear.csv", "tomography_counts.csv"] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let chi = std::fs::read_to_string(out.join("chi_mle.csv")).unwrap();
    assert!(chi.starts_with("row,col,re,im\n"));
    assert_eq!(chi.lines().count(), 17);
    let counts = std::fs::read_to_string(out.join("tomography_counts.csv")).unwrap();
    assert!(counts.starts_with("input,setting,port,trials,clicks\n"));
    assert_eq!(counts.lines().count(), 37);
}

#[test]
fn efficiency_csv_has_two_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eff");
    let code = run(&[
        "efficiency",
        "--config",
        "ideal",
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    let curve = std::fs::read_to_string(out.join("efficiency_curve.csv")).unwrap();
    assert!(curve.starts_with("storage_time_ns,efficiency\n"));
}

#[test]
fn missing_config_exits_one_with_field_message() {
    let code = run(&["echo", "--config", "no_such_preset"]);
    assert_eq!(code, 1);
}

#[test]
fn invalid_field_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let mut text = afc_memsim::config::PRESET_PAPER_200NS.to_string();
    text = text.replace("tooth_fwhm_mhz = 1.4", "tooth_fwhm_mhz = 99.0");
    std::fs::write(&bad, text).unwrap();
    let code = run(&["echo", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn same_config_and_seed_reproduce_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let code = run(&[
            "qpt",
            "--config",
            "paper_200ns",
            "--seed",
            "77",
            "--trials",
            "5000",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let a = std::fs::read(out_a.join("qpt_report.json")).unwrap();
    let b = std::fs::read(out_b.join("qpt_report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seed_override_changes_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, seed) in [(&out_a, "77"), (&out_b, "78")] {
        let code = run(&[
            "qpt",
            "--config",
            "paper_200ns",
            "--seed",
            seed,
            "--trials",
            "5000",
            "--out",
            out.to_str().unwrap(),
            "--format",
            "csv",
        ]);
        assert_eq!(code, 0);
    }
    let a = std::fs::read(out_a.join("tomography_counts.csv")).unwrap();
    let b = std::fs::read(out_b.join("tomography_counts.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn null_phase_reports_angle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("np");
    let code = run(&["null-phase", "--config", "paper_200ns", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let report = std::fs::read_to_string(out.join("null_phase_report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(json["results"]["fidelity_after"].as_f64().unwrap() > 0.999);
}

#[test]
fn oracle_subcommand_reports_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle");
    // The ideal preset has a narrow-tooth comb; shrink atoms for speed via
    // a config copy.
    let cfg_path = dir.path().join("cfg.toml");
    let text = afc_memsim::config::PRESET_PAPER_200NS
        .to_string()
        .replace("n_atoms = 100000", "n_atoms = 20000");
    std::fs::write(&cfg_path, text).unwrap();
    let code = run(&[
        "oracle",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code, 0);
    assert!(out.join("oracle_comparison.csv").exists());
    let report = std::fs::read_to_string(out.join("oracle_report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    let peak = json["results"]["comparison"]["oracle_peak_time_ns"].as_f64().unwrap();
    assert!((peak - 200.0).abs() < 3.0, "oracle peak at {peak}");
}
