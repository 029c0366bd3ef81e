//! End-to-end tests of the `ccd-sim` binary: exit codes, artifact shape,
//! config precedence. Ensemble sizes are kept tiny; statistical quality is
//! covered elsewhere.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ccd_sim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccd-sim"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn unknown_config_key_is_rejected_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "omega_mhz = 40\n").unwrap();
    let out = ccd_sim(&["rabi", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("omega_mhz"));
}

#[test]
fn malformed_values_and_missing_file_are_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "seed = notanumber\n").unwrap();
    let out = ccd_sim(&["rabi", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);

    let out = ccd_sim(&["rabi", "--config", "/nonexistent.cfg"], dir.path());
    assert_eq!(code(&out), 2);

    // clap usage errors share the config exit code
    let out = ccd_sim(&["rabi", "--frame", "int7"], dir.path());
    assert_eq!(code(&out), 2);
    let out = ccd_sim(&["no-such-subcommand"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn oversized_timestep_is_an_invariant_violation_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dt.cfg");
    fs::write(&cfg, "dt_us = 1.0\n").unwrap();
    let out = ccd_sim(
        &[
            "rabi",
            "--config",
            cfg.to_str().unwrap(),
            "--realizations",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("invariant"));
}

#[test]
fn lab_frame_horizon_is_capped_but_short_runs_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccd_sim(&["rabi", "--frame", "lab"], dir.path());
    assert_eq!(code(&out), 2);

    let out = ccd_sim(
        &[
            "rabi",
            "--frame",
            "lab",
            "--horizon-us",
            "0.1",
            "--realizations",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn check_mode_gates_the_exit_code_but_still_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    // noise five times the reference level pushes the fitted rate far
    // outside the (ensemble-widened) tolerance
    let cfg = dir.path().join("hot.cfg");
    fs::write(&cfg, "amp_sigma_rel = 0.012\nhorizon_us = 3\n").unwrap();
    let out = ccd_sim(
        &[
            "rabi",
            "--config",
            cfg.to_str().unwrap(),
            "--realizations",
            "20",
            "--check",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    assert!(dir.path().join("rabi.csv").exists());
    assert!(dir.path().join("rabi.summary.json").exists());

    // same run without --check reports the misses but exits 0
    let out = ccd_sim(
        &[
            "rabi",
            "--config",
            cfg.to_str().unwrap(),
            "--realizations",
            "20",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
}

#[test]
fn selfcheck_passes_and_rejects_experiment_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccd_sim(&["noise-selfcheck", "--check", "--seed", "3"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("noise-selfcheck.summary.json").exists());

    let cfg = dir.path().join("x.cfg");
    fs::write(&cfg, "omega1_mhz = 40\n").unwrap();
    let out = ccd_sim(
        &["noise-selfcheck", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn identical_seeds_give_identical_artifacts() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let args = [
        "rabi",
        "--seed",
        "42",
        "--realizations",
        "15",
        "--horizon-us",
        "3",
    ];
    assert_eq!(code(&ccd_sim(&args, d1.path())), 0);
    assert_eq!(code(&ccd_sim(&args, d2.path())), 0);
    let a = fs::read(d1.path().join("rabi.csv")).unwrap();
    let b = fs::read(d2.path().join("rabi.csv")).unwrap();
    assert_eq!(a, b);
    let a = fs::read_to_string(d1.path().join("rabi.summary.json")).unwrap();
    let b = fs::read_to_string(d2.path().join("rabi.summary.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_header_is_stable_and_floats_are_plain() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccd_sim(
        &["rabi", "--realizations", "3", "--horizon-us", "2"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("rabi.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time_us,bloch_x,bloch_y,bloch_z,p_down,p_up,overlap_ref,overlap_ideal,purity,\
         bloch_x_se,bloch_y_se,bloch_z_se,p_down_se,p_up_se,overlap_ref_se,overlap_ideal_se,\
         purity_se"
    );
    for line in lines {
        assert_eq!(line.split(',').count(), 17);
        for field in line.split(',') {
            let v: f64 = field.parse().expect("plain float field");
            assert!(v.is_finite());
        }
    }
}

#[test]
fn manifest_config_echo_reproduces_the_run() {
    let d1 = tempfile::tempdir().unwrap();
    let out = ccd_sim(
        &[
            "rabi",
            "--seed",
            "9",
            "--realizations",
            "10",
            "--horizon-us",
            "2.5",
        ],
        d1.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d1.path().join("rabi.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "rabi");
    assert_eq!(manifest["master_seed"], 9);
    let cfg_map = manifest["resolved_config"].as_object().unwrap();
    assert_eq!(cfg_map["seed"], "9");
    assert_eq!(cfg_map["realizations"], "10");
    assert_eq!(cfg_map["omega1_mhz"], "40");

    // replay from the manifest alone
    let text: String = cfg_map
        .iter()
        .map(|(k, v)| format!("{k} = {}\n", v.as_str().unwrap()))
        .collect();
    let d2 = tempfile::tempdir().unwrap();
    let cfg = d2.path().join("replay.cfg");
    fs::write(&cfg, text).unwrap();
    let out = ccd_sim(&["rabi", "--config", cfg.to_str().unwrap()], d2.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read(d1.path().join("rabi.csv")).unwrap(),
        fs::read(d2.path().join("rabi.csv")).unwrap()
    );
}

#[test]
fn flag_overrides_beat_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "seed = 1\nrealizations = 5\nhorizon_us = 2\n").unwrap();
    let out = ccd_sim(
        &["rabi", "--config", cfg.to_str().unwrap(), "--seed", "2"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rabi.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"], 2);
    assert_eq!(manifest["resolved_config"]["seed"], "2");
    assert_eq!(manifest["resolved_config"]["realizations"], "5");
}

#[test]
fn summary_json_carries_the_reference_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = ccd_sim(
        &["rabi", "--realizations", "10", "--horizon-us", "3"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rabi.summary.json")).unwrap())
            .unwrap();
    let checks = summary["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 2);
    for c in checks {
        assert!(c["name"].is_string());
        assert!(c["expected"].is_number());
        assert!(c["measured"].is_number());
        assert!(c["pass"].is_boolean());
    }
    assert!(summary["scalars"]["t2_us"].is_number());
    assert!(summary["all_checks_passed"].is_boolean());
    assert_eq!(summary["resolved_config"]["variant"], "refined");
}

#[test]
fn subcommand_names_match_the_documented_set() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "rabi",
        "persistent-rabi",
        "dressed-ramsey",
        "t2-sweep",
        "order-scaling",
        "dressed-control",
        "two-qubit-fidelity",
        "noise-selfcheck",
    ] {
        let out = ccd_sim(&[sub, "--help"], dir.path());
        assert_eq!(code(&out), 0, "{sub}");
    }
}
