//! End-to-end checks of the `gamow-lab` binary: real process, real exit
//! codes, byte-level determinism.

use std::path::PathBuf;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_gamow-lab");

fn write_cfg(tag: &str, body: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("gamow-lab-{tag}-{}.cfg", std::process::id()));
    std::fs::write(&path, body).expect("temp config written");
    path
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().expect("no signal"),
        String::from_utf8(out.stdout).expect("utf8 stdout"),
        String::from_utf8(out.stderr).expect("utf8 stderr"),
    )
}

/// Data rows of a csv table or report: comment lines stripped.
fn rows(stdout: &str) -> Vec<Vec<String>> {
    stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split(',').map(|c| c.trim().to_string()).collect())
        .collect()
}

fn report_value(stdout: &str, key: &str) -> String {
    rows(stdout)
        .into_iter()
        .find(|r| r[0] == key)
        .unwrap_or_else(|| panic!("report key {key} present"))[1]
        .clone()
}

#[test]
fn survival_fullline_sodium_matches_exponential() {
    let cfg = write_cfg(
        "surv-na",
        "line.preset = sodium-3p\nsupport = full-line\n\
         time.min = 0\ntime.max = 5\ntime.count = 11\ntime.unit = tau\n",
    );
    let (code, out, _) = run(&["survival", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let gamma = 4.0538e-8;
    let data = rows(&out);
    assert_eq!(data.len(), 11);
    for row in data {
        let t: f64 = row[0].parse().unwrap();
        let abs2: f64 = row[3].parse().unwrap();
        let expect = (-gamma * t).exp();
        assert!(
            (abs2 - expect).abs() < 1e-6,
            "t={t}: {abs2} vs {expect}"
        );
    }
}

#[test]
fn survival_fullline_is_zero_before_preparation() {
    let cfg = write_cfg(
        "surv-neg",
        "line.e_r = 1.0\nline.gamma = 0.1\nsupport = full-line\n\
         time.min = -10\ntime.max = -1\ntime.count = 10\n",
    );
    let (code, out, _) = run(&["survival", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    for row in rows(&out) {
        let abs2: f64 = row[3].parse().unwrap();
        assert!(abs2 < 1e-16, "row {row:?}");
    }
}

#[test]
fn survival_halfline_log_tail_has_inverse_square_slope() {
    let cfg = write_cfg(
        "surv-tail",
        "line.e_r = 1.0\nline.gamma = 0.1\nsupport = half-line\n\
         time.min = 50\ntime.max = 500\ntime.count = 10\n\
         time.spacing = log\ntime.unit = tau\n",
    );
    let (code, out, _) = run(&["survival", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let pts: Vec<(f64, f64)> = rows(&out)
        .iter()
        .map(|r| {
            let t: f64 = r[0].parse().unwrap();
            let p: f64 = r[3].parse().unwrap();
            (t.ln(), p.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    assert!((slope + 2.0).abs() < 0.05, "log-log slope {slope}");
}

#[test]
fn norm_report_matches_closed_form_and_converges() {
    let cfg = write_cfg(
        "norm",
        "line.e_r = 1.0\nline.gamma = 0.2\nnorm.order = 6\n",
    );
    let (code, out, _) = run(&["norm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let closed: f64 = report_value(&out, "closed_form").parse().unwrap();
    assert!((closed - 0.968274).abs() < 1e-6);
    let s6: f64 = report_value(&out, "series_order_6").parse().unwrap();
    assert!((s6 - closed).abs() < 1e-9);
    assert_eq!(report_value(&out, "full_line"), "1");
}

#[test]
fn norm_wide_line_series_request_is_a_validation_error() {
    let cfg = write_cfg(
        "norm-wide",
        "line.e_r = 1.0\nline.gamma = 2.5\nnorm.order = 2\n",
    );
    let (code, out, err) = run(&["norm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("series"));
}

#[test]
fn fit_sodium_noise_free_prints_the_measured_lifetime() {
    let cfg = write_cfg("fit-na", "line.preset = sodium-3p\n");
    let (code, out, _) = run(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let tau_ns: f64 = report_value(&out, "tau_ns").parse().unwrap();
    assert!((tau_ns - 16.237).abs() <= 1e-3, "tau {tau_ns} ns");
    assert_eq!(report_value(&out, "width_rate_consistency"), "PASS");
}

#[test]
fn fit_fe57_width_agrees_with_direct_lifetime() {
    let cfg = write_cfg("fit-fe", "line.preset = fe57\n");
    let (code, out, _) = run(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let ratio: f64 = report_value(&out, "direct_lifetime_ratio").parse().unwrap();
    assert!((ratio - 1.0).abs() <= 0.10, "ratio {ratio}");
    assert_eq!(report_value(&out, "direct_lifetime_agreement"), "PASS");
}

#[test]
fn fit_seeded_noisy_run_is_byte_identical() {
    let cfg = write_cfg(
        "fit-noisy",
        "line.e_r = 1.0\nline.gamma = 0.1\nfit.noise_sigma = 4.0\n\
         fit.poisson = true\nfit.n_initial = 1000000\n",
    );
    let path = cfg.to_str().unwrap();
    let first = run(&["fit", "--config", path, "--seed", "7"]);
    let second = run(&["fit", "--config", path, "--seed", "7"]);
    assert_eq!(first.0, 0);
    assert_eq!(first, second, "same seed, same bytes");
    let other = run(&["fit", "--config", path, "--seed", "8"]);
    assert_ne!(first.1, other.1, "different seed, different data");
}

#[test]
fn fermi_fullline_silent_before_arrival_halfline_not() {
    let cfg = write_cfg(
        "fermi",
        "line.e_r = 1.0\nline.gamma = 0.1\nfermi.r = 5\nfermi.c = 1\n\
         time.min = 0\ntime.max = 15\ntime.count = 7\n",
    );
    let (code, out, _) = run(&["fermi", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let mut saw_precursor = false;
    for row in rows(&out) {
        let t: f64 = row[0].parse().unwrap();
        let p_full: f64 = row[1].parse().unwrap();
        let p_half: f64 = row[3].parse().unwrap();
        if t < 5.0 {
            assert_eq!(p_full, 0.0, "no signal before r/c on the full line");
            saw_precursor |= p_half > 0.0;
        } else {
            assert!(p_full > 0.0);
        }
    }
    assert!(saw_precursor, "half-line support leaks before r/c");
}

#[test]
fn fermi_negative_distance_is_a_validation_error() {
    let cfg = write_cfg(
        "fermi-bad",
        "line.e_r = 1.0\nline.gamma = 0.1\nfermi.r = -1\n",
    );
    let (code, _, err) = run(&["fermi", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("r >= 0"));
}

#[test]
fn relativistic_rest_phase_rejection_and_unitary_limit() {
    let cfg = write_cfg(
        "rel",
        "label.j = 1/2\nlabel.j3 = 1/2\nlabel.mass = 1.0\nlabel.width = 0.1\n\
         event.1.type = identity\nevent.1.x = 10,0,0,0\n\
         event.2.type = boost\nevent.2.v = 0.6,0,0\nevent.2.x = 1,2,0,0\n",
    );
    let (code, out, _) = run(&["relativistic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    // x = (tau, 0) at rest: survival of the phase alone is e^{-1}
    let abs_phase: f64 = report_value(&out, "event_1_abs_phase").parse().unwrap();
    assert!((abs_phase.powi(2) - (-1.0f64).exp()).abs() < 1e-12);
    assert!(report_value(&out, "event_2_status").starts_with("REJECTED: outside forward cone"));

    let cfg = write_cfg(
        "rel-stable",
        "label.j = 1\nlabel.j3 = 0\nlabel.mass = 2.0\nlabel.width = 0\n\
         event.1.type = rotation\nevent.1.axis = 0,0,1\nevent.1.angle = 0.4\n\
         event.1.x = 3,0.5,0,0\n",
    );
    let (code, out, _) = run(&["relativistic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let abs_phase: f64 = report_value(&out, "event_1_abs_phase").parse().unwrap();
    assert!((abs_phase - 1.0).abs() < 1e-12, "zero width evolves unitarily");
}

#[test]
fn relativistic_malformed_boost_is_a_validation_error() {
    let cfg = write_cfg(
        "rel-bad",
        "label.j = 0\nlabel.j3 = 0\nlabel.mass = 1.0\nlabel.width = 0.1\n\
         event.1.type = boost\nevent.1.v = 1.2,0,0\nevent.1.x = 1,0,0,0\n",
    );
    let (code, _, err) = run(&["relativistic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("velocity"), "stderr: {err}");
}

#[test]
fn unknown_config_key_fails_before_any_work() {
    let cfg = write_cfg(
        "unknown",
        "line.e_r = 1.0\nline.gamma = 0.1\nsupport = half-line\n\
         time.max = 1e9\ntime.count = 1000000\ntypo.key = 1\n",
    );
    let (code, _, err) = run(&["survival", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("typo.key"));
}

#[test]
fn unreachable_tolerance_exits_numeric() {
    let cfg = write_cfg(
        "tight",
        "line.e_r = 1.0\nline.gamma = 0.1\nsupport = half-line\n\
         time.min = 0\ntime.max = 10\ntime.count = 3\n",
    );
    let (code, _, err) = run(&[
        "survival",
        "--config",
        cfg.to_str().unwrap(),
        "--tol",
        "1e-30",
    ]);
    assert_eq!(code, 3);
    assert!(err.contains("tolerance"));
}

#[test]
fn set_flag_overrides_config_values() {
    let cfg = write_cfg(
        "override",
        "line.e_r = 1.0\nline.gamma = 0.1\nsupport = full-line\n\
         time.min = 0\ntime.max = 10\ntime.count = 3\n",
    );
    let path = cfg.to_str().unwrap();
    let (code, out, _) = run(&["survival", "--config", path, "--set", "time.count=5"]);
    assert_eq!(code, 0);
    assert_eq!(rows(&out).len(), 5);
}

#[test]
fn json_doc_is_one_parseable_document() {
    let cfg = write_cfg(
        "json",
        "line.e_r = 1.0\nline.gamma = 0.1\nsupport = full-line\n\
         time.min = 0\ntime.max = 10\ntime.count = 3\n",
    );
    let (code, out, _) = run(&[
        "survival",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json-doc",
    ]);
    assert_eq!(code, 0);
    let doc: serde_json::Value = serde_json::from_str(&out).expect("valid json");
    assert_eq!(doc["command"], "survival");
    assert_eq!(doc["columns"].as_array().unwrap().len(), 5);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn explain_prefixes_origin_comments() {
    let cfg = write_cfg("explain", "line.preset = fe57\nnorm.order = 1\n");
    let (code, out, _) = run(&["norm", "--config", cfg.to_str().unwrap(), "--explain"]);
    assert_eq!(code, 0);
    assert!(out.contains("# fe57"), "preset origin shown");
    assert!(out.contains("Moessbauer"));
    // explain lines are comments: the data rows still parse
    let closed: f64 = report_value(&out, "closed_form").parse().unwrap();
    assert!(closed > 0.999, "narrow line norm is just under one: {closed}");
}
