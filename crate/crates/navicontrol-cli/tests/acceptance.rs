//! Acceptance suite: runs `navicontrol verify` twice on the default
//! configuration, re-evaluates every criterion from the measured values with
//! its own pinned tolerances and prints one line per criterion.
//!
//! Criteria 2 and 8 do not hold for this system (see the README section on
//! known failures); they are printed but not asserted.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use navicontrol_cli::Report;

const KNOWN_RED: [u8; 2] = [2, 8];

type Measured = BTreeMap<String, f64>;

fn get(m: &Measured, key: &str) -> f64 {
    m.get(key).copied().unwrap_or(f64::NAN)
}

/// Failed conditions of one criterion, as `key = value (rule)` strings.
fn evaluate(id: u8, m: &Measured) -> Vec<String> {
    let mut bad = Vec::new();
    let mut need = |key: &str, ok: fn(f64) -> bool, rule: &str| {
        let v = get(m, key);
        if !ok(v) {
            bad.push(format!("{key} = {v:e} ({rule})"));
        }
    };
    match id {
        1 => {
            need("max_residual", |v| v <= 1e-10, "<= 1e-10");
            need("bad_windows", |v| v == 0.0, "== 0");
            need("seconds", |v| v <= 30.0, "<= 30 s");
        }
        2 => {
            need("defect_slope", |v| (-1.4..=-0.6).contains(&v), "in [-1.4, -0.6]");
            need("max_correction", |v| v <= PI / 2.0, "<= pi/2");
            for key in ["slope_c", "slope_alpha1", "slope_alpha2"] {
                need(key, |v| v <= -0.6, "<= -0.6");
            }
            let (lo, hi) = (get(m, "parabolic_real_deviation_lower"), get(m, "parabolic_real_deviation_upper"));
            if !(hi <= 1.25 * lo + 1e-9) {
                bad.push(format!("parabolic_real_deviation_upper = {hi:e} (<= 1.25 x lower half {lo:e})"));
            }
        }
        3 => {
            need("max_ode_defect", |v| v <= 1e-8, "<= 1e-8");
            need("max_boundary_defect", |v| v <= 1e-8, "<= 1e-8");
            need("max_rayleigh_defect", |v| v <= 1e-7, "<= 1e-7");
        }
        4 => {
            need("closeness_slope_parabolic", |v| (-2.6..=-1.4).contains(&v), "in [-2.6, -1.4]");
            need("closeness_slope_hyperbolic", |v| (-2.6..=-1.4).contains(&v), "in [-2.6, -1.4]");
            need("union_min_eig", |v| v >= 0.01, ">= 0.01");
            need("union_min_eig_drift", |v| v <= 0.2, "<= 20%");
        }
        5 => {
            need("min_unit_observation", |v| v > 0.0, "> 0");
            need("parabolic_band_ratio", |v| v <= 100.0, "<= 100");
            need("hyperbolic_band_ratio", |v| v <= 100.0, "<= 100");
        }
        6 => {
            need("moments", |v| v >= 41.0, ">= 20 + 20 + mean");
            need("algebraic_residual", |v| v <= 1e-8, "<= 1e-8");
            need("quadrature_residual", |v| v <= 1e-6, "<= 1e-6");
            need("imaginary_ratio", |v| v <= 1e-8, "<= 1e-8");
            need("control_integral", |v| v <= 1e-8, "<= 1e-8");
        }
        7 => {
            need("modal_final_coefficient", |v| v <= 1e-6, "<= 1e-6 ||U0||");
            need("fd_final_ratio", |v| v <= 1e-2, "<= 1e-2");
            let (d, s) = (get(m, "dirichlet_vs_auxiliary"), get(m, "scheme_self_error"));
            if !(d <= 2.0 * s) {
                bad.push(format!("dirichlet_vs_auxiliary = {d:e} (<= 2 x self error {s:e})"));
            }
        }
        8 => need("growth_1.5_to_1.01", |v| v >= 1e3, ">= 1e3"),
        9 => {
            for key in [
                "transposition_ratio_1",
                "transposition_ratio_2",
                "weighted_energy_ratio_1",
                "weighted_energy_ratio_2",
            ] {
                need(key, |v| v >= 1.7, ">= 1.7");
            }
            need("hidden_regularity_spread", |v| v <= 1.25, "<= 25%");
        }
        10 => need("seconds", |v| v <= 300.0, "<= 5 min"),
        _ => bad.push("unknown criterion".into()),
    }
    bad
}

fn verify(dir: &Path) -> (Option<i32>, Report) {
    let out = Command::new(env!("CARGO_BIN_EXE_navicontrol"))
        .arg("verify")
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs");
    let text = std::fs::read_to_string(dir.join("report.json")).expect("report.json written");
    (out.status.code(), serde_json::from_str(&text).expect("report parses"))
}

/// Artifacts whose bytes differ between the two runs (`report.json` holds
/// wall-clock timings and is skipped).
fn differing_artifacts(a: &Path, b: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "report.json")
        .collect();
    names.sort();
    assert!(names.len() >= 15, "too few artifacts: {names:?}");
    names
        .into_iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .collect()
}

#[test]
fn acceptance_criteria() {
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (code, report) = verify(da.path());
    let (_, second) = verify(db.path());
    let differing = differing_artifacts(da.path(), db.path());
    assert_eq!(report.config_hash, second.config_hash);

    let mut lines = Vec::new();
    let mut unexpected = Vec::new();
    for id in 1..=10u8 {
        let check = report.check(id).unwrap_or_else(|| panic!("criterion {id} missing from the report"));
        let mut bad = evaluate(id, &check.measured);
        if id == 10 && !differing.is_empty() {
            bad.push(format!("artifacts differ between runs: {differing:?}"));
        }
        let passed = bad.is_empty();
        // The pinned tolerances here and the pipeline's own verdict must agree.
        if id != 10 {
            assert_eq!(passed, check.passed, "criterion {id}: report says {}", check.line());
        }
        let status = if passed { "PASS" } else { "FAIL" };
        let mut line = format!("[{status}] {id:>2}. {}", check.name);
        if !passed {
            line.push_str(": ");
            line.push_str(&bad.join("; "));
            if KNOWN_RED.contains(&id) {
                line.push_str(" [known failure]");
            } else {
                unexpected.push(id);
            }
        }
        lines.push(line);
    }
    println!("{}", lines.join("\n"));

    let all_pass = report.checks.iter().all(|c| c.passed);
    assert_eq!(code, Some(if all_pass { 0 } else { 1 }));
    assert!(unexpected.is_empty(), "criteria {unexpected:?} failed");
}
