//! Fitted decay slopes must not move by more than 0.05 when Δx is halved.

use std::collections::BTreeMap;

use calderon_core::experiments::{verify_lemma12, verify_theorem2, ExperimentConfig, Status};

const MAX_SHIFT: f64 = 0.05;

/// Slope per (m, atom, α) from the far-field decay table.
fn decay_slopes(cfg: &ExperimentConfig) -> BTreeMap<[i64; 4], f64> {
    let out = verify_lemma12(cfg).unwrap();
    assert_eq!(out.report.status(), Status::Pass, "{:?}", out.report.violations());
    out.table
        .rows
        .iter()
        .map(|r| ([r[0] as i64, r[1] as i64, r[2] as i64, r[3] as i64], r[6]))
        .collect()
}

#[test]
fn far_field_slopes_are_stable_under_refinement() {
    let mut cfg = ExperimentConfig::default();
    cfg.lemma12.atoms.count = 3;
    cfg.lemma12.directions = 32;
    let coarse = decay_slopes(&cfg);
    cfg.refinement = 1;
    let fine = decay_slopes(&cfg);
    assert_eq!(coarse.len(), fine.len());
    let shift = coarse.iter().map(|(k, s)| (s - fine[k]).abs()).fold(0.0, f64::max);
    println!("far-field largest slope shift {shift:.2e}");
    assert!(shift < MAX_SHIFT, "{shift}");
}

#[test]
fn critical_decay_slope_is_stable_under_refinement() {
    let slope = |refinement| {
        let cfg = ExperimentConfig { refinement, ..ExperimentConfig::default() };
        let out = verify_theorem2(&cfg).unwrap();
        assert_eq!(out.report.status(), Status::Pass, "{:?}", out.report.violations());
        out.report.measured["decay_slope"]
    };
    let (a, b) = (slope(0), slope(1));
    println!("critical decay slope {a:.4} -> {b:.4}");
    assert!((a - b).abs() < MAX_SHIFT, "{a} {b}");
}
