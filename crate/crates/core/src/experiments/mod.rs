//! Verification harness: one experiment per statement, each producing a
//! [`Report`] and a CSV detail table.

mod config;
mod kernel;
mod lemma12;
mod prop15;
mod report;
mod theorem1;
mod theorem2;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    critical_exponent, theorem1_hypothesis, AtomBatch, ExperimentConfig, GridSpec, Lemma12Config, Lemma14Config,
    Prop15Config, ScaleSpec, Theorem1Config, Theorem2Config,
};
pub use kernel::verify_lemma14;
pub use lemma12::verify_lemma12;
pub use prop15::verify_prop15;
pub use report::{Bound, Outcome, Report, Status, Summary, Table};
pub use theorem1::{verify_norm_equivalence, verify_theorem1_pointwise};
pub use theorem2::verify_theorem2;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    Lemma12,
    Lemma14,
    Prop15,
    Theorem1,
    Theorem1Pointwise,
    Theorem2,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Lemma12,
        Experiment::Lemma14,
        Experiment::Prop15,
        Experiment::Theorem1Pointwise,
        Experiment::Theorem1,
        Experiment::Theorem2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Lemma12 => lemma12::NAME,
            Experiment::Lemma14 => kernel::NAME,
            Experiment::Prop15 => prop15::NAME,
            Experiment::Theorem1 => theorem1::NORM_NAME,
            Experiment::Theorem1Pointwise => theorem1::POINTWISE_NAME,
            Experiment::Theorem2 => theorem2::NAME,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Result<Outcome> {
        match self {
            Experiment::Lemma12 => verify_lemma12(cfg),
            Experiment::Lemma14 => verify_lemma14(cfg),
            Experiment::Prop15 => verify_prop15(cfg),
            Experiment::Theorem1 => verify_norm_equivalence(cfg),
            Experiment::Theorem1Pointwise => verify_theorem1_pointwise(cfg),
            Experiment::Theorem2 => verify_theorem2(cfg),
        }
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Runs the given experiments in parallel; outcomes are returned in input order.
pub fn run_experiments(cfg: &ExperimentConfig, which: &[Experiment]) -> Result<Vec<Outcome>> {
    which.par_iter().map(|e| e.run(cfg)).collect()
}

/// Writes `<name>.csv` for every outcome and `summary.json` into `dir`.
pub fn write_outcomes(outcomes: &[Outcome], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for o in outcomes {
        let path = dir.join(format!("{}.csv", o.report.name));
        std::fs::write(&path, o.table.to_csv())?;
        written.push(path);
    }
    let summary: Vec<Summary> = outcomes.iter().map(|o| o.report.summary()).collect();
    let path = dir.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

/// Runs every experiment and writes the reports. Nothing is written unless
/// all experiments complete.
pub fn run_suite(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<Report>> {
    let outcomes = run_experiments(cfg, &Experiment::ALL)?;
    write_outcomes(&outcomes, dir)?;
    Ok(outcomes.into_iter().map(|o| o.report).collect())
}

/// Loads a config file and applies the command-line overrides.
pub fn load_config(path: Option<&Path>, seed: Option<u64>, refinement: Option<i32>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = refinement {
        if !(-4..=4).contains(&r) {
            return Err(Error::Config(format!("refinement {r} outside [-4, 4]")));
        }
        cfg.refinement = r;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_name(e.name()), Some(e));
        }
        assert_eq!(Experiment::from_name("lemma13"), None);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn kernel_suite_passes() {
        let o = verify_lemma14(&ExperimentConfig::default()).unwrap();
        assert_eq!(o.report.status(), Status::Pass, "{:?}", o.report);
    }

    #[test]
    fn far_field_decay_in_one_dimension_is_skipped() {
        let mut cfg = ExperimentConfig::default();
        cfg.lemma12.grid = GridSpec { n: 1, half_width: 1.0, points: 256 };
        let o = verify_lemma12(&cfg).unwrap();
        assert_eq!(o.report.status(), Status::Skip);
    }

    #[test]
    fn empty_batches_are_skipped() {
        let mut cfg = ExperimentConfig::default();
        cfg.lemma12.atoms.count = 0;
        cfg.theorem1.decompositions = 0;
        assert_eq!(verify_lemma12(&cfg).unwrap().report.status(), Status::Skip);
        assert_eq!(verify_norm_equivalence(&cfg).unwrap().report.status(), Status::Skip);
        assert_eq!(verify_theorem1_pointwise(&cfg).unwrap().report.status(), Status::Skip);
    }

    #[test]
    fn violated_preconditions_are_config_errors() {
        let mut cfg = ExperimentConfig::default();
        cfg.theorem2.p = 0.5;
        assert!(matches!(verify_theorem2(&cfg), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default();
        cfg.prop15.mu = 3.0;
        assert!(matches!(verify_prop15(&cfg), Err(Error::Config(_))));
    }
}
