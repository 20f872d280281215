//! Homogeneity and zero sphere mean of `∂^α h`, `|α| = 2m`.

use super::config::ExperimentConfig;
use super::report::{Bound, Outcome, Report, Table};
use crate::error::Result;
use crate::grid::multi_indices_of_order;
use crate::potential::{homogeneity_fit, sphere_mean, KernelSpec};

pub const NAME: &str = "lemma14";
pub const TAG: &str = "∂^α h is homogeneous of degree −n with vanishing mean on the unit sphere, |α| = 2m";

pub fn verify_lemma14(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.lemma14;
    let mut report = Report::new(NAME, TAG, &cfg.hash(), cfg.seed);
    let mut table = Table::new(&["m", "n", "a0", "a1", "degree", "sphere_mean"]);
    if c.cases.is_empty() {
        return Ok(Outcome { report: report.skip("no kernel cases"), table });
    }
    let mut worst_degree: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut vanishing = 0.0;
    for &(m, n) in &c.cases {
        let spec = KernelSpec::new(m, n)?;
        for alpha in multi_indices_of_order(n, 2 * m) {
            let mean = sphere_mean(&spec, alpha)?;
            worst_mean = worst_mean.max(mean.abs());
            let degree = match homogeneity_fit(&spec, alpha)? {
                Some(deg) => {
                    worst_degree = worst_degree.max((deg + n as f64).abs());
                    deg
                }
                None => {
                    vanishing += 1.0;
                    f64::NAN
                }
            };
            table.push(vec![
                f64::from(m),
                n as f64,
                f64::from(alpha.0[0]),
                f64::from(alpha.0[1]),
                degree,
                mean,
            ]);
        }
    }
    report.measure("identically_zero_derivatives", vanishing);
    report.check("degree_deviation_max", worst_degree, Bound::AtMost { value: c.homogeneity_tol });
    report.check("sphere_mean_max", worst_mean, Bound::AtMost { value: c.sphere_mean_tol });
    Ok(Outcome { report, table })
}
