//! Far-field decay of `∂^α b` for potentials of atoms.

use std::f64::consts::PI;

use super::config::{exponent, ExperimentConfig};
use super::report::{Bound, Outcome, Report, Table};
use super::median;
use crate::atoms::make_atom;
use crate::error::Result;
use crate::exponents::{indicator_norm, min_moment_degree, VariableExponent};
use crate::grid::multi_indices;
use crate::potential::{atom_derivative_field, KernelSpec};
use crate::quadrature::{geometric_sequence, loglog_slope};

pub const NAME: &str = "lemma12";
pub const TAG: &str = "|∂^α b(x)| ≤ c_α r^{2m+n} ‖χ_Q‖⁻¹ |x − x₀|^{−n−|α|} for |x − x₀| ≥ √n r";
const STREAM: u64 = 12;

/// Fits the decay of the direction-wise envelope of `|∂^α b|` over a decade
/// of distances, for every `|α| ≤ 2m − 1`, and the implied constant `c_α`.
pub fn verify_lemma12(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.lemma12;
    let report = Report::new(NAME, TAG, &cfg.hash(), cfg.seed);
    let mut table = Table::new(&["m", "atom", "a0", "a1", "distance", "envelope", "slope", "constant"]);
    let n = c.grid.n;
    if n == 1 {
        let reason = "in one dimension h is a polynomial of degree 2m−1 away from the origin, so b vanishes outside the cube";
        return Ok(Outcome { report: report.skip(reason), table });
    }
    if c.atoms.count == 0 || c.orders.is_empty() {
        return Ok(Outcome { report: report.skip("no atoms"), table });
    }
    let mut report = report;
    let domain = c.grid.domain(cfg.refinement)?;
    let p = exponent(&c.exponent)?;
    let dp = min_moment_degree(p.p_minus(), n)?;
    let dirs: Vec<[f64; 2]> = (0..c.directions)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.5) / c.directions as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let ratio = (c.distance_max / c.distance_min).powf(1.0 / (c.distances.max(2) - 1) as f64);
    let mut rng = cfg.rng(STREAM);
    let mut worst_slope: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    for &m in &c.orders {
        let spec = KernelSpec::new(m, n)?;
        let d = dp.max(2 * m - 1);
        let alphas = multi_indices(n, 2 * m - 1);
        // constants[alpha][atom]
        let mut constants = vec![Vec::new(); alphas.len()];
        for j in 0..c.atoms.count {
            let (cube, seed) = c.atoms.draw(n, &mut rng)?;
            let atom = make_atom(domain, &cube, c.atoms.p0, d, &p, seed)?;
            let chi = indicator_norm(domain, &cube, &p)?;
            let r = cube.side;
            let dist = geometric_sequence(c.distance_min * r, c.distance_max * r, ratio);
            let x0 = [cube.center[0], cube.center[1]];
            let points: Vec<Vec<f64>> = dist
                .iter()
                .flat_map(|&s| dirs.iter().map(move |u| vec![x0[0] + s * u[0], x0[1] + s * u[1]]))
                .collect();
            for (ai, alpha) in alphas.iter().enumerate() {
                let field = atom_derivative_field(&atom, &spec, *alpha, &points)?;
                let env: Vec<f64> = field
                    .chunks(dirs.len())
                    .map(|ch| ch.iter().fold(0.0f64, |a, v| a.max(v.abs())))
                    .collect();
                let order = f64::from(alpha.order());
                let target = -(n as f64) - order;
                let slope = loglog_slope(&dist, &env);
                let scale = r.powf(2.0 * f64::from(m) + n as f64) / chi;
                let constant = dist
                    .iter()
                    .zip(&env)
                    .map(|(s, e)| e * s.powf(n as f64 + order) / scale)
                    .fold(0.0f64, f64::max);
                worst_slope = worst_slope.max((slope - target).abs());
                let key = format!("m{m}_a{}{}", alpha.0[0], alpha.0[1]);
                let prev = report.measured.get(&format!("{key}_slope_dev_max")).copied().unwrap_or(0.0);
                report.measure(&format!("{key}_slope_dev_max"), prev.max((slope - target).abs()));
                constants[ai].push(constant);
                for (s, e) in dist.iter().zip(&env) {
                    table.push(vec![
                        f64::from(m),
                        j as f64,
                        f64::from(alpha.0[0]),
                        f64::from(alpha.0[1]),
                        *s,
                        *e,
                        slope,
                        constant,
                    ]);
                }
            }
        }
        for (alpha, cs) in alphas.iter().zip(&constants) {
            let med = median(cs);
            let spread = cs.iter().fold(0.0f64, |a, v| a.max(v / med));
            let key = format!("m{m}_a{}{}", alpha.0[0], alpha.0[1]);
            report.measure(&format!("{key}_constant_median"), med);
            report.measure(&format!("{key}_constant_max_over_median"), spread);
            report.measure(
                &format!("{key}_constant_median_over_min"),
                med / cs.iter().fold(f64::INFINITY, |a, v| a.min(*v)),
            );
            worst_spread = worst_spread.max(spread);
        }
    }
    report.check("slope_deviation_max", worst_slope, Bound::AtMost { value: c.slope_tol });
    report.check("constant_max_over_median", worst_spread, Bound::AtMost { value: c.ratio_spread });
    Ok(Outcome { report, table })
}
