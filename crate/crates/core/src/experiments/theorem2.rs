//! Decay of `N_{q,2m}(F; ·)` at the critical exponent `p₊ = n(2m + n/q)⁻¹`.

use rand::Rng;

use super::config::{critical_exponent, ExperimentConfig};
use super::report::{Bound, Outcome, Report, Table};
use crate::atoms::make_atom;
use crate::error::{Error, Result};
use crate::exponents::{min_moment_degree, ExponentFunction};
use crate::grid::{norm, Cube, DomainBox};
use crate::maximal::{n_field, MaximalParams, NOptions};
use crate::potential::{potential, KernelSpec};
use crate::quadrature::{linear_fit, loglog_slope};

pub const NAME: &str = "thm2";
pub const TAG: &str = "N_{q,2m}(F;x) ≥ c|x|^{−2m−n/q}, so ρ_{p(·)}(N_{q,2m}(F;·)) = ∞ when p₊ ≤ n(2m+n/q)⁻¹";
const STREAM: u64 = 2;
const ANNULUS_DIRECTIONS: usize = 16;

/// `F` is the class of the potential of one atom centred at the origin;
/// `N` is sampled on annuli `|x| = R` and summed over `|x| ≤ R` at the
/// critical power.
pub fn verify_theorem2(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.theorem2;
    let mut report = Report::new(NAME, TAG, &cfg.hash(), cfg.seed);
    let mut table = Table::new(&["radius", "n_min", "partial_modular"]);
    let domain = c.grid.domain(cfg.refinement)?;
    let n = domain.dim();
    let crit = critical_exponent(n, c.m, c.q);
    if (c.p - crit).abs() > 1e-12 {
        return Err(Error::Config(format!("thm2 needs p = n(2m + n/q)⁻¹ = {crit}, got {}", c.p)));
    }
    if c.radii.len() < 2 {
        return Err(Error::Config("thm2 needs at least two radii".into()));
    }
    let p = ExponentFunction::constant(c.p)?;
    let spec = KernelSpec::new(c.m, n)?;
    let prm = MaximalParams::new(c.q, 2.0 * f64::from(c.m), c.scales.grid()?)?;
    let mut rng = cfg.rng(STREAM);
    let d = min_moment_degree(c.p, n)?.max(2 * c.m - 1);
    let atom = make_atom(domain, &Cube::new(&vec![0.0; n], c.atom_side)?, c.p0, d, &p, rng.gen())?;
    let class = potential(&atom, &spec)?.class_b;
    let opts = NOptions { restarts: c.restarts, seed: rng.gen(), ..NOptions::default() };

    let dirs: Vec<Vec<f64>> = if n == 1 {
        vec![vec![-1.0], vec![1.0]]
    } else {
        (0..ANNULUS_DIRECTIONS)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / ANNULUS_DIRECTIONS as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    };
    let ring: Vec<Vec<f64>> = c
        .radii
        .iter()
        .flat_map(|&r| dirs.iter().map(move |u| u.iter().map(|v| r * v).collect()))
        .collect();
    let ring_values = n_field(&class, &prm, &ring, &opts)?;
    let n_min: Vec<f64> = ring_values
        .chunks(dirs.len())
        .map(|ch| ch.iter().map(|v| v.value).fold(f64::INFINITY, f64::min))
        .collect();
    if n_min.iter().all(|v| *v == 0.0) {
        return Ok(Outcome { report: report.skip("F is a polynomial class"), table });
    }

    let r_max = c.radii.iter().fold(0.0f64, |a, v| a.max(*v));
    let coarse = DomainBox::new(n, domain.half_width(), c.modular_points)?;
    let inner: Vec<Vec<f64>> = (0..coarse.len())
        .map(|i| coarse.center(i)[..n].to_vec())
        .filter(|x| norm(x) <= r_max)
        .collect();
    let inner_values = n_field(&class, &prm, &inner, &NOptions { seed: opts.seed ^ 1, ..opts.clone() })?;
    let dv = coarse.cell_volume();
    let modulars: Vec<f64> = c
        .radii
        .iter()
        .map(|&r| {
            let terms: Vec<f64> = inner
                .iter()
                .zip(&inner_values)
                .filter(|(x, _)| norm(x) <= r)
                .map(|(_, v)| v.value.powf(c.p) * dv)
                .collect();
            crate::grid::pairwise_sum(&terms)
        })
        .collect();
    for ((r, v), rho) in c.radii.iter().zip(&n_min).zip(&modulars) {
        table.push(vec![*r, *v, *rho]);
    }

    let slope = loglog_slope(&c.radii, &n_min);
    let logs: Vec<f64> = c.radii.iter().map(|r| r.ln()).collect();
    let (growth, _) = linear_fit(&logs, &modulars);
    let increments: Vec<f64> = modulars.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_inc = increments.iter().sum::<f64>() / increments.len() as f64;
    let last_inc = *increments.last().expect("two radii");
    let decay = 2.0 * f64::from(c.m) + n as f64 / c.q;
    report.measure("critical_exponent", crit);
    report.measure("theorem1_hypothesis", 0.0);
    report.check("decay_slope", slope, Bound::AtLeast { value: -decay - c.slope_tol });
    report.check("modular_growth_per_log_radius", growth, Bound::AtLeast { value: f64::MIN_POSITIVE });
    report.check(
        "last_over_mean_increment",
        if mean_inc > 0.0 { last_inc / mean_inc } else { 0.0 },
        Bound::AtLeast { value: c.increment_ratio },
    );
    Ok(Outcome { report, table })
}
