//! Pointwise bound `M_φ(Δ^m F) ≲ p_{2m+n}(φ) N_{q,2m}(F)` and the two-sided
//! comparison of `‖Δ^m F‖_{H^{p(·)}}` with `‖N_{q,2m}(F; ·)‖_{p(·)}`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{exponent, test_function, theorem1_hypothesis, ExperimentConfig};
use super::report::{Bound, Outcome, Report, Table};
use crate::atoms::{make_atom, synthesize, AtomicDecomposition};
use crate::error::{Error, Result};
use crate::exponents::{luxemburg_norm, min_moment_degree, ExponentFunction, VariableExponent, DEFAULT_NORM_TOL};
use crate::grid::{DomainBox, GridFunction};
use crate::maximal::{hardy_norm, n_field, phi_maximal, schwartz_seminorm, FunctionClass, MaximalParams, NOptions};
use crate::potential::{potential_of_decomposition, KernelSpec};

pub const POINTWISE_NAME: &str = "thm1-pointwise";
pub const POINTWISE_TAG: &str = "M_φ(Δ^m F)(x) ≤ c p_{2m+n}(φ) N_{q,2m}(F; x)";
pub const NORM_NAME: &str = "thm1";
pub const NORM_TAG: &str = "c₁‖F‖_{H^{p(·)}_{q,2m}} ≤ ‖Δ^m F‖_{H^{p(·)}} ≤ c₂‖F‖_{H^{p(·)}_{q,2m}}";
const POINTWISE_STREAM: u64 = 101;
const NORM_STREAM: u64 = 102;

/// A random decomposition, its synthesis `f = Σ kⱼaⱼ` and the class `F = Σ kⱼBⱼ`.
struct Draw {
    f: GridFunction,
    class: FunctionClass,
}

fn draw(cfg: &ExperimentConfig, domain: DomainBox, p: &ExponentFunction, rng: &mut ChaCha8Rng) -> Result<Draw> {
    let c = &cfg.theorem1;
    let n = domain.dim();
    let d = min_moment_degree(p.p_minus(), n)?.max(2 * c.m - 1);
    let mut dec = AtomicDecomposition::new();
    for _ in 0..c.atoms_per_decomposition {
        let (cube, seed) = c.atoms.draw(n, rng)?;
        let k = if c.atoms_per_decomposition == 1 { 1.0 } else { rng.gen_range(0.5..2.0) };
        dec.push(k, make_atom(domain, &cube, c.atoms.p0, d, p, seed)?)?;
    }
    let spec = KernelSpec::new(c.m, n)?;
    Ok(Draw { f: synthesize(&dec, domain)?, class: potential_of_decomposition(&dec, &spec, domain)? })
}

fn params(cfg: &ExperimentConfig) -> Result<MaximalParams> {
    let c = &cfg.theorem1;
    MaximalParams::new(c.q, 2.0 * f64::from(c.m), c.scales.grid()?)
}

/// Evenly spaced points of `[−reach, reach]^n` (cell centres).
fn pointwise_points(n: usize, reach: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    let per_axis = if n == 1 { count } else { (count as f64).sqrt().ceil() as usize }.next_power_of_two().max(16);
    let grid = DomainBox::new(n, reach, per_axis.max(1))?;
    Ok((0..grid.len()).map(|i| grid.center(i)[..n].to_vec()).collect())
}

/// Checks the pointwise bound on every draw; the constant of a draw is the
/// largest `M_φ f / (p_{2m+n}(φ) N)` over the sample points.
pub fn verify_theorem1_pointwise(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.theorem1;
    let mut report = Report::new(POINTWISE_NAME, POINTWISE_TAG, &cfg.hash(), cfg.seed);
    let mut table = Table::new(&["draw", "x0", "x1", "m_phi", "n_value", "ratio"]);
    if c.decompositions == 0 || c.atoms_per_decomposition == 0 {
        return Ok(Outcome { report: report.skip("empty decomposition"), table });
    }
    let domain = c.grid.domain(cfg.refinement)?;
    let n = domain.dim();
    let p = exponent(&c.exponent)?;
    let phi = test_function(c.phi, n)?;
    let order = 2 * c.m + n as u32;
    let seminorm = schwartz_seminorm(&phi, order);
    let doubled = phi.scaled(2.0);
    let seminorm2 = schwartz_seminorm(&doubled, order);
    let prm = params(cfg)?;
    let t_grid = c.t_scales.grid()?;
    let points = pointwise_points(n, c.pointwise_reach, c.pointwise_points)?;
    let mut rng = cfg.rng(POINTWISE_STREAM);
    let mut constants = Vec::new();
    let mut homogeneity: f64 = 0.0;
    for j in 0..c.decompositions {
        let dr = draw(cfg, domain, &p, &mut rng)?;
        let opts = NOptions { restarts: c.restarts, seed: rng.gen(), ..NOptions::default() };
        let nv = n_field(&dr.class, &prm, &points, &opts)?;
        let rows = points
            .par_iter()
            .zip(&nv)
            .map(|(x, nv)| {
                let m1 = phi_maximal(&dr.f, &phi, x, &t_grid)?.value;
                let m2 = phi_maximal(&dr.f, &doubled, x, &t_grid)?.value;
                Ok((m1, m2, nv.value))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cst: f64 = 0.0;
        for (x, (m1, m2, nval)) in points.iter().zip(rows) {
            let ratio = if m1 == 0.0 { 0.0 } else { m1 / (seminorm * nval) };
            let ratio2 = if m2 == 0.0 { 0.0 } else { m2 / (seminorm2 * nval) };
            if ratio.is_finite() && ratio > 0.0 {
                homogeneity = homogeneity.max((ratio2 / ratio - 1.0).abs());
            }
            cst = cst.max(ratio);
            table.push(vec![j as f64, x[0], if n == 2 { x[1] } else { 0.0 }, m1, nval, ratio]);
        }
        report.measure(&format!("constant_draw{j}"), cst);
        constants.push(cst);
    }
    let max = constants.iter().fold(0.0f64, |a, v| a.max(*v));
    let min = constants.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    report.measure("schwartz_seminorm", seminorm);
    report.check("constant", max, Bound::Finite);
    report.check("constant_spread", max / min, Bound::AtMost { value: c.spread });
    report.check("phi_scaling_residual", homogeneity, Bound::AtMost { value: 1e-9 });
    Ok(Outcome { report, table })
}

/// `‖N_{q,2m}(F; ·)‖_{p(·)}` with `N` sampled on a grid of `n_points` cells per axis.
fn n_norm(cfg: &ExperimentConfig, class: &FunctionClass, p: &ExponentFunction, seed: u64) -> Result<f64> {
    let c = &cfg.theorem1;
    let d = class.domain();
    let coarse = DomainBox::new(d.dim(), d.half_width(), c.n_points)?;
    let n = d.dim();
    let prm = params(cfg)?;
    // Cells too close to the edge for the smallest cube are left at zero.
    let reach = 0.5 * prm.scales.r_min();
    let inside: Vec<usize> = (0..coarse.len())
        .filter(|&i| coarse.distance_to_boundary(&coarse.center(i)[..n]) >= reach)
        .collect();
    let points: Vec<Vec<f64>> = inside.iter().map(|&i| coarse.center(i)[..n].to_vec()).collect();
    let opts = NOptions { restarts: c.restarts, seed, ..NOptions::default() };
    let values = n_field(class, &prm, &points, &opts)?;
    let mut samples = vec![0.0; coarse.len()];
    for (i, v) in inside.iter().zip(&values) {
        samples[*i] = v.value;
    }
    let field = GridFunction::new(coarse, samples)?;
    luxemburg_norm(&field, p, DEFAULT_NORM_TOL)
}

/// `ρ = ‖M_φ f‖_{p(·)} / ‖N_{q,2m}(F; ·)‖_{p(·)}` over random decompositions;
/// passes when `max ρ / min ρ` stays within the configured spread.
pub fn verify_norm_equivalence(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.theorem1;
    let mut report = Report::new(NORM_NAME, NORM_TAG, &cfg.hash(), cfg.seed);
    let mut table = Table::new(&["draw", "hardy_norm", "n_norm", "ratio"]);
    if c.decompositions == 0 || c.atoms_per_decomposition == 0 {
        return Ok(Outcome { report: report.skip("empty decomposition"), table });
    }
    let domain = c.grid.domain(cfg.refinement)?;
    let n = domain.dim();
    let p = exponent(&c.exponent)?;
    if !theorem1_hypothesis(n, c.m, c.q, &p) {
        return Err(Error::Config("norm equivalence needs n(2m + n/q)⁻¹ < p̲".into()));
    }
    let phi = test_function(c.phi, n)?;
    let t_grid = c.t_scales.grid()?;
    let mut rng = cfg.rng(NORM_STREAM);
    let mut ratios = Vec::new();
    let mut scaling = f64::NAN;
    for j in 0..c.decompositions {
        let dr = draw(cfg, domain, &p, &mut rng)?;
        let seed = rng.gen();
        let hardy = hardy_norm(&dr.f, &p, &phi, &t_grid)?;
        let nn = n_norm(cfg, &dr.class, &p, seed)?;
        let rho = hardy / nn;
        if j == 0 {
            let f2 = dr.f.scaled(2.0);
            let class2 = FunctionClass::new(dr.class.representative().scaled(2.0), dr.class.degree());
            let rho2 = hardy_norm(&f2, &p, &phi, &t_grid)? / n_norm(cfg, &class2, &p, seed)?;
            scaling = (rho2 / rho - 1.0).abs();
        }
        table.push(vec![j as f64, hardy, nn, rho]);
        ratios.push(rho);
    }
    let max = ratios.iter().fold(0.0f64, |a, v| a.max(*v));
    let min = ratios.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    report.measure("q", c.q);
    report.measure("ratio_min", min);
    report.measure("ratio_max", max);
    report.measure("theorem1_hypothesis", 1.0);
    report.check("ratio_spread", max / min, Bound::AtMost { value: c.spread });
    report.check("scaling_residual", scaling, Bound::AtMost { value: 1e-3 });
    Ok(Outcome { report, table })
}
