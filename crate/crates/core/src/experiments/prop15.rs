//! Pointwise domination of `N_{q,2m}(B; ·)` for the potential of an atom.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{exponent, ExperimentConfig};
use super::report::{Bound, Outcome, Report, Table};
use crate::atoms::{make_atom, Atom};
use crate::error::{Error, Result};
use crate::exponents::{indicator, indicator_norm, min_moment_degree, VariableExponent};
use crate::grid::{multi_indices_of_order, Cube, CumulativeIntegral, DomainBox};
use crate::maximal::{hl_maximal_field, hl_maximal_from, n_field, truncated_singular_integral, MaximalParams, NOptions, ScaleGrid};
use crate::potential::{potential, DerivativeKernel, KernelSpec};

pub const NAME: &str = "prop15";
pub const TAG: &str = "N_{q,2m}(B;x) ≲ ‖χ_Q‖⁻¹[Mχ_Q]^{(2m+n/q−μ)/n} + χ_{4√nQ}(M a + [M(M^q a)]^{1/q} + Σ T*_α a)";
const STREAM: u64 = 15;

/// One sample point of one atom.
struct Sample {
    x: Vec<f64>,
    near: bool,
    lhs: f64,
    terms: [f64; 4],
}

/// Points inside `4√n·Q` and at distances in `[2√n·l(Q), far_max]`.
fn sample_points(cube: &Cube, near: usize, far: usize, far_max: f64, rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, bool)> {
    let n = cube.dim();
    let sq = (n as f64).sqrt();
    let half = 2.0 * sq * cube.side;
    let mut out = Vec::with_capacity(near + far);
    for _ in 0..near {
        let x = cube.center.iter().map(|c| c + rng.gen_range(-half..half)).collect();
        out.push((x, true));
    }
    let (lo, hi) = ((2.0 * sq * cube.side).ln(), far_max.ln());
    for _ in 0..far {
        let dist = rng.gen_range(lo..hi).exp();
        let dir: Vec<f64> = if n == 1 {
            vec![if rng.gen::<bool>() { 1.0 } else { -1.0 }]
        } else {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            vec![t.cos(), t.sin()]
        };
        let x = cube.center.iter().zip(&dir).map(|(c, u)| c + dist * u).collect();
        out.push((x, false));
    }
    out
}

fn evaluate_atom(
    atom: &Atom,
    spec: &KernelSpec,
    prm: &MaximalParams,
    mu: f64,
    p: &(impl VariableExponent + Sync),
    points: Vec<(Vec<f64>, bool)>,
    opts: &NOptions,
) -> Result<Vec<Sample>> {
    let domain = *atom.domain();
    let n = domain.dim();
    let q = prm.q;
    let b = potential(atom, spec)?;
    let xs: Vec<Vec<f64>> = points.iter().map(|(x, _)| x.clone()).collect();
    let lhs = n_field(&b.class_b, prm, &xs, opts)?;
    let hl = ScaleGrid::geometric(2.0 * domain.spacing(), 4.0 * domain.half_width())?;
    let chi = CumulativeIntegral::new(&indicator(domain, &atom.cube), f64::abs);
    let chi_norm = indicator_norm(domain, &atom.cube, p)?;
    let a_table = CumulativeIntegral::new(&atom.data, f64::abs);
    let ma_q = CumulativeIntegral::new(&hl_maximal_field(&atom.data, &hl)?, |v| v.abs().powf(q));
    let kernels: Vec<DerivativeKernel> = multi_indices_of_order(n, 2 * spec.m())
        .into_iter()
        .map(|a| DerivativeKernel::new(*spec, a))
        .collect::<Result<_>>()?;
    let local = atom.cube.dilate(4.0 * (n as f64).sqrt());
    let power = (2.0 * f64::from(spec.m()) + n as f64 / q - mu) / n as f64;
    points
        .into_par_iter()
        .zip(lhs)
        .map(|((x, near), nv)| {
            let far_term = hl_maximal_from(&chi, &x, &hl)?.value.powf(power) / chi_norm;
            let mut terms = [far_term, 0.0, 0.0, 0.0];
            if local.contains(&x) {
                terms[1] = hl_maximal_from(&a_table, &x, &hl)?.value;
                terms[2] = hl_maximal_from(&ma_q, &x, &hl)?.value.powf(1.0 / q);
                terms[3] = kernels
                    .iter()
                    .map(|k| truncated_singular_integral(&atom.data, k, &hl, &x))
                    .sum::<Result<f64>>()?;
            }
            Ok(Sample { x, near, lhs: nv.value, terms })
        })
        .collect()
}

/// Largest `LHS / RHS` over one batch, and the rows of the detail table.
fn run_batch(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, rerun: usize, table: &mut Table) -> Result<(f64, f64, f64)> {
    let c = &cfg.prop15;
    let domain: DomainBox = c.grid.domain(cfg.refinement)?;
    let n = domain.dim();
    let p = exponent(&c.exponent)?;
    let spec = KernelSpec::new(c.m, n)?;
    let prm = MaximalParams::new(c.q, 2.0 * f64::from(c.m), c.scales.grid()?)?;
    let d = min_moment_degree(p.p_minus(), n)?.max(2 * c.m - 1);
    let (mut worst, mut far_first, mut near_local) = (0.0f64, 0.0f64, 0.0f64);
    for j in 0..c.atoms.count {
        let (cube, seed) = c.atoms.draw(n, rng)?;
        let atom = make_atom(domain, &cube, c.atoms.p0, d, &p, seed)?;
        let pts = sample_points(&cube, c.near_points, c.far_points, c.far_max, rng);
        let opts = NOptions { restarts: c.restarts, seed: rng.gen(), ..NOptions::default() };
        for s in evaluate_atom(&atom, &spec, &prm, c.mu, &p, pts, &opts)? {
            let rhs: f64 = s.terms.iter().sum();
            let ratio = if s.lhs == 0.0 { 0.0 } else { s.lhs / rhs };
            worst = worst.max(ratio);
            if s.near {
                let local: f64 = s.terms[1..].iter().sum();
                near_local = near_local.max(if s.lhs == 0.0 { 0.0 } else { s.lhs / local });
            } else {
                far_first = far_first.max(if s.lhs == 0.0 { 0.0 } else { s.lhs / s.terms[0] });
            }
            let mut row = vec![rerun as f64, j as f64];
            row.push(s.x[0]);
            row.push(if n == 2 { s.x[1] } else { 0.0 });
            row.push(f64::from(u8::from(s.near)));
            row.push(s.lhs);
            row.extend_from_slice(&s.terms);
            row.push(ratio);
            table.push(row);
        }
    }
    Ok((worst, far_first, near_local))
}

/// Runs `reruns` independent batches of atoms and reports the constant of
/// each batch and their spread.
pub fn verify_prop15(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.prop15;
    let mut report = Report::new(NAME, TAG, &cfg.hash(), cfg.seed);
    let mut table = Table::new(&[
        "batch", "atom", "x0", "x1", "near", "lhs", "far_term", "max_a", "max_max_q", "truncated_sum", "ratio",
    ]);
    if c.atoms.count == 0 || c.reruns == 0 {
        return Ok(Outcome { report: report.skip("no atoms"), table });
    }
    let n = c.grid.n;
    let p = exponent(&c.exponent)?;
    let m = f64::from(c.m);
    let rate = 2.0 * m + n as f64 / c.q - c.mu;
    if !(c.mu > 0.0 && c.mu < 2.0 * m) || rate * p.p_underline() <= n as f64 {
        return Err(Error::Config(format!(
            "prop15 needs 0 < μ < 2m and (2m + n/q − μ)·p̲ > n; got μ = {}, rate·p̲ = {}",
            c.mu,
            rate * p.p_underline()
        )));
    }
    let mut rng = cfg.rng(STREAM);
    let mut constants = Vec::new();
    let (mut far_first, mut near_local) = (0.0f64, 0.0f64);
    for k in 0..c.reruns {
        let (cst, ff, nl) = run_batch(cfg, &mut rng, k, &mut table)?;
        report.measure(&format!("constant_batch{k}"), cst);
        constants.push(cst);
        far_first = far_first.max(ff);
        near_local = near_local.max(nl);
    }
    let max = constants.iter().fold(0.0f64, |a, v| a.max(*v));
    let min = constants.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    report.measure("far_lhs_over_first_term_max", far_first);
    report.measure("near_lhs_over_local_terms_max", near_local);
    report.measure("mu", c.mu);
    report.check("constant", max, Bound::Finite);
    report.check("constant_spread", max / min, Bound::AtMost { value: c.stability });
    Ok(Outcome { report, table })
}
