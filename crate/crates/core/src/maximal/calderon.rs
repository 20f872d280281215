//! Seminorms on quotient classes and Calderón's maximal function `N_{q,γ}`.
//!
//! Both reduce to minimising, over polynomial coefficients `c`, a maximum
//! of weighted seminorms `w_r |f − P_c|_{q,Q_r}`. Polynomials are written
//! in the scaled monomials `u^α`, `u = (y − x)/s`, about the evaluation
//! point. The representative is first reduced by a least-squares fit so
//! the optimiser works on a small perturbation, and for even integer `q`
//! the `q`-th power of each seminorm is stored as a polynomial in `c`
//! (its power moments), which makes one objective evaluation independent
//! of the number of cells.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::{admissible_scales, check_dim, FunctionClass, MaximalParams};
use crate::error::{Error, Result};
use crate::grid::{multi_indices, Cube, CubeStencil, GridFunction, MultiIndex, Polynomial};
use crate::optimize::{minimize_multistart, MinimizeOptions};

/// Condition estimate above which a monomial Gram system is rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest number of power moments stored per scale.
const MAX_MOMENTS: usize = 4096;

/// Optimiser settings for [`n_maximal`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NOptions {
    /// Random restarts in addition to the start at the least-squares fit.
    pub restarts: usize,
    pub rel_tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for NOptions {
    fn default() -> Self {
        Self { restarts: 10, rel_tol: 1e-4, max_sweeps: 400, seed: 0 }
    }
}

/// Result of [`n_maximal`].
#[derive(Clone, Debug, PartialEq)]
pub struct NValue {
    pub value: f64,
    /// Minimising polynomial in monomials `(y − x)^α`.
    pub minimizer: Polynomial,
    /// Scale at which the optimal objective attains its maximum.
    pub argmax_scale: f64,
    pub converged: bool,
    /// Minimisers found from every start, best first is not implied.
    pub run_minimizers: Vec<Polynomial>,
    pub evaluations: usize,
}

enum TermData {
    /// Coefficients of `Σ w (g − φ·c)^q` in the monomials `c^β`.
    Moments(Vec<f64>),
    /// Raw cells: residual values, weights, and basis values (row-major).
    Cells { g: Vec<f64>, w: Vec<f64>, phi: Vec<f64> },
}

struct ScaleTerm {
    r: f64,
    factor: f64,
    inv_measure: f64,
    data: TermData,
}

/// `c ↦ max_r factor_r (|Q_r|⁻¹ Σ w (g − φ·c)^q)^{1/q}`.
struct Objective {
    q: f64,
    dim: usize,
    betas: Vec<Vec<u32>>,
    terms: Vec<ScaleTerm>,
}

/// Exponent vectors `β ∈ ℕ^dim` with `|β| ≤ q`.
fn exponent_vectors(dim: usize, q: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for b in &out {
            let used: u32 = b.iter().sum();
            for e in 0..=(q - used) {
                let mut c = b.clone();
                c.push(e);
                next.push(c);
            }
        }
        out = next;
    }
    out
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

impl Objective {
    fn even_integer(q: f64) -> Option<u32> {
        (q == q.round() && q >= 2.0 && (q as u32) % 2 == 0).then_some(q as u32)
    }

    fn new(q: f64, dim: usize) -> Self {
        let betas = match Self::even_integer(q) {
            Some(qi) => {
                let b = exponent_vectors(dim, qi);
                if b.len() <= MAX_MOMENTS {
                    b
                } else {
                    Vec::new()
                }
            }
            None => Vec::new(),
        };
        Self { q, dim, betas, terms: Vec::new() }
    }

    fn push(&mut self, r: f64, factor: f64, measure: f64, g: Vec<f64>, w: Vec<f64>, phi: Vec<f64>) {
        let data = if self.betas.is_empty() {
            TermData::Cells { g, w, phi }
        } else {
            let qi = self.q as u32;
            let coefs: Vec<f64> = self
                .betas
                .iter()
                .map(|b| {
                    let s: u32 = b.iter().sum();
                    factorial(qi) / (factorial(qi - s) * b.iter().map(|&e| factorial(e)).product::<f64>())
                })
                .collect();
            let mut moments = vec![0.0; self.betas.len()];
            let q1 = qi as usize + 1;
            let mut gp = vec![1.0; q1];
            let mut pp = vec![1.0; q1 * self.dim];
            for (j, (&gj, &wj)) in g.iter().zip(&w).enumerate() {
                let row = &phi[j * self.dim..(j + 1) * self.dim];
                for e in 1..q1 {
                    gp[e] = gp[e - 1] * gj;
                    for (i, ph) in row.iter().enumerate() {
                        pp[i * q1 + e] = pp[i * q1 + e - 1] * -ph;
                    }
                }
                for ((m, b), c) in moments.iter_mut().zip(&self.betas).zip(&coefs) {
                    let s: u32 = b.iter().sum();
                    let mut t = wj * c * gp[(qi - s) as usize];
                    for (i, &e) in b.iter().enumerate() {
                        t *= pp[i * q1 + e as usize];
                    }
                    *m += t;
                }
            }
            TermData::Moments(moments)
        };
        self.terms.push(ScaleTerm { r, factor, inv_measure: 1.0 / measure, data });
    }

    /// `c^β` for every stored exponent vector.
    fn monomials(&self, c: &[f64]) -> Vec<f64> {
        self.betas
            .iter()
            .map(|b| b.iter().zip(c).filter(|(e, _)| **e > 0).map(|(e, ci)| ci.powi(*e as i32)).product())
            .collect()
    }

    fn term_value(&self, t: &ScaleTerm, c: &[f64], mono: &[f64]) -> f64 {
        let s = match &t.data {
            TermData::Moments(m) => m.iter().zip(mono).map(|(a, b)| a * b).sum::<f64>().max(0.0),
            TermData::Cells { g, w, phi } => {
                let qi = (self.q == self.q.round()).then_some(self.q as i32);
                g.iter()
                    .zip(w)
                    .enumerate()
                    .map(|(j, (gj, wj))| {
                        let row = &phi[j * self.dim..(j + 1) * self.dim];
                        let e = (gj - row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()).abs();
                        wj * match qi {
                            Some(k) => e.powi(k),
                            None => e.powf(self.q),
                        }
                    })
                    .sum()
            }
        };
        t.factor * (s * t.inv_measure).powf(1.0 / self.q)
    }

    fn eval(&self, c: &[f64]) -> (f64, usize) {
        let mono = self.monomials(c);
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, t) in self.terms.iter().enumerate() {
            let v = self.term_value(t, c, &mono);
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    fn value(&self, c: &[f64]) -> f64 {
        self.eval(c).0
    }
}

/// Cells of `Q(center, r)` with weights and scaled monomial values.
struct CubeCells {
    indices: Vec<usize>,
    weights: Vec<f64>,
    phi: Vec<f64>,
}

fn cube_cells(f: &GridFunction, center: &[f64], r: f64, unit: f64, basis: &[MultiIndex]) -> Result<CubeCells> {
    let d = f.domain();
    let n = d.dim();
    let stencil = CubeStencil::new(d, &Cube::new(center, r)?)?;
    let mut phi = Vec::with_capacity(stencil.indices.len() * basis.len());
    let mut u = [0.0; 2];
    for &idx in &stencil.indices {
        let c = d.center(idx);
        for i in 0..n {
            u[i] = (c[i] - center[i]) / unit;
        }
        phi.extend(basis.iter().map(|a| a.monomial(&u[..n])));
    }
    Ok(CubeCells { indices: stencil.indices, weights: stencil.weights, phi })
}

/// Weighted least-squares fit in the scaled basis; `None` when the Gram
/// system is singular or too ill-conditioned.
fn least_squares(values: &[f64], cells: &CubeCells, dim: usize) -> Option<(Vec<f64>, f64)> {
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (j, (&idx, &w)) in cells.indices.iter().zip(&cells.weights).enumerate() {
        let row = &cells.phi[j * dim..(j + 1) * dim];
        for a in 0..dim {
            rhs[a] += w * row[a] * values[idx];
            for b in 0..dim {
                gram[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v.abs())));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let sol = gram.cholesky()?.solve(&rhs);
    Some((sol.iter().copied().collect(), cond))
}

fn residuals(values: &[f64], cells: &CubeCells, dim: usize, fit: &[f64]) -> Vec<f64> {
    cells
        .indices
        .iter()
        .enumerate()
        .map(|(j, &idx)| {
            let row = &cells.phi[j * dim..(j + 1) * dim];
            values[idx] - row.iter().zip(fit).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Converts scaled-basis coefficients to coefficients of `(y − x)^α`.
fn unscale(basis: &[MultiIndex], coef: &[f64], unit: f64) -> Vec<f64> {
    basis
        .iter()
        .zip(coef)
        .map(|(a, c)| c / unit.powi(a.order() as i32))
        .collect()
}

/// `‖F‖_{q,Q} = inf_P |f − P|_{q,Q}` over polynomials of degree `≤ k`.
pub fn class_seminorm(class: &FunctionClass, q: f64, cube: &Cube) -> Result<f64> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidParameter(format!("q = {q} must be finite and at least 1")));
    }
    let f = class.representative();
    check_dim(f.domain(), &cube.center)?;
    let n = f.domain().dim();
    let basis = multi_indices(n, class.degree());
    let dim = basis.len();
    let unit = 0.5 * cube.side;
    let cells = cube_cells(f, &cube.center, cube.side, unit, &basis)?;
    let (fit, cond) = least_squares(f.samples(), &cells, dim).ok_or(Error::Singular)?;
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let g = residuals(f.samples(), &cells, dim, &fit);
    let measure = cube.measure();
    if q == 2.0 {
        let s: f64 = g.iter().zip(&cells.weights).map(|(v, w)| w * v * v).sum();
        return Ok((s / measure).sqrt());
    }
    let mut obj = Objective::new(q, dim);
    obj.push(cube.side, 1.0, measure, g, cells.weights, cells.phi);
    let start = vec![0.0; dim];
    let v0 = obj.value(&start);
    if v0 == 0.0 {
        return Ok(0.0);
    }
    let opts = MinimizeOptions { rel_tol: 1e-9, initial_step: v0, max_sweeps: 2000, ..Default::default() };
    let (best, _) = minimize_multistart(|c: &[f64]| obj.value(c), &start, v0, 2, &opts);
    Ok(best.value.min(v0))
}

/// `N_{q,γ}(F; x) = inf_{f ∈ F} η_{q,γ}(f; x)` over the admissible scales.
pub fn n_maximal(class: &FunctionClass, prm: &MaximalParams, x: &[f64], opts: &NOptions) -> Result<NValue> {
    let f = class.representative();
    let d = f.domain();
    check_dim(d, x)?;
    if class.degree() != prm.k {
        return Err(Error::InvalidParameter(format!(
            "class degree {} differs from k = {} of gamma = {}",
            class.degree(),
            prm.k,
            prm.gamma
        )));
    }
    let n = d.dim();
    let radii = admissible_scales(d, x, &prm.scales);
    if radii.is_empty() {
        return Err(Error::NoAdmissibleScale);
    }
    let basis = multi_indices(n, prm.k);
    let dim = basis.len();
    let unit = radii[0];
    let cells: Vec<CubeCells> = radii
        .iter()
        .map(|&r| cube_cells(f, x, r, unit, &basis))
        .collect::<Result<_>>()?;
    // Least-squares fit at the smallest scale that determines it.
    let fit = cells
        .iter()
        .filter(|c| c.indices.len() >= 2 * dim)
        .find_map(|c| least_squares(f.samples(), c, dim).filter(|(_, cond)| *cond <= MAX_CONDITION))
        .map(|(fit, _)| fit)
        .unwrap_or_else(|| vec![0.0; dim]);

    let mut obj = Objective::new(prm.q, dim);
    for (c, &r) in cells.into_iter().zip(&radii) {
        let g = residuals(f.samples(), &c, dim, &fit);
        let measure = r.powi(n as i32);
        obj.push(r, r.powf(-prm.gamma), measure, g, c.weights, c.phi);
    }
    let start = vec![0.0; dim];
    let (v0, arg0) = obj.eval(&start);
    let to_poly = |c: &[f64]| -> Result<Polynomial> {
        let total: Vec<f64> = fit.iter().zip(c).map(|(a, b)| a + b).collect();
        Polynomial::from_coefficients(n, prm.k, x, unscale(&basis, &total, unit))
    };
    if v0 == 0.0 {
        let p = to_poly(&start)?;
        return Ok(NValue {
            value: 0.0,
            minimizer: p.clone(),
            argmax_scale: radii[arg0],
            converged: true,
            run_minimizers: vec![p],
            evaluations: 1,
        });
    }
    let step = v0 / radii[0].powf(-prm.gamma);
    let mopts = MinimizeOptions {
        rel_tol: opts.rel_tol,
        initial_step: step,
        max_sweeps: opts.max_sweeps,
        seed: opts.seed,
        line_iterations: 40,
        ..Default::default()
    };
    let (best, runs) = minimize_multistart(|c: &[f64]| obj.value(c), &start, 10.0 * step, opts.restarts, &mopts);
    let (best_x, converged) = if best.value <= v0 { (best.x.clone(), best.converged) } else { (start.clone(), false) };
    let (value, arg) = obj.eval(&best_x);
    Ok(NValue {
        value,
        minimizer: to_poly(&best_x)?,
        argmax_scale: obj.terms[arg].r,
        converged,
        run_minimizers: runs.iter().map(|m| to_poly(&m.x)).collect::<Result<_>>()?,
        evaluations: runs.iter().map(|m| m.evaluations).sum(),
    })
}

/// [`n_maximal`] at many points, in parallel; each point gets its own seed
/// derived from `opts.seed` and its position in `points`.
pub fn n_field(
    class: &FunctionClass,
    prm: &MaximalParams,
    points: &[Vec<f64>],
    opts: &NOptions,
) -> Result<Vec<NValue>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let o = NOptions { seed: opts.seed.wrapping_mul(0x100_0000_01B3).wrapping_add(i as u64), ..opts.clone() };
            n_maximal(class, prm, x, &o)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainBox;
    use crate::maximal::{eta_maximal, ScaleGrid};

    fn line() -> DomainBox {
        DomainBox::new(1, 2.0, 2048).unwrap()
    }

    fn params(q: f64) -> MaximalParams {
        MaximalParams::new(q, 2.0, ScaleGrid::geometric(0.01, 1.5).unwrap()).unwrap()
    }

    #[test]
    fn power_moments_match_direct_sums() {
        let mut rng_vals = Vec::new();
        let mut s = 0.37f64;
        for _ in 0..200 {
            s = (s * 97.13 + 0.31).fract();
            rng_vals.push(s - 0.5);
        }
        let g = rng_vals[..50].to_vec();
        let w: Vec<f64> = rng_vals[50..100].iter().map(|v| v.abs() + 0.1).collect();
        let phi = rng_vals[100..200].to_vec();
        for q in [2.0, 4.0, 8.0] {
            let mut a = Objective::new(q, 2);
            a.push(1.0, 1.0, 1.0, g.clone(), w.clone(), phi.clone());
            let mut b = Objective::new(q, 2);
            b.betas.clear();
            b.push(1.0, 1.0, 1.0, g.clone(), w.clone(), phi.clone());
            for c in [[0.0, 0.0], [0.1, -0.2], [1.0, 0.5]] {
                let (x, y) = (a.value(&c), b.value(&c));
                assert!((x - y).abs() < 1e-10 * y, "q={q}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn class_seminorm_examples() {
        let d = line();
        let q = Cube::new(&[0.0], 1.0).unwrap();
        let sq = FunctionClass::new(GridFunction::from_fn(d, |x| x[0] * x[0]), 1);
        let v = class_seminorm(&sq, 2.0, &q).unwrap();
        assert!((v - (1.0f64 / 180.0).sqrt()).abs() < 1e-5, "{v}");
        let p = FunctionClass::new(GridFunction::from_fn(d, |x| 3.0 - 2.0 * x[0]), 1);
        assert!(class_seminorm(&p, 2.0, &q).unwrap() < 1e-12);
        assert!(class_seminorm(&p, 3.0, &q).unwrap() < 1e-12);
        let zero = FunctionClass::new(GridFunction::zeros(d), 1);
        assert_eq!(class_seminorm(&zero, 4.0, &q).unwrap(), 0.0);
        // General q against a q-independent lower bound: q = 1 distance ≤ q = 2 distance.
        let v1 = class_seminorm(&sq, 1.0, &q).unwrap();
        let v4 = class_seminorm(&sq, 4.0, &q).unwrap();
        assert!(v1 <= v + 1e-9 && v <= v4 + 1e-9, "{v1} {v} {v4}");
    }

    #[test]
    fn n_of_square_recovers_taylor() {
        let d = line();
        let x0 = 0.3;
        let sq = FunctionClass::new(GridFunction::from_fn(d, |x| x[0] * x[0]), 1);
        let r = n_maximal(&sq, &params(2.0), &[x0], &NOptions::default()).unwrap();
        assert!((r.value - 80f64.powf(-0.5)).abs() < 1e-3, "{}", r.value);
        let c = r.minimizer.coefficients();
        assert!((c[0] - x0 * x0).abs() < 1e-3 && (c[1] - 2.0 * x0).abs() < 1e-3, "{c:?}");
        for p in &r.run_minimizers {
            let c = p.coefficients();
            assert!((c[0] - x0 * x0).abs() < 1e-3 && (c[1] - 2.0 * x0).abs() < 1e-3, "{c:?}");
        }
        let eta = eta_maximal(sq.representative(), &params(2.0), &[x0]).unwrap();
        assert!(r.value <= eta.value);
    }

    #[test]
    fn n_trivial_classes() {
        let d = line();
        let zero = FunctionClass::new(GridFunction::zeros(d), 1);
        let r = n_maximal(&zero, &params(2.0), &[0.0], &NOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.minimizer.coefficients().iter().all(|c| *c == 0.0));
        let one = FunctionClass::new(GridFunction::from_fn(d, |_| 1.0), 1);
        let r = n_maximal(&one, &params(4.0), &[0.2], &NOptions::default()).unwrap();
        assert!(r.value < 1e-8, "{}", r.value);
        assert!((r.minimizer.coefficients()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn n_with_general_q() {
        let d = line();
        let f = FunctionClass::new(GridFunction::from_fn(d, |x| (2.0 * x[0]).sin()), 1);
        let opts = NOptions { restarts: 2, ..Default::default() };
        let a = n_maximal(&f, &params(3.0), &[0.1], &opts).unwrap();
        let eta = eta_maximal(f.representative(), &params(3.0), &[0.1]).unwrap();
        assert!(a.value > 0.0 && a.value <= eta.value);
        let b = n_maximal(&f, &params(4.0), &[0.1], &opts).unwrap();
        assert!(b.value >= a.value * (1.0 - 1e-3));
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let f = FunctionClass::new(GridFunction::zeros(line()), 0);
        assert!(n_maximal(&f, &params(2.0), &[0.0], &NOptions::default()).is_err());
    }
}
