//! `(p(·), p₀, d)`-atoms, atomic sums and the aggregate `A({kⱼ}, {Qⱼ}, p(·))`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{indicator, indicator_norm, luxemburg_norm, VariableExponent, DEFAULT_NORM_TOL};
use crate::grid::{multi_indices, pairwise_sum, Cube, DomainBox, GridFunction, MultiIndex};

/// Fraction of the size bound that constructed atoms reach.
pub const SATURATION: f64 = 0.9;
/// Vanishing-moment tolerance, relative to `∫|a(x)||x−x₀|^α dx`.
pub const MOMENT_TOL: f64 = 1e-10;
/// Relative slack on the size condition.
pub const SIZE_TOL: f64 = 1e-6;
const MAX_DRAWS: usize = 20;
/// Power of the `(1 − t²)` localiser; the profile is `C^{BUMP_POWER−1}`.
const BUMP_POWER: i32 = 3;

/// A function supported in `cube` with bounded `L^{p₀}` norm and vanishing
/// moments up to degree `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub cube: Cube,
    pub data: GridFunction,
    /// `f64::INFINITY` for `p₀ = ∞`.
    pub p0: f64,
    pub d: u32,
}

impl Atom {
    pub fn domain(&self) -> &DomainBox {
        self.data.domain()
    }

    /// Cells carrying nonzero samples, with their values.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.data
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect()
    }

    /// Distance from the cube to the edge of the box, per axis minimum.
    pub fn margin(&self) -> f64 {
        let l = self.domain().half_width();
        self.cube
            .center
            .iter()
            .map(|c| l - c.abs() - 0.5 * self.cube.side)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Coordinates of a point relative to the cube, scaled to `(-1, 1)^n`.
fn local_coords(cube: &Cube, x: &[f64]) -> [f64; 2] {
    let h = 0.5 * cube.side;
    let mut t = [0.0; 2];
    for (i, (a, c)) in x.iter().zip(&cube.center).enumerate() {
        t[i] = (a - c) / h;
    }
    t
}

/// Draws a random atom on `domain` supported in `cube`.
///
/// The profile is a polynomial of degree `d + 1` with Gaussian
/// coefficients times the localiser `Π(1 − tᵢ²)^3`; moments up to degree `d`
/// are removed by solving the Gram system of the localiser-weighted
/// monomials on the grid, and the result is scaled to 90% of the size
/// bound `|Q|^{1/p₀} / ‖χ_Q‖_{p(·)}`.
pub fn make_atom(
    domain: DomainBox,
    cube: &Cube,
    p0: f64,
    d: u32,
    p: &impl VariableExponent,
    seed: u64,
) -> Result<Atom> {
    let n = domain.dim();
    if cube.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: cube.dim() });
    }
    if !(p0 > 1.0) {
        return Err(Error::InvalidParameter(format!("p0 = {p0} must exceed 1")));
    }
    if cube.side < 2.0 * domain.spacing() {
        return Err(Error::SubResolutionCube { side: cube.side, min: 2.0 * domain.spacing() });
    }
    // Cells strictly inside the cube and their local coordinates.
    let mut cells = Vec::new();
    for idx in 0..domain.len() {
        let c = domain.center(idx);
        if cube.contains_strictly(&c[..n]) {
            cells.push((idx, local_coords(cube, &c[..n])));
        }
    }
    if cells.is_empty() {
        return Err(Error::CubeOutsideDomain);
    }
    let weight: Vec<f64> = cells
        .iter()
        .map(|(_, t)| t[..n].iter().map(|v| (1.0 - v * v).powi(BUMP_POWER)).product())
        .collect();
    let killed = multi_indices(n, d);
    let profile_basis = multi_indices(n, d + 1);
    let gram_basis: Vec<Vec<f64>> = cells
        .iter()
        .map(|(_, t)| killed.iter().map(|a| a.monomial(&t[..n])).collect())
        .collect();
    let mut gram = DMatrix::<f64>::zeros(killed.len(), killed.len());
    for (w, row) in weight.iter().zip(&gram_basis) {
        for i in 0..killed.len() {
            for j in 0..killed.len() {
                gram[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    let chol = gram.clone().cholesky().ok_or(Error::Singular)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAWS {
        let coeffs: Vec<f64> = profile_basis.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        let poly: Vec<f64> = cells
            .iter()
            .map(|(_, t)| profile_basis.iter().zip(&coeffs).map(|(a, c)| c * a.monomial(&t[..n])).sum())
            .collect();
        let mut rhs = DVector::<f64>::zeros(killed.len());
        for ((w, row), pv) in weight.iter().zip(&gram_basis).zip(&poly) {
            for i in 0..killed.len() {
                rhs[i] += w * pv * row[i];
            }
        }
        let c = chol.solve(&rhs);
        let values: Vec<f64> = weight
            .iter()
            .zip(&gram_basis)
            .zip(&poly)
            .map(|((w, row), pv)| w * (pv - row.iter().zip(c.iter()).map(|(m, ci)| m * ci).sum::<f64>()))
            .collect();
        // One pass of iterative refinement drives the residual moments to roundoff.
        let mut resid = DVector::<f64>::zeros(killed.len());
        for (v, row) in values.iter().zip(&gram_basis) {
            for i in 0..killed.len() {
                resid[i] += v * row[i];
            }
        }
        let corr = chol.solve(&resid);
        let values: Vec<f64> = values
            .iter()
            .zip(&weight)
            .zip(&gram_basis)
            .map(|((v, w), row)| v - w * row.iter().zip(corr.iter()).map(|(m, ci)| m * ci).sum::<f64>())
            .collect();

        let before: f64 = weight.iter().zip(&poly).map(|(w, pv)| (w * pv).powi(2)).sum::<f64>().sqrt();
        let after: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(after > 1e-8 * before) {
            continue;
        }
        let mut samples = vec![0.0; domain.len()];
        for ((idx, _), v) in cells.iter().zip(&values) {
            samples[*idx] = *v;
        }
        let mut data = GridFunction::new(domain, samples)?;
        let bound = size_bound(domain, cube, p0, p)?;
        let current = data.lq_norm(p0);
        data = data.scaled(SATURATION * bound / current);
        return Ok(Atom { cube: cube.clone(), data, p0, d });
    }
    Err(Error::DegenerateAtom(MAX_DRAWS))
}

/// `|Q|^{1/s} / ‖χ_Q‖_{p(·)}`.
pub fn size_bound(domain: DomainBox, cube: &Cube, s: f64, p: &impl VariableExponent) -> Result<f64> {
    let chi = indicator_norm(domain, cube, p)?;
    let q = cube.measure();
    Ok(if s.is_infinite() { 1.0 / chi } else { q.powf(1.0 / s) / chi })
}

/// Outcome of checking the atom conditions; every clause is reported with
/// its measured slack.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomReport {
    /// Largest |sample| outside the cube (zero for a valid atom).
    pub support_violation: f64,
    pub support_ok: bool,
    /// `‖a‖_{p₀}` divided by `|Q|^{1/p₀}/‖χ_Q‖_{p(·)}`.
    pub size_ratio: f64,
    pub size_ok: bool,
    /// Largest relative moment `|∫a(x)(x−x₀)^α| / ∫|a||x−x₀|^α` over `|α| ≤ d`.
    pub moment_residual: f64,
    pub moments_ok: bool,
    /// `‖a‖_s` divided by `|Q|^{1/s}/‖χ_Q‖_{p(·)}` when an `s` was requested.
    pub remark_ratio: Option<f64>,
    pub remark_ok: bool,
    pub pass: bool,
}

/// Checks support, size, vanishing moments, and optionally the `L^s`
/// size bound for `1 < s < p₀`.
pub fn validate_atom(a: &Atom, p: &impl VariableExponent, s: Option<f64>) -> Result<AtomReport> {
    let domain = *a.domain();
    let n = domain.dim();
    let mut support_violation: f64 = 0.0;
    let mut inside = Vec::new();
    for (idx, &v) in a.data.samples().iter().enumerate() {
        let c = domain.center(idx);
        if a.cube.contains(&c[..n]) {
            if v != 0.0 {
                inside.push((local_coords(&a.cube, &c[..n]), v));
            }
        } else {
            support_violation = support_violation.max(v.abs());
        }
    }
    let bound = size_bound(domain, &a.cube, a.p0, p)?;
    let size_ratio = a.data.lq_norm(a.p0) / bound;

    let dv = domain.cell_volume();
    let mut moment_residual: f64 = 0.0;
    for alpha in multi_indices(n, a.d) {
        let signed: Vec<f64> = inside.iter().map(|(t, v)| v * alpha.monomial(&t[..n])).collect();
        let scale: f64 = signed.iter().map(|v| v.abs()).sum::<f64>() * dv;
        if scale > 0.0 {
            moment_residual = moment_residual.max((pairwise_sum(&signed) * dv).abs() / scale);
        }
    }

    let (remark_ratio, remark_ok) = match s {
        Some(s) => {
            if !(s > 1.0 && s < a.p0) {
                return Err(Error::InvalidParameter(format!("s = {s} must lie in (1, p0)")));
            }
            let r = a.data.lq_norm(s) / size_bound(domain, &a.cube, s, p)?;
            (Some(r), r <= 1.0 + SIZE_TOL)
        }
        None => (None, true),
    };
    let support_ok = support_violation == 0.0;
    let size_ok = size_ratio <= 1.0 + SIZE_TOL;
    let moments_ok = moment_residual <= MOMENT_TOL;
    Ok(AtomReport {
        support_violation,
        support_ok,
        size_ratio,
        size_ok,
        moment_residual,
        moments_ok,
        remark_ratio,
        remark_ok,
        pass: support_ok && size_ok && moments_ok && remark_ok,
    })
}

/// Raw moment `∫ a(x)(x − x₀)^α dx` on the grid.
pub fn moment(a: &Atom, alpha: MultiIndex) -> f64 {
    let domain = a.domain();
    let n = domain.dim();
    let terms: Vec<f64> = a
        .support()
        .into_iter()
        .map(|(idx, v)| {
            let c = domain.center(idx);
            let shifted: Vec<f64> = c[..n].iter().zip(&a.cube.center).map(|(x, x0)| x - x0).collect();
            v * alpha.monomial(&shifted)
        })
        .collect();
    pairwise_sum(&terms) * domain.cell_volume()
}

/// `f = Σ kⱼ aⱼ` with nonnegative coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AtomicDecomposition {
    pub terms: Vec<(f64, Atom)>,
}

impl AtomicDecomposition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, k: f64, atom: Atom) -> Result<()> {
        if !(k >= 0.0) {
            return Err(Error::InvalidParameter(format!("coefficient {k} must be nonnegative")));
        }
        if let Some((_, first)) = self.terms.first() {
            if first.domain() != atom.domain() {
                return Err(Error::InvalidDomain("atoms of one decomposition must share a grid".into()));
            }
        }
        self.terms.push((k, atom));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|(k, _)| *k)
    }

    pub fn cubes(&self) -> impl Iterator<Item = &Cube> + '_ {
        self.terms.iter().map(|(_, a)| &a.cube)
    }

    /// Concatenation of two decompositions.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for (k, a) in &other.terms {
            out.push(*k, a.clone())?;
        }
        Ok(out)
    }
}

/// Pointwise sum `Σ kⱼ aⱼ`; the zero function on `domain` when empty.
pub fn synthesize(dec: &AtomicDecomposition, domain: DomainBox) -> Result<GridFunction> {
    let mut out = GridFunction::zeros(domain);
    for (k, a) in &dec.terms {
        out = out.axpy(*k, &a.data)?;
    }
    Ok(out)
}

/// `‖(Σⱼ (kⱼ χ_{Qⱼ}/‖χ_{Qⱼ}‖_{p(·)})^{p̲})^{1/p̲}‖_{p(·)}`.
pub fn a_quantity(dec: &AtomicDecomposition, p: &impl VariableExponent) -> Result<f64> {
    let Some((_, first)) = dec.terms.first() else {
        return Ok(0.0);
    };
    let domain = *first.domain();
    let pu = p.p_underline();
    let mut acc = vec![0.0; domain.len()];
    for (k, a) in &dec.terms {
        if *k == 0.0 {
            continue;
        }
        let chi = indicator(domain, &a.cube);
        let norm = luxemburg_norm(&chi, p, DEFAULT_NORM_TOL * 1e-2)?;
        for (s, c) in acc.iter_mut().zip(chi.samples()) {
            if *c != 0.0 {
                *s += (k * c / norm).powf(pu);
            }
        }
    }
    let aggregate = GridFunction::new(domain, acc.into_iter().map(|s| s.powf(1.0 / pu)).collect())?;
    luxemburg_norm(&aggregate, p, DEFAULT_NORM_TOL)
}

/// One entry of the decomposition JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomRecord {
    pub k: f64,
    pub cube: Cube,
    /// `null` encodes `p₀ = ∞`.
    pub p0: Option<f64>,
    pub d: u32,
    /// Grid CSV holding the samples, relative to the JSON file.
    pub data_ref: String,
}

/// Writes `decomposition.json` and one grid CSV per atom into `dir`.
pub fn write_decomposition(dec: &AtomicDecomposition, dir: &Path) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut records = Vec::with_capacity(dec.len());
    for (j, (k, a)) in dec.terms.iter().enumerate() {
        let name = format!("atom_{j:03}.csv");
        a.data.write_csv(&dir.join(&name))?;
        records.push(AtomRecord {
            k: *k,
            cube: a.cube.clone(),
            p0: a.p0.is_finite().then_some(a.p0),
            d: a.d,
            data_ref: name,
        });
    }
    let path = dir.join("decomposition.json");
    std::fs::write(&path, serde_json::to_string_pretty(&records)?)?;
    Ok(path)
}

pub fn read_decomposition(path: &Path) -> Result<AtomicDecomposition> {
    let records: Vec<AtomRecord> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut dec = AtomicDecomposition::new();
    for r in records {
        let data = GridFunction::read_csv(&base.join(&r.data_ref))?;
        dec.push(r.k, Atom { cube: r.cube, data, p0: r.p0.unwrap_or(f64::INFINITY), d: r.d })?;
    }
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::ExponentFunction;

    fn line() -> DomainBox {
        DomainBox::new(1, 4.0, 512).unwrap()
    }

    fn square() -> DomainBox {
        DomainBox::new(2, 2.0, 64).unwrap()
    }

    #[test]
    fn constructed_atoms_validate() {
        let p = ExponentFunction::radial_bump(1.5, 0.8, &[0.0], 1.0, 0.5).unwrap();
        for seed in 0..8 {
            let q = Cube::new(&[0.25], 1.0).unwrap();
            let a = make_atom(line(), &q, 4.0, 2, &p, seed).unwrap();
            let r = validate_atom(&a, &p, Some(2.0)).unwrap();
            assert!(r.pass, "{r:?}");
            assert!((r.size_ratio - SATURATION).abs() < 1e-9);
        }
        let p2 = ExponentFunction::constant(1.2).unwrap();
        let q2 = Cube::new(&[0.0, 0.5], 1.0).unwrap();
        let a = make_atom(square(), &q2, f64::INFINITY, 3, &p2, 3).unwrap();
        assert!(validate_atom(&a, &p2, Some(3.0)).unwrap().pass);
    }

    #[test]
    fn zero_moment_atom() {
        let p = ExponentFunction::constant(1.0).unwrap();
        let q = Cube::new(&[0.0], 1.0).unwrap();
        let a = make_atom(line(), &q, 2.0, 0, &p, 11).unwrap();
        let scale: f64 = a.data.abs().total_integral();
        assert!(a.data.total_integral().abs() <= 1e-10 * scale);
        // Next-order moment is generically nonzero.
        assert!(moment(&a, MultiIndex::new(&[1])).abs() > 1e-6 * scale);
    }

    #[test]
    fn violations_are_reported() {
        let p = ExponentFunction::constant(1.0).unwrap();
        let q = Cube::new(&[0.0], 1.0).unwrap();
        let a = make_atom(line(), &q, 2.0, 1, &p, 5).unwrap();
        let big = Atom { data: a.data.scaled(10.0), ..a.clone() };
        let r = validate_atom(&big, &p, None).unwrap();
        assert!(!r.size_ok && !r.pass);
        // 10 × the 90% saturation level.
        assert!((r.size_ratio - 9.0).abs() < 1e-9, "{}", r.size_ratio);
        assert!(r.support_ok && r.moments_ok);

        let shift = 2 * line().points_per_axis() / 8;
        let mut moved = vec![0.0; line().len()];
        for (i, v) in a.data.samples().iter().enumerate() {
            if *v != 0.0 {
                moved[i + shift] = *v;
            }
        }
        let shifted = Atom { data: GridFunction::new(line(), moved).unwrap(), ..a };
        let r = validate_atom(&shifted, &p, None).unwrap();
        assert!(!r.support_ok && r.support_violation > 0.0);
    }

    #[test]
    fn sub_resolution_and_bad_p0() {
        let p = ExponentFunction::constant(1.0).unwrap();
        let tiny = Cube::new(&[0.0], 0.01).unwrap();
        assert!(make_atom(line(), &tiny, 2.0, 0, &p, 0).is_err());
        let q = Cube::new(&[0.0], 1.0).unwrap();
        assert!(make_atom(line(), &q, 1.0, 0, &p, 0).is_err());
    }

    #[test]
    fn a_quantity_examples() {
        let p = ExponentFunction::constant(1.0).unwrap();
        let d = line();
        let q1 = Cube::new(&[-1.0], 1.0).unwrap();
        let q2 = Cube::new(&[1.0], 1.0).unwrap();
        let a1 = make_atom(d, &q1, 2.0, 0, &p, 1).unwrap();
        let a2 = make_atom(d, &q2, 2.0, 0, &p, 2).unwrap();

        let mut single = AtomicDecomposition::new();
        single.push(1.0, a1.clone()).unwrap();
        assert!((a_quantity(&single, &p).unwrap() - 1.0).abs() < 1e-8);

        let mut zero = AtomicDecomposition::new();
        zero.push(0.0, a1.clone()).unwrap();
        zero.push(0.0, a2.clone()).unwrap();
        assert_eq!(a_quantity(&zero, &p).unwrap(), 0.0);

        let mut two = AtomicDecomposition::new();
        two.push(1.0, a1).unwrap();
        two.push(1.0, a2).unwrap();
        assert!((a_quantity(&two, &p).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn synthesis_is_linear() {
        let p = ExponentFunction::constant(1.0).unwrap();
        let d = line();
        assert!(synthesize(&AtomicDecomposition::new(), d).unwrap().is_zero());
        let a = make_atom(d, &Cube::new(&[0.5], 1.0).unwrap(), 2.0, 1, &p, 9).unwrap();
        let b = make_atom(d, &Cube::new(&[-0.5], 0.5).unwrap(), 2.0, 1, &p, 10).unwrap();
        let mut one = AtomicDecomposition::new();
        one.push(2.0, a.clone()).unwrap();
        assert_eq!(synthesize(&one, d).unwrap(), a.data.scaled(2.0));
        let mut other = AtomicDecomposition::new();
        other.push(0.5, b).unwrap();
        let joint = synthesize(&one.concat(&other).unwrap(), d).unwrap();
        let split = synthesize(&one, d).unwrap().axpy(1.0, &synthesize(&other, d).unwrap()).unwrap();
        for (x, y) in joint.samples().iter().zip(split.samples()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn decomposition_files_roundtrip() {
        let p = ExponentFunction::constant(1.0).unwrap();
        let d = line();
        let a = make_atom(d, &Cube::new(&[0.5], 1.0).unwrap(), f64::INFINITY, 1, &p, 9).unwrap();
        let mut dec = AtomicDecomposition::new();
        dec.push(1.5, a).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_decomposition(&dec, dir.path()).unwrap();
        let back = read_decomposition(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.terms[0].0, 1.5);
        assert!(back.terms[0].1.p0.is_infinite());
        for (x, y) in back.terms[0].1.data.samples().iter().zip(dec.terms[0].1.data.samples()) {
            assert_eq!(x, y);
        }
    }
}
