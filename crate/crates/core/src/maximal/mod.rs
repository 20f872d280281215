//! Local seminorms and the maximal operators built from them.
//!
//! Suprema over a continuous parameter (cube size `r`, dilation `t`,
//! truncation `ε`) are maxima over a [`ScaleGrid`].

mod calderon;
mod smooth;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{distance, multi_indices, Cube, CubeStencil, CumulativeIntegral, DomainBox, GridFunction};
use crate::potential::DerivativeKernel;

pub use calderon::{class_seminorm, n_field, n_maximal, NOptions, NValue};
pub use smooth::{hardy_norm, phi_maximal, phi_maximal_field, schwartz_seminorm, TestFunction, TestKind};

/// Default ratio of consecutive scales, `2^{1/4}`.
pub const SCALE_RATIO: f64 = 1.189_207_115_002_721;

/// A finite geometric set of scales `r_min·ρ^j ≤ r_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    radii: Vec<f64>,
    ratio: f64,
}

impl ScaleGrid {
    pub fn new(r_min: f64, r_max: f64, ratio: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_max >= r_min && r_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale range [{r_min}, {r_max}] is invalid")));
        }
        if !(ratio > 1.0 && ratio <= 2.0) {
            return Err(Error::InvalidParameter(format!("scale ratio {ratio} must lie in (1, 2]")));
        }
        let mut radii = Vec::new();
        let mut j = 0;
        loop {
            let r = r_min * ratio.powi(j);
            if r > r_max * (1.0 + 1e-9) {
                break;
            }
            radii.push(r);
            j += 1;
        }
        Ok(Self { radii, ratio })
    }

    pub fn geometric(r_min: f64, r_max: f64) -> Result<Self> {
        Self::new(r_min, r_max, SCALE_RATIO)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn r_min(&self) -> f64 {
        self.radii[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().expect("nonempty scale grid")
    }
}

/// `γ = k + t` with `k` an integer and `0 < t ≤ 1`.
pub fn split_gamma(gamma: f64) -> Result<(u32, f64)> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} must be positive")));
    }
    let k = gamma.ceil() - 1.0;
    Ok((k as u32, gamma - k))
}

/// Parameters of `η_{q,γ}` and `N_{q,γ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalParams {
    pub q: f64,
    pub gamma: f64,
    pub k: u32,
    pub scales: ScaleGrid,
}

impl MaximalParams {
    pub fn new(q: f64, gamma: f64, scales: ScaleGrid) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q = {q} must be finite and at least 1")));
        }
        let (k, _) = split_gamma(gamma)?;
        Ok(Self { q, gamma, k, scales })
    }

    /// Fractional part `t ∈ (0, 1]` of `γ`.
    pub fn t(&self) -> f64 {
        self.gamma - f64::from(self.k)
    }
}

/// A class in `E^q_k`: a representative modulo polynomials of degree `≤ k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionClass {
    representative: GridFunction,
    degree: u32,
}

impl FunctionClass {
    pub fn new(representative: GridFunction, degree: u32) -> Self {
        Self { representative, degree }
    }

    pub fn representative(&self) -> &GridFunction {
        &self.representative
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn domain(&self) -> &DomainBox {
        self.representative.domain()
    }

    /// Whether the representatives differ by a polynomial of degree `≤ k`,
    /// judged by the relative least-squares residual over the box.
    pub fn same_class(&self, other: &FunctionClass, tol: f64) -> Result<bool> {
        if self.degree != other.degree {
            return Ok(false);
        }
        let diff = self.representative.axpy(-1.0, &other.representative)?;
        let d = *diff.domain();
        let n = d.dim();
        let basis = multi_indices(n, self.degree);
        let l = d.half_width();
        let mut gram = DMatrix::<f64>::zeros(basis.len(), basis.len());
        let mut rhs = DVector::<f64>::zeros(basis.len());
        let mut rows = Vec::with_capacity(d.len());
        for (idx, &v) in diff.samples().iter().enumerate() {
            let c = d.center(idx);
            let u: Vec<f64> = c[..n].iter().map(|x| x / l).collect();
            let phi: Vec<f64> = basis.iter().map(|a| a.monomial(&u)).collect();
            for i in 0..basis.len() {
                rhs[i] += phi[i] * v;
                for j in 0..basis.len() {
                    gram[(i, j)] += phi[i] * phi[j];
                }
            }
            rows.push(phi);
        }
        let coef = gram.cholesky().ok_or(Error::Singular)?.solve(&rhs);
        let residual: f64 = diff
            .samples()
            .iter()
            .zip(&rows)
            .map(|(v, phi)| {
                let p: f64 = phi.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
                (v - p).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let scale = self
            .representative
            .lq_norm(2.0)
            .max(other.representative.lq_norm(2.0))
            / d.cell_volume().sqrt();
        Ok(residual <= tol * scale.max(f64::MIN_POSITIVE))
    }
}

/// `|f|_{q,Q} = (|Q|⁻¹ ∫_Q |f|^q)^{1/q}`, with `f = 0` outside the box.
pub fn seminorm_q_q(f: &GridFunction, q: f64, cube: &Cube) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be at least 1")));
    }
    let stencil = CubeStencil::new(f.domain(), cube)?;
    let integral = stencil.integrate_with(f.samples(), |v| v.abs().powf(q));
    Ok((integral / cube.measure()).powf(1.0 / q))
}

/// A maximum over a scale grid and the scale attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleMax {
    pub value: f64,
    pub argmax_scale: f64,
}

/// Scales `r ≥ 2Δx` whose cube `Q(x, r)` lies inside the box.
pub(crate) fn admissible_scales(domain: &DomainBox, x: &[f64], scales: &ScaleGrid) -> Vec<f64> {
    let min = 2.0 * domain.spacing() * (1.0 - 1e-12);
    let room = domain.distance_to_boundary(x);
    scales
        .radii()
        .iter()
        .copied()
        .filter(|&r| r >= min && 0.5 * r <= room * (1.0 + 1e-12))
        .collect()
}

fn check_dim(domain: &DomainBox, x: &[f64]) -> Result<()> {
    if x.len() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: x.len() });
    }
    Ok(())
}

/// `η_{q,γ}(f; x) = max_r r^{−γ} |f|_{q,Q(x,r)}` over the admissible scales.
pub fn eta_maximal(f: &GridFunction, prm: &MaximalParams, x: &[f64]) -> Result<ScaleMax> {
    check_dim(f.domain(), x)?;
    let radii = admissible_scales(f.domain(), x, &prm.scales);
    if radii.is_empty() {
        return Err(Error::NoAdmissibleScale);
    }
    let mut best = ScaleMax { value: -1.0, argmax_scale: radii[0] };
    for r in radii {
        let v = r.powf(-prm.gamma) * seminorm_q_q(f, prm.q, &Cube::new(x, r)?)?;
        if v > best.value {
            best = ScaleMax { value: v, argmax_scale: r };
        }
    }
    Ok(best)
}

/// Hardy–Littlewood maximal function `max_r |Q(x,r)|⁻¹ ∫_{Q(x,r)} |f|`;
/// cubes may leave the box, where `f` is taken to vanish.
pub fn hl_maximal(f: &GridFunction, x: &[f64], scales: &ScaleGrid) -> Result<ScaleMax> {
    check_dim(f.domain(), x)?;
    let min = 2.0 * f.domain().spacing() * (1.0 - 1e-12);
    let mut best: Option<ScaleMax> = None;
    for &r in scales.radii().iter().filter(|&&r| r >= min) {
        let cube = Cube::new(x, r)?;
        let v = match CubeStencil::new(f.domain(), &cube) {
            Ok(s) => s.integrate_with(f.samples(), f64::abs) / cube.measure(),
            Err(Error::CubeOutsideDomain) => 0.0,
            Err(e) => return Err(e),
        };
        if best.map_or(true, |b| v > b.value) {
            best = Some(ScaleMax { value: v, argmax_scale: r });
        }
    }
    best.ok_or(Error::NoAdmissibleScale)
}

/// [`hl_maximal`] from a precomputed cumulative integral of `|f|`.
pub fn hl_maximal_from(table: &CumulativeIntegral, x: &[f64], scales: &ScaleGrid) -> Result<ScaleMax> {
    let d = table.domain();
    check_dim(d, x)?;
    let min = 2.0 * d.spacing() * (1.0 - 1e-12);
    let mut best: Option<ScaleMax> = None;
    for &r in scales.radii().iter().filter(|&&r| r >= min) {
        let cube = Cube::new(x, r)?;
        let v = table.integrate(&cube) / cube.measure();
        if best.map_or(true, |b| v > b.value) {
            best = Some(ScaleMax { value: v, argmax_scale: r });
        }
    }
    best.ok_or(Error::NoAdmissibleScale)
}

/// Hardy–Littlewood maximal function at every cell centre of `f`'s grid.
pub fn hl_maximal_field(f: &GridFunction, scales: &ScaleGrid) -> Result<GridFunction> {
    use rayon::prelude::*;
    let d = *f.domain();
    let n = d.dim();
    let table = CumulativeIntegral::new(f, f64::abs);
    let values = (0..d.len())
        .into_par_iter()
        .map(|idx| {
            let c = d.center(idx);
            hl_maximal_from(&table, &c[..n], scales).map(|m| m.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    GridFunction::new(d, values)
}

/// `T*_α a(x) = max_ε |Σ_{|x−y|>ε} (∂^α h)(x − y) a(y) Δy|` over `eps`.
pub fn truncated_singular_integral(
    a: &GridFunction,
    kernel: &DerivativeKernel,
    eps: &ScaleGrid,
    x: &[f64],
) -> Result<f64> {
    let d = a.domain();
    check_dim(d, x)?;
    let n = d.dim();
    if kernel.spec().n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: kernel.spec().n() });
    }
    if kernel.is_zero() {
        return Ok(0.0);
    }
    let mut terms: Vec<(f64, f64)> = Vec::new();
    let mut z = [0.0; 2];
    for (idx, &v) in a.samples().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let c = d.center(idx);
        let dist = distance(x, &c[..n]);
        if dist < eps.r_min() {
            continue;
        }
        for i in 0..n {
            z[i] = x[i] - c[i];
        }
        terms.push((dist, v * kernel.eval(&z[..n])));
    }
    // Partial sums over cells farther than each ε, accumulated from the outside in.
    terms.sort_by(|p, q| q.0.total_cmp(&p.0));
    let dv = d.cell_volume();
    let mut best: f64 = 0.0;
    let mut acc = 0.0;
    let mut pos = 0;
    for &e in eps.radii().iter().rev() {
        while pos < terms.len() && terms[pos].0 > e {
            acc += terms[pos].1;
            pos += 1;
        }
        best = best.max((acc * dv).abs());
    }
    Ok(best)
}

/// One row of a maximal-function field export.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldRow {
    pub x: Vec<f64>,
    pub value: f64,
    pub argmax_scale: f64,
}

pub fn field_csv_string(rows: &[FieldRow]) -> String {
    let mut s = String::new();
    let n = rows.first().map_or(1, |r| r.x.len());
    s.push_str(if n == 1 { "x0,value,argmax_scale\n" } else { "x0,x1,value,argmax_scale\n" });
    for r in rows {
        for c in &r.x {
            let _ = write!(s, "{c},");
        }
        let _ = writeln!(s, "{},{}", r.value, r.argmax_scale);
    }
    s
}

pub fn write_field_csv(rows: &[FieldRow], path: &Path) -> Result<()> {
    std::fs::write(path, field_csv_string(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Polynomial;
    use crate::grid::MultiIndex;

    fn line() -> DomainBox {
        DomainBox::new(1, 4.0, 2048).unwrap()
    }

    #[test]
    fn gamma_split() {
        assert_eq!(split_gamma(2.0).unwrap(), (1, 1.0));
        let (k, t) = split_gamma(2.5).unwrap();
        assert_eq!(k, 2);
        assert!((t - 0.5).abs() < 1e-15);
        assert_eq!(split_gamma(0.3).unwrap().0, 0);
        assert!(split_gamma(0.0).is_err());
    }

    #[test]
    fn scale_grid_shape() {
        let g = ScaleGrid::geometric(0.25, 4.0).unwrap();
        assert_eq!(g.radii().len(), 17);
        assert!((g.r_max() - 4.0).abs() < 1e-12);
        assert!(ScaleGrid::new(1.0, 2.0, 2.5).is_err());
    }

    #[test]
    fn seminorm_examples() {
        let d = line();
        let c = GridFunction::from_fn(d, |_| -3.0);
        let q = Cube::new(&[0.3], 1.7).unwrap();
        assert!((seminorm_q_q(&c, 2.5, &q).unwrap() - 3.0).abs() < 1e-12);
        let chi = GridFunction::from_fn(d, |x| if (0.0..=1.0).contains(&x[0]) { 1.0 } else { 0.0 });
        let v = seminorm_q_q(&chi, 2.0, &Cube::new(&[0.0], 2.0).unwrap()).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(seminorm_q_q(&GridFunction::zeros(d), 2.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn eta_examples() {
        let d = line();
        let scales = ScaleGrid::geometric(0.01, 2.0).unwrap();
        let prm = MaximalParams::new(2.0, 2.0, scales).unwrap();
        assert_eq!(eta_maximal(&GridFunction::zeros(d), &prm, &[0.1]).unwrap().value, 0.0);
        let one = GridFunction::from_fn(d, |_| 1.0);
        let e = eta_maximal(&one, &prm, &[0.1]).unwrap();
        let rmin = admissible_scales(&d, &[0.1], &prm.scales)[0];
        assert!((e.value - rmin.powi(-2)).abs() < 1e-9 * e.value);
        assert_eq!(e.argmax_scale, rmin);
        // Cubes spanning at least 24 cells resolve the quartic integral.
        let x0 = 0.3;
        let sq = GridFunction::from_fn(d, |x| (x[0] - x0).powi(2));
        let coarse = MaximalParams::new(2.0, 2.0, ScaleGrid::geometric(24.0 * d.spacing(), 2.0).unwrap()).unwrap();
        let e = eta_maximal(&sq, &coarse, &[x0]).unwrap();
        assert!((e.value - 80f64.powf(-0.5)).abs() < 1e-3, "{}", e.value);
    }

    #[test]
    fn hl_examples() {
        let d = DomainBox::new(1, 8.0, 4096).unwrap();
        let scales = ScaleGrid::geometric(0.25, 16.0).unwrap();
        let chi = GridFunction::from_fn(d, |x| if (0.0..=1.0).contains(&x[0]) { 1.0 } else { 0.0 });
        let m = hl_maximal(&chi, &[2.0], &scales).unwrap();
        assert!((m.value - 0.25).abs() < 1e-3, "{m:?}");
        assert!((m.argmax_scale - 4.0).abs() < 1e-9);
        let one = GridFunction::from_fn(d, |_| 1.0);
        assert!((hl_maximal(&one, &[0.0], &scales).unwrap().value - 1.0).abs() < 1e-12);
        assert_eq!(hl_maximal(&GridFunction::zeros(d), &[0.0], &scales).unwrap().value, 0.0);
    }

    #[test]
    fn class_equality() {
        let d = DomainBox::new(2, 1.0, 32).unwrap();
        let f = GridFunction::from_fn(d, |x| (3.0 * x[0]).sin() * x[1]);
        let p = Polynomial::from_terms(2, 1, &[(MultiIndex::new(&[0, 0]), 2.0), (MultiIndex::new(&[1, 0]), -1.5)])
            .unwrap()
            .to_grid(d);
        let a = FunctionClass::new(f.clone(), 1);
        let b = FunctionClass::new(f.axpy(1.0, &p).unwrap(), 1);
        assert!(a.same_class(&b, 1e-10).unwrap());
        let quad = GridFunction::from_fn(d, |x| x[0] * x[1]);
        let c = FunctionClass::new(f.axpy(1.0, &quad).unwrap(), 1);
        assert!(!a.same_class(&c, 1e-6).unwrap());
    }

    #[test]
    fn field_csv_layout() {
        let rows = vec![FieldRow { x: vec![0.5], value: 1.25, argmax_scale: 0.5 }];
        assert_eq!(field_csv_string(&rows), "x0,value,argmax_scale\n0.5,1.25,0.5\n");
    }
}
