//! Uniform cell-centred grids over boxes `[-L, L]^n` (n = 1, 2), cubes,
//! midpoint quadrature and the discrete polyharmonic operator.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell centres are stored as two-component arrays; the second component
/// is unused (zero) in dimension one.
pub type Point = [f64; 2];

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Pairwise summation in a fixed order, so results do not depend on how
/// the terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// The box `[-half_width, half_width]^n` with `points_per_axis` cells per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    n: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl DomainBox {
    pub fn new(n: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidDomain(format!("dimension {n} not in {{1, 2}}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidDomain(format!("half width {half_width} must be positive")));
        }
        if points_per_axis < 16 || !points_per_axis.is_power_of_two() {
            return Err(Error::InvalidDomain(format!(
                "points per axis {points_per_axis} must be a power of two >= 16"
            )));
        }
        Ok(Self { n, half_width, points_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of cell `i` along any axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    /// Per-axis cell indices of a flat index (axis 0 varies slowest).
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        match self.n {
            1 => [idx, 0],
            _ => [idx / self.points_per_axis, idx % self.points_per_axis],
        }
    }

    pub fn flatten(&self, ij: [usize; 2]) -> usize {
        match self.n {
            1 => ij[0],
            _ => ij[0] * self.points_per_axis + ij[1],
        }
    }

    pub fn center(&self, idx: usize) -> Point {
        let ij = self.unflatten(idx);
        match self.n {
            1 => [self.axis_coord(ij[0]), 0.0],
            _ => [self.axis_coord(ij[0]), self.axis_coord(ij[1])],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().take(self.n).all(|v| v.abs() <= self.half_width)
    }

    /// Sup-norm distance from `x` to the boundary of the box (negative outside).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        x.iter()
            .take(self.n)
            .map(|v| self.half_width - v.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether cell `idx` lies at least `width` cells away from every edge.
    pub fn is_interior(&self, idx: usize, width: usize) -> bool {
        let ij = self.unflatten(idx);
        let hi = self.points_per_axis - width;
        ij.iter().take(self.n).all(|&i| i >= width && i < hi)
    }

    /// The same box refined by a factor of two per axis.
    pub fn refined(&self) -> Self {
        Self { points_per_axis: self.points_per_axis * 2, ..*self }
    }

    pub fn with_points(&self, points_per_axis: usize) -> Result<Self> {
        Self::new(self.n, self.half_width, points_per_axis)
    }
}

/// Samples of a real function at the cell centres of a [`DomainBox`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: DomainBox,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: DomainBox, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != domain.len() {
            return Err(Error::InvalidParameter(format!(
                "sample count {} does not match grid size {}",
                samples.len(),
                domain.len()
            )));
        }
        Ok(Self { domain, samples })
    }

    pub fn zeros(domain: DomainBox) -> Self {
        Self { domain, samples: vec![0.0; domain.len()] }
    }

    pub fn from_fn<F>(domain: DomainBox, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let n = domain.dim();
        let samples = (0..domain.len())
            .into_par_iter()
            .map(|idx| {
                let c = domain.center(idx);
                f(&c[..n])
            })
            .collect();
        Self { domain, samples }
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self {
            domain: self.domain,
            samples: self.samples.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// `self + c * other`; both functions must live on the same grid.
    pub fn axpy(&self, c: f64, other: &GridFunction) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::InvalidDomain("grid functions live on different boxes".into()));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + c * b).collect();
        Ok(Self { domain: self.domain, samples })
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Midpoint-rule integral over the whole box.
    pub fn total_integral(&self) -> f64 {
        pairwise_sum(&self.samples) * self.domain.cell_volume()
    }

    /// Discrete `L^q` norm over the box (`q = ∞` allowed).
    pub fn lq_norm(&self, q: f64) -> f64 {
        if q.is_infinite() {
            return self.max_abs();
        }
        let terms: Vec<f64> = self.samples.iter().map(|v| v.abs().powf(q)).collect();
        (pairwise_sum(&terms) * self.domain.cell_volume()).powf(1.0 / q)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(self.to_csv_string().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// CSV with a comment header recording the box, then one row per cell
    /// in index-major order: cell-centre coordinates followed by the value.
    pub fn to_csv_string(&self) -> String {
        let d = &self.domain;
        let mut s = String::with_capacity(d.len() * 32);
        let _ = writeln!(
            s,
            "# n={} half_width={} points_per_axis={}",
            d.n, d.half_width, d.points_per_axis
        );
        s.push_str(if d.n == 1 { "x0,value\n" } else { "x0,x1,value\n" });
        for (idx, v) in self.samples.iter().enumerate() {
            let c = d.center(idx);
            if d.n == 1 {
                let _ = writeln!(s, "{},{}", c[0], v);
            } else {
                let _ = writeln!(s, "{},{},{}", c[0], c[1], v);
            }
        }
        s
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::GridFormat { path: path.to_path_buf(), reason };
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let mut n = None;
        let mut half_width = None;
        let mut ppa = None;
        for field in header.trim_start_matches('#').split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad(format!("bad header field {field}")))?;
            match key {
                "n" => n = value.parse::<usize>().ok(),
                "half_width" => half_width = value.parse::<f64>().ok(),
                "points_per_axis" => ppa = value.parse::<usize>().ok(),
                _ => {}
            }
        }
        let (Some(n), Some(half_width), Some(ppa)) = (n, half_width, ppa) else {
            return Err(bad("header must record n, half_width and points_per_axis".into()));
        };
        let domain = DomainBox::new(n, half_width, ppa)?;
        let _columns = lines.next().ok_or_else(|| bad("missing column line".into()))??;
        let mut samples = Vec::with_capacity(domain.len());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value = line
                .rsplit(',')
                .next()
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {} has no numeric value", row + 1)))?;
            samples.push(value);
        }
        GridFunction::new(domain, samples).map_err(|e| bad(e.to_string()))
    }
}

/// The cube `Q(center, side)`: centre and side length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(center: &[f64], side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidParameter(format!("cube side {side} must be positive")));
        }
        if center.is_empty() || center.len() > 2 {
            return Err(Error::InvalidParameter("cube centre must have 1 or 2 coordinates".into()));
        }
        Ok(Self { center: center.to_vec(), side })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `δQ`: same centre, side multiplied by `delta`.
    pub fn dilate(&self, delta: f64) -> Self {
        Self { center: self.center.clone(), side: delta * self.side }
    }

    pub fn measure(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    /// Closed-cube membership (sup-norm ball of radius `side / 2`).
    pub fn contains(&self, x: &[f64]) -> bool {
        let h = 0.5 * self.side;
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= h)
    }

    /// Open-cube membership; used to decide the support of sampled data.
    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        let h = 0.5 * self.side;
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() < h)
    }
}

/// Quadrature weights of a cube on a grid: every cell meeting the cube,
/// weighted by the measure of the overlap.
#[derive(Clone, Debug)]
pub struct CubeStencil {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl CubeStencil {
    pub fn new(domain: &DomainBox, cube: &Cube) -> Result<Self> {
        let n = domain.dim();
        if cube.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cube.dim() });
        }
        let dx = domain.spacing();
        if cube.side < 2.0 * dx * (1.0 - 1e-12) {
            return Err(Error::SubResolutionCube { side: cube.side, min: 2.0 * dx });
        }
        let mut axes = Vec::with_capacity(n);
        for &c in &cube.center {
            let w = axis_overlaps(domain, c - 0.5 * cube.side, c + 0.5 * cube.side);
            if w.is_empty() {
                return Err(Error::CubeOutsideDomain);
            }
            axes.push(w);
        }
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        if n == 1 {
            for &(i, w) in &axes[0] {
                indices.push(i);
                weights.push(w);
            }
        } else {
            for &(i, wi) in &axes[0] {
                for &(j, wj) in &axes[1] {
                    indices.push(domain.flatten([i, j]));
                    weights.push(wi * wj);
                }
            }
        }
        Ok(Self { indices, weights })
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate_with(&self, values: &[f64], g: impl Fn(f64) -> f64) -> f64 {
        self.indices.iter().zip(&self.weights).map(|(&i, &w)| w * g(values[i])).sum()
    }
}

/// Cells of one axis overlapping `[lo, hi]`, with overlap lengths.
fn axis_overlaps(domain: &DomainBox, lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let l = domain.half_width();
    let dx = domain.spacing();
    let lo = lo.max(-l);
    let hi = hi.min(l);
    if hi <= lo {
        return Vec::new();
    }
    let first = (((lo + l) / dx).floor() as usize).min(domain.points_per_axis() - 1);
    let last = ((((hi + l) / dx).ceil() as usize).max(1) - 1).min(domain.points_per_axis() - 1);
    (first..=last)
        .filter_map(|i| {
            let a = -l + i as f64 * dx;
            let overlap = (hi.min(a + dx) - lo.max(a)).max(0.0);
            (overlap > 0.0).then_some((i, overlap))
        })
        .collect()
}

/// Midpoint-rule integral of `f` over `Q ∩ box` (f is zero outside the box).
pub fn integrate(f: &GridFunction, cube: &Cube) -> Result<f64> {
    let stencil = CubeStencil::new(f.domain(), cube)?;
    Ok(stencil.integrate_with(f.samples(), |v| v))
}

/// Integrals of `g(f)` over boxes in constant time, from the cumulative
/// integral at cell corners. Agrees with [`CubeStencil`] up to rounding.
#[derive(Clone, Debug)]
pub struct CumulativeIntegral {
    domain: DomainBox,
    /// Corner values, `(points + 1)^n`, axis 0 slowest.
    table: Vec<f64>,
}

impl CumulativeIntegral {
    pub fn new(f: &GridFunction, g: impl Fn(f64) -> f64) -> Self {
        let d = *f.domain();
        let npa = d.points_per_axis();
        let s = f.samples();
        let table = if d.dim() == 1 {
            let dx = d.spacing();
            let mut t = vec![0.0; npa + 1];
            for i in 0..npa {
                t[i + 1] = t[i] + g(s[i]) * dx;
            }
            t
        } else {
            let dv = d.cell_volume();
            let w = npa + 1;
            let mut t = vec![0.0; w * w];
            for i in 0..npa {
                let mut row = 0.0;
                for j in 0..npa {
                    row += g(s[i * npa + j]) * dv;
                    t[(i + 1) * w + j + 1] = t[i * w + j + 1] + row;
                }
            }
            t
        };
        Self { domain: d, table }
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// Corner cell and fractional offset of a coordinate, clamped to the box.
    fn locate(&self, x: f64) -> (usize, f64) {
        let l = self.domain.half_width();
        let npa = self.domain.points_per_axis();
        let u = ((x.clamp(-l, l) + l) / self.domain.spacing()).min(npa as f64);
        let k = (u.floor() as usize).min(npa - 1);
        (k, u - k as f64)
    }

    /// Cumulative integral over `[−L, x]^n ∩ box`.
    fn at(&self, x: [f64; 2]) -> f64 {
        let (k, s) = self.locate(x[0]);
        let t = &self.table;
        if self.domain.dim() == 1 {
            return t[k] + s * (t[k + 1] - t[k]);
        }
        let w = self.domain.points_per_axis() + 1;
        let (l, r) = self.locate(x[1]);
        let v00 = t[k * w + l];
        let v01 = t[k * w + l + 1];
        let v10 = t[(k + 1) * w + l];
        let v11 = t[(k + 1) * w + l + 1];
        (1.0 - s) * ((1.0 - r) * v00 + r * v01) + s * ((1.0 - r) * v10 + r * v11)
    }

    /// `∫_{Q ∩ box} g(f)`.
    pub fn integrate(&self, cube: &Cube) -> f64 {
        let h = 0.5 * cube.side;
        let c = &cube.center;
        if self.domain.dim() == 1 {
            return self.at([c[0] + h, 0.0]) - self.at([c[0] - h, 0.0]);
        }
        let (a0, b0, a1, b1) = (c[0] - h, c[0] + h, c[1] - h, c[1] + h);
        self.at([b0, b1]) - self.at([a0, b1]) - self.at([b0, a1]) + self.at([a0, a1])
    }
}

/// Multi-index `α = (α₁, α₂)`; components beyond the dimension are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub [u32; 2]);

impl MultiIndex {
    pub fn new(components: &[u32]) -> Self {
        let mut a = [0; 2];
        a[..components.len()].copy_from_slice(components);
        Self(a)
    }

    pub fn order(&self) -> u32 {
        self.0[0] + self.0[1]
    }

    pub fn monomial(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.0).map(|(v, e)| v.powi(e as i32)).product()
    }

    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| (1..=e).map(f64::from).product::<f64>()).product()
    }
}

/// All multi-indices in dimension `n` with `|α| ≤ k`, in graded order.
pub fn multi_indices(n: usize, k: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for total in 0..=k {
        out.extend(multi_indices_of_order(n, total));
    }
    out
}

/// All multi-indices in dimension `n` with `|α| = k`.
pub fn multi_indices_of_order(n: usize, k: u32) -> Vec<MultiIndex> {
    match n {
        1 => vec![MultiIndex([k, 0])],
        _ => (0..=k).rev().map(|a| MultiIndex([a, k - a])).collect(),
    }
}

/// A polynomial of degree at most `degree` in monomials `(x - center)^α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    n: usize,
    degree: u32,
    center: Vec<f64>,
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn zero(n: usize, degree: u32) -> Self {
        let len = multi_indices(n, degree).len();
        Self { n, degree, center: vec![0.0; n], coefficients: vec![0.0; len] }
    }

    /// Coefficients aligned with [`multi_indices`]`(n, degree)`.
    pub fn from_coefficients(n: usize, degree: u32, center: &[f64], coefficients: Vec<f64>) -> Result<Self> {
        if center.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: center.len() });
        }
        let len = multi_indices(n, degree).len();
        if coefficients.len() != len {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for a degree-{degree} polynomial in {n} variables (expected {len})",
                coefficients.len()
            )));
        }
        Ok(Self { n, degree, center: center.to_vec(), coefficients })
    }

    /// Builds a polynomial about the origin from explicit terms, rejecting
    /// multi-indices of order above `degree`.
    pub fn from_terms(n: usize, degree: u32, terms: &[(MultiIndex, f64)]) -> Result<Self> {
        let basis = multi_indices(n, degree);
        let mut p = Self::zero(n, degree);
        for (alpha, c) in terms {
            let pos = basis.iter().position(|b| b == alpha).ok_or_else(|| {
                Error::InvalidParameter(format!("multi-index {:?} exceeds degree {degree}", alpha.0))
            })?;
            p.coefficients[pos] += c;
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        multi_indices(self.n, self.degree).into_iter().zip(self.coefficients.iter().copied())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut shifted = [0.0; 2];
        for (i, (a, c)) in x.iter().zip(&self.center).enumerate() {
            shifted[i] = a - c;
        }
        self.terms().map(|(alpha, c)| c * alpha.monomial(&shifted[..self.n])).sum()
    }

    /// Re-expands the polynomial in monomials about a new centre.
    pub fn recentered(&self, new_center: &[f64]) -> Self {
        let basis = multi_indices(self.n, self.degree);
        let shift: Vec<f64> = new_center.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut coefficients = vec![0.0; basis.len()];
        // (y - c)^α = ((y - c') + s)^α with s = c' - c; expand binomially.
        for (alpha, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            for (pos, beta) in basis.iter().enumerate() {
                if (0..self.n).all(|i| beta.0[i] <= alpha.0[i]) {
                    let mut coef = c;
                    for i in 0..self.n {
                        let (a, b) = (alpha.0[i], beta.0[i]);
                        coef *= binomial(a, b) * shift[i].powi((a - b) as i32);
                    }
                    coefficients[pos] += coef;
                }
            }
        }
        Self { n: self.n, degree: self.degree, center: new_center.to_vec(), coefficients }
    }

    pub fn to_grid(&self, domain: DomainBox) -> GridFunction {
        GridFunction::from_fn(domain, |x| self.eval(x))
    }
}

pub(crate) fn binomial(a: u32, b: u32) -> f64 {
    (0..b).fold(1.0, |acc, i| acc * f64::from(a - i) / f64::from(i + 1))
}

/// Applies the centred `2n+1`-point Laplacian `m` times.
///
/// Cells within `m` of the box edge are filled by copying the nearest
/// value computed at the previous layer; use [`DomainBox::is_interior`]
/// with width `m` to exclude them from comparisons.
pub fn discrete_laplacian_power(f: &GridFunction, m: usize) -> GridFunction {
    let mut current = f.clone();
    for _ in 0..m {
        current = discrete_laplacian(&current);
    }
    current
}

fn discrete_laplacian(f: &GridFunction) -> GridFunction {
    let d = *f.domain();
    let npa = d.points_per_axis();
    let inv = 1.0 / (d.spacing() * d.spacing());
    let s = f.samples();
    let clamp = |i: usize| i.clamp(1, npa - 2);
    let samples = (0..d.len())
        .into_par_iter()
        .map(|idx| {
            let ij = d.unflatten(idx);
            match d.dim() {
                1 => {
                    let i = clamp(ij[0]);
                    (s[i - 1] - 2.0 * s[i] + s[i + 1]) * inv
                }
                _ => {
                    let (i, j) = (clamp(ij[0]), clamp(ij[1]));
                    let c = i * npa + j;
                    (s[c - npa] + s[c + npa] + s[c - 1] + s[c + 1] - 4.0 * s[c]) * inv
                }
            }
        })
        .collect();
    GridFunction { domain: d, samples }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_integral_matches_stencil() {
        for n in [1usize, 2] {
            let d = DomainBox::new(n, 1.0, 32).unwrap();
            let f = GridFunction::from_fn(d, |x| (3.0 * x[0]).sin() + if n == 2 { x[1] * x[1] } else { 0.0 });
            let cum = CumulativeIntegral::new(&f, f64::abs);
            for (k, side) in [0.13, 0.3, 1.1, 2.5, 5.0].iter().enumerate() {
                let c = [0.13 * k as f64 - 0.4, 0.9 - 0.31 * k as f64];
                let cube = Cube::new(&c[..n], *side).unwrap();
                let direct = CubeStencil::new(&d, &cube).unwrap().integrate_with(f.samples(), f64::abs);
                assert!((cum.integrate(&cube) - direct).abs() < 1e-12, "n={n} side={side}");
            }
            let away = Cube::new(&vec![5.0; n], 1.0).unwrap();
            assert_eq!(cum.integrate(&away), 0.0);
        }
    }

    fn line(points: usize, l: f64) -> DomainBox {
        DomainBox::new(1, l, points).unwrap()
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(DomainBox::new(3, 1.0, 16).is_err());
        assert!(DomainBox::new(1, 0.0, 16).is_err());
        assert!(DomainBox::new(1, 1.0, 24).is_err());
        assert!(DomainBox::new(1, 1.0, 8).is_err());
    }

    #[test]
    fn integrate_constant_and_odd() {
        let d = line(256, 2.0);
        let q = Cube::new(&[0.0], 1.0).unwrap();
        let one = GridFunction::from_fn(d, |_| 1.0);
        assert!((integrate(&one, &q).unwrap() - 1.0).abs() < 1e-14);
        let x = GridFunction::from_fn(d, |x| x[0]);
        assert!(integrate(&x, &q).unwrap().abs() < 1e-14);
    }

    #[test]
    fn integrate_square_is_second_order() {
        let q = Cube::new(&[0.0], 1.0).unwrap();
        let err = |p: usize| {
            let f = GridFunction::from_fn(line(p, 2.0), |x| x[0] * x[0]);
            (integrate(&f, &q).unwrap() - 1.0 / 12.0).abs()
        };
        let e = err(64);
        assert!(e < 1e-3);
        // Cube edges fall on cell edges here, so the midpoint error is
        // exactly Δx²·f''/24 per unit length.
        let dx = 4.0 / 64.0;
        assert!((e - dx * dx / 12.0).abs() < 1e-12);
    }

    #[test]
    fn sub_resolution_cube_rejected() {
        let d = line(64, 1.0);
        let f = GridFunction::zeros(d);
        let q = Cube::new(&[0.0], d.spacing()).unwrap();
        assert!(matches!(integrate(&f, &q), Err(Error::SubResolutionCube { .. })));
        let far = Cube::new(&[5.0], 1.0).unwrap();
        assert!(matches!(integrate(&f, &far), Err(Error::CubeOutsideDomain)));
    }

    #[test]
    fn partial_cells_are_weighted() {
        let d = line(64, 1.0);
        let one = GridFunction::from_fn(d, |_| 1.0);
        // Edges at ±0.3 cut through cells.
        let q = Cube::new(&[0.0], 0.6).unwrap();
        assert!((integrate(&one, &q).unwrap() - 0.6).abs() < 1e-13);
        // Cube hanging over the box edge only counts the inside part.
        let edge = Cube::new(&[1.0], 1.0).unwrap();
        assert!((integrate(&one, &edge).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn polynomial_examples() {
        let p = Polynomial::from_terms(1, 1, &[(MultiIndex::new(&[0]), 1.0), (MultiIndex::new(&[1]), 2.0)]).unwrap();
        assert_eq!(p.eval(&[3.0]), 7.0);
        let z = Polynomial::zero(2, 3);
        assert_eq!(z.eval(&[1.3, -2.0]), 0.0);
        let xy = Polynomial::from_terms(2, 2, &[(MultiIndex::new(&[1, 1]), 1.0)]).unwrap();
        assert_eq!(xy.eval(&[2.0, 3.0]), 6.0);
        assert!(Polynomial::from_terms(1, 1, &[(MultiIndex::new(&[2]), 1.0)]).is_err());
    }

    #[test]
    fn recentering_preserves_values() {
        let p = Polynomial::from_terms(
            2,
            3,
            &[
                (MultiIndex::new(&[0, 0]), 0.5),
                (MultiIndex::new(&[2, 1]), -1.5),
                (MultiIndex::new(&[0, 3]), 2.0),
                (MultiIndex::new(&[1, 0]), 0.25),
            ],
        )
        .unwrap();
        let q = p.recentered(&[0.7, -1.1]);
        for x in [[0.0, 0.0], [1.0, 2.0], [-0.3, 0.9]] {
            assert!((p.eval(&x) - q.eval(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn dilation_algebra() {
        let q = Cube::new(&[0.25, -1.0], 0.5).unwrap();
        let d = q.dilate(3.0);
        assert_eq!(d.side, 1.5);
        assert_eq!(d.center, q.center);
        assert_eq!(d.measure(), 2.25);
    }

    #[test]
    fn laplacian_examples() {
        let d = line(64, 1.0);
        let c = GridFunction::from_fn(d, |_| 3.0);
        let lc = discrete_laplacian_power(&c, 1);
        assert!(lc.samples().iter().all(|v| v.abs() < 1e-9));
        let sq = GridFunction::from_fn(d, |x| x[0] * x[0]);
        let l = discrete_laplacian_power(&sq, 1);
        for (idx, v) in l.samples().iter().enumerate() {
            if d.is_interior(idx, 1) {
                assert!((v - 2.0).abs() < 1e-9, "{v}");
            }
        }
        let s = GridFunction::from_fn(d, |x| x[0].sin());
        let ls = discrete_laplacian_power(&s, 1);
        let dx = d.spacing();
        for (idx, v) in ls.samples().iter().enumerate() {
            if d.is_interior(idx, 1) {
                let x = d.center(idx)[0];
                assert!((v + x.sin()).abs() < dx * dx);
            }
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let d = line(16, 1.0);
        let f = GridFunction::from_fn(d, |x| x[0]);
        let s = f.to_csv_string();
        assert!(s.starts_with("# n=1 half_width=1 points_per_axis=16\nx0,value\n"));
        assert_eq!(s.lines().count(), 18);
    }
}
