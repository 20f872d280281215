//! Smooth test functions, Schwartz seminorms and the `φ`-maximal function.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, ScaleGrid, ScaleMax};
use crate::error::{Error, Result};
use crate::exponents::{luxemburg_norm, VariableExponent, DEFAULT_NORM_TOL};
use crate::grid::{binomial, multi_indices, DomainBox, GridFunction, MultiIndex};
use crate::quadrature::gauss_legendre;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// `e^{−|x|²}`.
    Gaussian,
    /// `Π exp(−1/(1 − xᵢ²))` on `(−1, 1)^n`.
    Bump,
}

/// `amplitude · profile(x)` for a profile from the catalogue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub kind: TestKind,
    pub n: usize,
    pub amplitude: f64,
}

fn bump_mass_1d() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let (x, w) = gauss_legendre(16);
        let panels = 256;
        let h = 2.0 / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let a = -1.0 + p as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                total += 0.5 * h * wi * bump_derivative_1d(0, a + 0.5 * h * (xi + 1.0));
            }
        }
        total
    })
}

/// `d^k/dt^k e^{−t²} = (−1)^k H_k(t) e^{−t²}` with physicists' Hermite `H_k`.
fn gauss_derivative_1d(k: u32, t: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * t);
    let hk = match k {
        0 => h0,
        _ => {
            for j in 1..k {
                let h2 = 2.0 * t * h1 - 2.0 * f64::from(j) * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * hk * (-t * t).exp()
}

/// `u^{(j)}` for `u(t) = −1/(1 − t²) = −½(1/(1−t) + 1/(1+t))`.
fn bump_exponent_derivative(j: u32, t: f64) -> f64 {
    let fj = (1..=j).map(f64::from).product::<f64>();
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    -0.5 * fj * ((1.0 - t).powi(-(j as i32) - 1) + sign * (1.0 + t).powi(-(j as i32) - 1))
}

/// Derivatives of `ψ = e^u` by `ψ^{(k+1)} = Σ_j C(k,j) u^{(j+1)} ψ^{(k−j)}`.
fn bump_derivative_1d(k: u32, t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let psi0 = bump_exponent_derivative(0, t).exp();
    if psi0 == 0.0 {
        return 0.0;
    }
    let u: Vec<f64> = (1..=k).map(|j| bump_exponent_derivative(j, t)).collect();
    let mut psi = vec![psi0];
    for kk in 0..k {
        let v: f64 = (0..=kk).map(|j| binomial(kk, j) * u[j as usize] * psi[(kk - j) as usize]).sum();
        psi.push(v);
    }
    psi[k as usize]
}

impl TestFunction {
    pub fn new(kind: TestKind, n: usize) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidParameter(format!("dimension {n} not in {{1, 2}}")));
        }
        Ok(Self { kind, n, amplitude: 1.0 })
    }

    pub fn gaussian(n: usize) -> Result<Self> {
        Self::new(TestKind::Gaussian, n)
    }

    pub fn bump(n: usize) -> Result<Self> {
        Self::new(TestKind::Bump, n)
    }

    /// The profile normalised to unit integral.
    pub fn unit_mass(kind: TestKind, n: usize) -> Result<Self> {
        let f = Self::new(kind, n)?;
        Ok(f.scaled(1.0 / f.integral()))
    }

    pub fn scaled(self, c: f64) -> Self {
        Self { amplitude: self.amplitude * c, ..self }
    }

    pub fn integral(&self) -> f64 {
        let one = match self.kind {
            TestKind::Gaussian => std::f64::consts::PI.sqrt(),
            TestKind::Bump => bump_mass_1d(),
        };
        self.amplitude * one.powi(self.n as i32)
    }

    /// Sup-norm radius outside which the function is zero or below `1e-18`.
    pub fn support_radius(&self) -> f64 {
        match self.kind {
            TestKind::Gaussian => 6.5,
            TestKind::Bump => 1.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.derivative(MultiIndex([0, 0]), x)
    }

    /// `∂^β φ(x)`, exact.
    pub fn derivative(&self, beta: MultiIndex, x: &[f64]) -> f64 {
        let one = |k: u32, t: f64| match self.kind {
            TestKind::Gaussian => gauss_derivative_1d(k, t),
            TestKind::Bump => bump_derivative_1d(k, t),
        };
        self.amplitude * x.iter().take(self.n).enumerate().map(|(i, &t)| one(beta.0[i], t)).product::<f64>()
    }
}

/// `sup_x (1 + |x|)^N |g(x)|` by a dense scan refined with golden sections.
fn weighted_sup(phi: &TestFunction, beta: MultiIndex, weight_power: u32) -> f64 {
    let r = match phi.kind {
        TestKind::Gaussian => 12.0,
        TestKind::Bump => 1.0,
    };
    let f = |x: &[f64]| {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        (1.0 + norm).powi(weight_power as i32) * phi.derivative(beta, x).abs()
    };
    let steps = if phi.n == 1 { 24_000 } else { 600 };
    let h = 2.0 * r / steps as f64;
    let mut best = (0.0, vec![0.0; phi.n]);
    if phi.n == 1 {
        for i in 0..=steps {
            let x = [-r + i as f64 * h];
            let v = f(&x);
            if v > best.0 {
                best = (v, x.to_vec());
            }
        }
    } else {
        for i in 0..=steps {
            for j in 0..=steps {
                let x = [-r + i as f64 * h, -r + j as f64 * h];
                let v = f(&x);
                if v > best.0 {
                    best = (v, x.to_vec());
                }
            }
        }
    }
    // Coordinatewise golden-section refinement within one scan cell.
    let mut x = best.1.clone();
    for _ in 0..3 {
        for i in 0..phi.n {
            let (mut lo, mut hi) = (x[i] - h, x[i] + h);
            let inv_phi = 0.618_033_988_749_894_8;
            for _ in 0..60 {
                let a = hi - inv_phi * (hi - lo);
                let b = lo + inv_phi * (hi - lo);
                let mut xa = x.clone();
                xa[i] = a;
                let mut xb = x.clone();
                xb[i] = b;
                if f(&xa) > f(&xb) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            let mut cand = x.clone();
            cand[i] = 0.5 * (lo + hi);
            if f(&cand) >= f(&x) {
                x = cand;
            }
        }
    }
    f(&x).max(best.0)
}

/// `p_N(φ) = Σ_{|β| ≤ N} sup_x (1 + |x|)^N |∂^β φ(x)|`.
pub fn schwartz_seminorm(phi: &TestFunction, order: u32) -> f64 {
    multi_indices(phi.n, order).into_iter().map(|beta| weighted_sup(phi, beta, order)).sum()
}

/// `M_φ f(x) = max_t |(φ_t ∗ f)(x)|`, `φ_t = t^{−n} φ(·/t)`, over the
/// scales `t ≥ 2Δx` of `t_grid`.
pub fn phi_maximal(f: &GridFunction, phi: &TestFunction, x: &[f64], t_grid: &ScaleGrid) -> Result<ScaleMax> {
    let d = f.domain();
    check_dim(d, x)?;
    if phi.n != d.dim() {
        return Err(Error::DimensionMismatch { expected: d.dim(), got: phi.n });
    }
    let min = 2.0 * d.spacing() * (1.0 - 1e-12);
    let mut best: Option<ScaleMax> = None;
    for &t in t_grid.radii().iter().filter(|&&t| t >= min) {
        let v = smoothed_value(f, phi, x, t).abs();
        if best.map_or(true, |b| v > b.value) {
            best = Some(ScaleMax { value: v, argmax_scale: t });
        }
    }
    best.ok_or(Error::NoAdmissibleScale)
}

/// `(φ_t ∗ f)(x)` by the midpoint rule over the cells within the support of `φ_t`.
fn smoothed_value(f: &GridFunction, phi: &TestFunction, x: &[f64], t: f64) -> f64 {
    let d = f.domain();
    let n = d.dim();
    let dx = d.spacing();
    let l = d.half_width();
    let npa = d.points_per_axis() as isize;
    let reach = phi.support_radius() * t;
    let range = |c: f64| {
        let lo = (((c - reach + l) / dx).floor() as isize).clamp(0, npa);
        let hi = (((c + reach + l) / dx).ceil() as isize).clamp(0, npa);
        lo as usize..hi as usize
    };
    let s = f.samples();
    let scale = t.powi(-(n as i32)) * d.cell_volume();
    let mut acc = 0.0;
    if n == 1 {
        for i in range(x[0]) {
            let v = s[i];
            if v != 0.0 {
                acc += v * phi.eval(&[(x[0] - d.axis_coord(i)) / t]);
            }
        }
    } else {
        let cols = range(x[1]);
        for i in range(x[0]) {
            let zi = (x[0] - d.axis_coord(i)) / t;
            for j in cols.clone() {
                let v = s[d.flatten([i, j])];
                if v != 0.0 {
                    acc += v * phi.eval(&[zi, (x[1] - d.axis_coord(j)) / t]);
                }
            }
        }
    }
    acc * scale
}

/// `M_φ f` at every cell centre of `points`.
pub fn phi_maximal_field(
    f: &GridFunction,
    phi: &TestFunction,
    t_grid: &ScaleGrid,
    points: DomainBox,
) -> Result<GridFunction> {
    let n = points.dim();
    let values = (0..points.len())
        .into_par_iter()
        .map(|idx| {
            let c = points.center(idx);
            phi_maximal(f, phi, &c[..n], t_grid).map(|m| m.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    GridFunction::new(points, values)
}

/// `‖M_φ f‖_{p(·)}` with `M_φ f` sampled on `f`'s own grid.
pub fn hardy_norm(f: &GridFunction, p: &impl VariableExponent, phi: &TestFunction, t_grid: &ScaleGrid) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let field = phi_maximal_field(f, phi, t_grid, *f.domain())?;
    luxemburg_norm(&field, p, DEFAULT_NORM_TOL)
}
