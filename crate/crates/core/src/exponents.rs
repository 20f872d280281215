//! Variable exponents `p(·)`, the modular `ρ_{p(·)}` and the Luxemburg norm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, Cube, GridFunction};

/// Default residual tolerance `|ρ(f/λ) − 1|` for [`luxemburg_norm`].
pub const DEFAULT_NORM_TOL: f64 = 1e-8;

/// Bracket expansions allowed before the norm search gives up.
pub const MAX_BRACKET_DOUBLINGS: usize = 200;

/// Anything that assigns an exponent to each point of the box.
///
/// The three analytic families live in [`ExponentFunction`]; tests plug in
/// piecewise exponents through this trait as well.
pub trait VariableExponent: Sync {
    fn eval(&self, x: &[f64]) -> f64;
    fn p_minus(&self) -> f64;
    fn p_plus(&self) -> f64;
    fn p_underline(&self) -> f64 {
        self.p_minus().min(1.0)
    }
}

/// Local and at-infinity log-Hölder constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHolderConstants {
    pub c0: f64,
    pub c_inf: f64,
}

/// The analytic families an exponent can be drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "parameters", rename_all = "snake_case")]
pub enum ExponentForm {
    Constant { value: f64 },
    /// `p(x) = p_inf + c_inf / log(e + |x|)`.
    Asymptotic { p_inf: f64, c_inf: f64 },
    /// `p_in` on the ball of the given radius, `p_out` beyond
    /// `radius·(1 + smoothness)`, with a C^∞ radial transition between.
    RadialBump { p_out: f64, p_in: f64, center: Vec<f64>, radius: f64, smoothness: f64 },
}

/// JSON shape of an exponent: `{form, parameters, declared_constants}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSpec {
    #[serde(flatten)]
    pub form: ExponentForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_constants: Option<LogHolderConstants>,
}

/// A variable exponent with its range and log-Hölder constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFunction {
    form: ExponentForm,
    p_minus: f64,
    p_plus: f64,
    p_inf: f64,
    declared: LogHolderConstants,
}

impl ExponentFunction {
    pub fn constant(value: f64) -> Result<Self> {
        Self::from_form(ExponentForm::Constant { value })
    }

    pub fn asymptotic(p_inf: f64, c_inf: f64) -> Result<Self> {
        Self::from_form(ExponentForm::Asymptotic { p_inf, c_inf })
    }

    pub fn radial_bump(p_out: f64, p_in: f64, center: &[f64], radius: f64, smoothness: f64) -> Result<Self> {
        Self::from_form(ExponentForm::RadialBump {
            p_out,
            p_in,
            center: center.to_vec(),
            radius,
            smoothness,
        })
    }

    /// Builds the exponent with log-Hölder constants computed in closed form.
    pub fn from_form(form: ExponentForm) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let (p_minus, p_plus, p_inf, declared) = match &form {
            ExponentForm::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return bad(format!("constant exponent {value} must be positive"));
                }
                (*value, *value, *value, LogHolderConstants { c0: 0.0, c_inf: 0.0 })
            }
            ExponentForm::Asymptotic { p_inf, c_inf } => {
                let at_origin = p_inf + c_inf;
                if !(*p_inf > 0.0 && at_origin > 0.0 && p_inf.is_finite() && c_inf.is_finite()) {
                    return bad(format!("asymptotic exponent ({p_inf}, {c_inf}) must stay positive"));
                }
                // |∇p| = |c_inf| / ((e+|x|) log²(e+|x|)) ≤ |c_inf| / e.
                let lipschitz = c_inf.abs() / std::f64::consts::E;
                let c0 = local_constant(lipschitz, c_inf.abs());
                (p_inf.min(at_origin), p_inf.max(at_origin), *p_inf, LogHolderConstants { c0, c_inf: c_inf.abs() })
            }
            ExponentForm::RadialBump { p_out, p_in, center, radius, smoothness } => {
                if !(*p_out > 0.0 && *p_in > 0.0 && *radius > 0.0 && *smoothness > 0.0) {
                    return bad("radial bump parameters must be positive".into());
                }
                if center.is_empty() || center.len() > 2 {
                    return bad("radial bump centre must have 1 or 2 coordinates".into());
                }
                let jump = (p_in - p_out).abs();
                let lipschitz = jump * MAX_STEP_SLOPE / (radius * smoothness);
                let c0 = local_constant(lipschitz, jump);
                let reach = crate::grid::norm(center) + radius * (1.0 + smoothness);
                let c_inf = jump * (std::f64::consts::E + reach).ln();
                (p_out.min(*p_in), p_out.max(*p_in), *p_out, LogHolderConstants { c0, c_inf })
            }
        };
        Ok(Self { form, p_minus, p_plus, p_inf, declared })
    }

    pub fn from_spec(spec: &ExponentSpec) -> Result<Self> {
        let mut p = Self::from_form(spec.form.clone())?;
        if let Some(c) = spec.declared_constants {
            p.declared = c;
        }
        Ok(p)
    }

    pub fn to_spec(&self) -> ExponentSpec {
        ExponentSpec { form: self.form.clone(), declared_constants: Some(self.declared) }
    }

    /// Overrides the declared constants (e.g. to test a false declaration).
    pub fn with_declared(mut self, declared: LogHolderConstants) -> Self {
        self.declared = declared;
        self
    }

    pub fn form(&self) -> &ExponentForm {
        &self.form
    }

    pub fn p_inf(&self) -> f64 {
        self.p_inf
    }

    pub fn declared(&self) -> LogHolderConstants {
        self.declared
    }
}

/// `sup_{0<t<1/2} min(K t, D) · log(1/t)`, the local log-Hölder constant of
/// a function with Lipschitz constant `K` and oscillation `D`.
fn local_constant(lipschitz: f64, oscillation: f64) -> f64 {
    if oscillation == 0.0 || lipschitz == 0.0 {
        return 0.0;
    }
    let crossover = oscillation / lipschitz;
    if crossover <= (-1.0f64).exp() {
        oscillation * (lipschitz / oscillation).ln()
    } else {
        lipschitz / std::f64::consts::E
    }
}

/// Maximum slope of [`smooth_step`] on `[0, 1]`, attained at the midpoint.
const MAX_STEP_SLOPE: f64 = 2.0;

fn psi(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

/// C^∞ step: 1 for `u ≤ 0`, 0 for `u ≥ 1`.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let a = psi(1.0 - u);
    a / (a + psi(u))
}

impl VariableExponent for ExponentFunction {
    fn eval(&self, x: &[f64]) -> f64 {
        let v = match &self.form {
            ExponentForm::Constant { value } => *value,
            ExponentForm::Asymptotic { p_inf, c_inf } => {
                p_inf + c_inf / (std::f64::consts::E + crate::grid::norm(x)).ln()
            }
            ExponentForm::RadialBump { p_out, p_in, center, radius, smoothness } => {
                let r = crate::grid::distance(x, center);
                let u = (r - radius) / (radius * smoothness);
                p_out + (p_in - p_out) * smooth_step(u)
            }
        };
        v.clamp(self.p_minus, self.p_plus)
    }

    fn p_minus(&self) -> f64 {
        self.p_minus
    }

    fn p_plus(&self) -> f64 {
        self.p_plus
    }
}

/// Observed log-Hölder suprema on a sample set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogHolderReport {
    pub c0_observed: f64,
    pub c_inf_observed: f64,
    pub local_pairs: usize,
    pub skipped_pairs: usize,
    pub pass: bool,
}

/// Relative slack allowed when comparing observed and declared constants.
pub const LOG_HOLDER_SLACK: f64 = 0.01;

/// Evaluates the defining suprema of the log-Hölder conditions on `samples`.
///
/// Pairs at distance `≥ 1/2` do not enter the local supremum and are counted
/// as skipped.
pub fn check_log_holder(p: &ExponentFunction, samples: &[Vec<f64>]) -> Result<LogHolderReport> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("need at least two sample points".into()));
    }
    let values: Vec<f64> = samples.iter().map(|x| p.eval(x)).collect();
    let mut c0_observed: f64 = 0.0;
    let mut local_pairs = 0;
    let mut skipped_pairs = 0;
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let d = crate::grid::distance(&samples[i], &samples[j]);
            if d >= 0.5 || d == 0.0 {
                skipped_pairs += 1;
                continue;
            }
            local_pairs += 1;
            c0_observed = c0_observed.max((values[i] - values[j]).abs() * -d.ln());
        }
    }
    let c_inf_observed = samples
        .iter()
        .zip(&values)
        .map(|(x, v)| (v - p.p_inf()).abs() * (std::f64::consts::E + crate::grid::norm(x)).ln())
        .fold(0.0, f64::max);
    let declared = p.declared();
    let within = |obs: f64, dec: f64| obs <= dec * (1.0 + LOG_HOLDER_SLACK) + 1e-12;
    let pass = within(c0_observed, declared.c0) && within(c_inf_observed, declared.c_inf);
    Ok(LogHolderReport { c0_observed, c_inf_observed, local_pairs, skipped_pairs, pass })
}

/// Value of `ρ_{p(·)}` together with the grid spacing of the quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModularValue {
    pub value: f64,
    pub grid_spacing: f64,
}

impl ModularValue {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Exponent values at the cell centres of a grid.
pub fn sample_exponent(f: &GridFunction, p: &impl VariableExponent) -> Vec<f64> {
    let d = *f.domain();
    let n = d.dim();
    (0..d.len())
        .into_par_iter()
        .map(|idx| {
            let c = d.center(idx);
            p.eval(&c[..n])
        })
        .collect()
}

/// `Σ |c·f_i|^{p_i} · Δx^n`, with `0^p = 0`.
fn scaled_modular(samples: &[f64], exps: &[f64], c: f64, cell_volume: f64) -> f64 {
    let terms: Vec<f64> = samples
        .par_iter()
        .zip(exps.par_iter())
        .map(|(&v, &e)| if v == 0.0 { 0.0 } else { (c * v).abs().powf(e) })
        .collect();
    pairwise_sum(&terms) * cell_volume
}

/// Midpoint-rule value of `∫ |f(x)|^{p(x)} dx`.
pub fn modular(f: &GridFunction, p: &impl VariableExponent) -> ModularValue {
    let exps = sample_exponent(f, p);
    ModularValue {
        value: scaled_modular(f.samples(), &exps, 1.0, f.domain().cell_volume()),
        grid_spacing: f.domain().spacing(),
    }
}

/// Luxemburg norm `inf{λ > 0 : ρ(f/λ) ≤ 1}` by bisection in `log λ`.
///
/// Returns `λ*` with `|ρ(f/λ*) − 1| ≤ tol`, or `0` for `f ≡ 0`.
pub fn luxemburg_norm(f: &GridFunction, p: &impl VariableExponent, tol: f64) -> Result<f64> {
    let exps = sample_exponent(f, p);
    luxemburg_from_samples(f.samples(), &exps, f.domain().cell_volume(), tol)
}

pub(crate) fn luxemburg_from_samples(samples: &[f64], exps: &[f64], cell_volume: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let rho = |lambda: f64| scaled_modular(samples, exps, 1.0 / lambda, cell_volume);
    let rho0 = rho(1.0);
    if rho0 == 0.0 {
        return Ok(0.0);
    }
    if !rho0.is_finite() {
        return Err(Error::NormNotConverged(0));
    }
    // Exponent range over the support of f.
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for (&v, &e) in samples.iter().zip(exps) {
        if v != 0.0 {
            pmin = pmin.min(e);
            pmax = pmax.max(e);
        }
    }
    let a = rho0.powf(1.0 / pmax);
    let b = rho0.powf(1.0 / pmin);
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut doublings = 0;
    let mut rho_lo = rho(lo);
    while rho_lo < 1.0 {
        lo *= 0.5;
        rho_lo = rho(lo);
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || lo == 0.0 {
            return Err(Error::NormNotConverged(doublings));
        }
    }
    let mut rho_hi = rho(hi);
    while rho_hi > 1.0 {
        hi *= 2.0;
        rho_hi = rho(hi);
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(Error::NormNotConverged(doublings));
        }
    }
    if (rho_lo - 1.0).abs() <= tol {
        return Ok(lo);
    }
    if (rho_hi - 1.0).abs() <= tol {
        return Ok(hi);
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let r = rho(mid);
        if (r - 1.0).abs() <= tol || hi / lo - 1.0 < 1e-15 {
            return Ok(mid);
        }
        if r > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// `d_{p(·)} = min{l ≥ 0 : p₋(n + l + 1) > n}`.
pub fn min_moment_degree(p_minus: f64, n: usize) -> Result<u32> {
    if !(p_minus > 0.0) {
        return Err(Error::InvalidParameter(format!("p_minus {p_minus} must be positive")));
    }
    let n = n as f64;
    let mut l = 0u32;
    while p_minus * (n + f64::from(l) + 1.0) <= n {
        l += 1;
    }
    Ok(l)
}

/// `χ_Q` sampled at cell centres (closed cube).
pub fn indicator(domain: crate::grid::DomainBox, cube: &Cube) -> GridFunction {
    GridFunction::from_fn(domain, |x| if cube.contains_strictly(x) { 1.0 } else { 0.0 })
}

/// `‖χ_Q‖_{p(·)}` on the given grid.
pub fn indicator_norm(domain: crate::grid::DomainBox, cube: &Cube, p: &impl VariableExponent) -> Result<f64> {
    luxemburg_norm(&indicator(domain, cube), p, DEFAULT_NORM_TOL * 1e-2)
}
