//! Derivative-free minimisation of convex, possibly nonsmooth objectives.
//!
//! Coordinate descent with golden-section line searches, interleaved with
//! seeded random directions and a pattern move along the last sweep's
//! displacement; the extra directions get the iteration off the kinks
//! where every coordinate direction is an ascent direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Golden ratio conjugate.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    /// Stop once `patience` consecutive sweeps each improve the value by
    /// less than this fraction.
    pub rel_tol: f64,
    pub patience: usize,
    /// Absolute floor below which improvements are ignored.
    pub abs_tol: f64,
    pub max_sweeps: usize,
    pub initial_step: f64,
    pub random_directions: usize,
    pub line_iterations: usize,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            patience: 3,
            abs_tol: 1e-300,
            max_sweeps: 200,
            initial_step: 1.0,
            random_directions: 2,
            line_iterations: 40,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimises `f(x + s·dir)` over `s`; returns the best `(s, value)`.
fn line_search<F: Fn(&[f64]) -> f64>(
    f: &mut Counted<F>,
    x: &[f64],
    f0: f64,
    dir: &[f64],
    step: f64,
    iterations: usize,
    buf: &mut Vec<f64>,
) -> (f64, f64) {
    let mut at = |f: &mut Counted<F>, s: f64| {
        buf.clear();
        buf.extend(x.iter().zip(dir).map(|(a, d)| a + s * d));
        f.eval(buf)
    };
    let mut best = (0.0, f0);
    let fp = at(f, step);
    let (mut lo, mut hi);
    if fp < f0 {
        best = (step, fp);
        // Expand forward until the value rises again.
        let (mut prev, mut cur, mut fcur) = (0.0, step, fp);
        loop {
            let next = 2.0 * cur;
            let fnext = at(f, next);
            if fnext < fcur {
                best = (next, fnext);
                prev = cur;
                cur = next;
                fcur = fnext;
                if !next.is_finite() || next.abs() > 1e150 {
                    return best;
                }
            } else {
                lo = prev;
                hi = next;
                break;
            }
        }
    } else {
        let fm = at(f, -step);
        if fm < f0 {
            best = (-step, fm);
            let (mut prev, mut cur, mut fcur) = (0.0, -step, fm);
            loop {
                let next = 2.0 * cur;
                let fnext = at(f, next);
                if fnext < fcur {
                    best = (next, fnext);
                    prev = cur;
                    cur = next;
                    fcur = fnext;
                    if !next.is_finite() || next.abs() > 1e150 {
                        return best;
                    }
                } else {
                    lo = next;
                    hi = prev;
                    break;
                }
            }
        } else {
            lo = -step;
            hi = step;
        }
    }
    // Golden-section search on [lo, hi].
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = at(f, c);
    let mut fd = at(f, d);
    for _ in 0..iterations {
        if fc < best.1 {
            best = (c, fc);
        }
        if fd < best.1 {
            best = (d, fd);
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = at(f, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = at(f, d);
        }
    }
    if fc < best.1 {
        best = (c, fc);
    }
    if fd < best.1 {
        best = (d, fd);
    }
    best
}

/// Single-start minimisation from `x0`.
pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &MinimizeOptions) -> Minimum {
    let dim = x0.len();
    let mut f = Counted { f, evaluations: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = x0.to_vec();
    let mut value = f.eval(&x);
    let mut steps = vec![opts.initial_step; dim];
    let mut dir = vec![0.0; dim];
    let mut buf = Vec::with_capacity(dim);
    let mut converged = false;
    let floor = 1e-14 * opts.initial_step;
    let mut stalled = 0;
    for _ in 0..opts.max_sweeps {
        let start_value = value;
        let start_x = x.clone();
        for i in 0..dim {
            dir.iter_mut().for_each(|d| *d = 0.0);
            dir[i] = 1.0;
            let (s, v) = line_search(&mut f, &x, value, &dir, steps[i], opts.line_iterations, &mut buf);
            if v < value {
                x[i] += s;
                value = v;
            }
            steps[i] = (2.0 * s.abs()).max(0.5 * steps[i]).max(floor);
        }
        let mean_step = steps.iter().sum::<f64>() / dim as f64;
        for _ in 0..opts.random_directions {
            for d in dir.iter_mut() {
                *d = rng.sample::<f64, _>(StandardNormal);
            }
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|d| *d /= norm);
            let (s, v) = line_search(&mut f, &x, value, &dir, mean_step, opts.line_iterations, &mut buf);
            if v < value {
                x.iter_mut().zip(&dir).for_each(|(a, d)| *a += s * d);
                value = v;
            }
        }
        // Pattern move along the sweep displacement.
        for (d, (a, b)) in dir.iter_mut().zip(x.iter().zip(&start_x)) {
            *d = a - b;
        }
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm > 0.0 {
            dir.iter_mut().for_each(|d| *d /= norm);
            let (s, v) = line_search(&mut f, &x, value, &dir, norm, opts.line_iterations, &mut buf);
            if v < value {
                x.iter_mut().zip(&dir).for_each(|(a, d)| *a += s * d);
                value = v;
            }
        }
        let improvement = start_value - value;
        if improvement <= opts.rel_tol * value.abs() || improvement <= opts.abs_tol {
            stalled += 1;
            if stalled >= opts.patience.max(1) {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Minimum { x, value, converged, evaluations: f.evaluations }
}

/// Runs [`minimize`] from `x0` and from `restarts` random perturbations of
/// it (Gaussian with per-coordinate scale `spread`); returns the best run
/// and every run's result.
pub fn minimize_multistart<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    spread: f64,
    restarts: usize,
    opts: &MinimizeOptions,
) -> (Minimum, Vec<Minimum>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut runs = Vec::with_capacity(restarts + 1);
    runs.push(minimize(&f, x0, opts));
    for k in 0..restarts {
        let start: Vec<f64> = x0.iter().map(|v| v + spread * rng.sample::<f64, _>(StandardNormal)).collect();
        let o = MinimizeOptions { seed: opts.seed.wrapping_add(k as u64 + 1), ..opts.clone() };
        runs.push(minimize(&f, &start, &o));
    }
    let best = runs
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .cloned()
        .expect("at least one run");
    (best, runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + 0.5;
        let m = minimize(f, &[0.0, 0.0], &MinimizeOptions { rel_tol: 1e-12, ..Default::default() });
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] + 2.0).abs() < 1e-4, "{:?}", m.x);
        assert!(m.converged);
    }

    #[test]
    fn nonsmooth_max_of_norms_escapes_kinks() {
        // max(|x - y|, |x + y - 2|) has its minimum at (1, 1); along the
        // diagonal both axis directions are ascent directions.
        let f = |x: &[f64]| (x[0] - x[1]).abs().max((x[0] + x[1] - 2.0).abs());
        let m = minimize(f, &[3.0, 3.0], &MinimizeOptions { rel_tol: 1e-10, ..Default::default() });
        assert!(m.value < 1e-6, "{m:?}");
    }

    #[test]
    fn multistart_agrees() {
        let f = |x: &[f64]| (x[0] - 0.3).abs() + 2.0 * (x[1] - 0.7).abs() + (x[0] + x[1] - 1.0).powi(2);
        let (best, runs) = minimize_multistart(f, &[0.0, 0.0], 1.0, 5, &MinimizeOptions { rel_tol: 1e-12, ..Default::default() });
        assert!((best.x[0] - 0.3).abs() < 1e-5 && (best.x[1] - 0.7).abs() < 1e-5);
        assert_eq!(runs.len(), 6);
    }
}
