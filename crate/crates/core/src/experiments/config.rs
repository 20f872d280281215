//! JSON configuration of the verification suite.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exponents::{ExponentForm, ExponentFunction, ExponentSpec, VariableExponent};
use crate::grid::{Cube, DomainBox};
use crate::maximal::{ScaleGrid, TestFunction, TestKind, SCALE_RATIO};

/// A uniform grid on `[−L, L]^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    /// The grid with `points · 2^refinement` cells per axis.
    pub fn domain(&self, refinement: i32) -> Result<DomainBox> {
        let points = if refinement >= 0 {
            self.points << refinement
        } else {
            self.points >> (-refinement)
        };
        DomainBox::new(self.n, self.half_width, points)
    }
}

/// A geometric scale grid in absolute units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSpec {
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
}

fn default_ratio() -> f64 {
    SCALE_RATIO
}

impl ScaleSpec {
    pub fn grid(&self) -> Result<ScaleGrid> {
        ScaleGrid::new(self.r_min, self.r_max, self.ratio)
    }
}

/// How atom cubes are drawn: side uniform in `[side_min, side_max]`, centre
/// uniform in `[−offset, offset]^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomBatch {
    pub count: usize,
    pub side_min: f64,
    pub side_max: f64,
    pub offset: f64,
    pub p0: f64,
}

impl AtomBatch {
    /// Draws a cube and a seed for the atom profile.
    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<(Cube, u64)> {
        let side = if self.side_max > self.side_min {
            rng.gen_range(self.side_min..self.side_max)
        } else {
            self.side_min
        };
        let center: Vec<f64> = (0..n)
            .map(|_| if self.offset > 0.0 { rng.gen_range(-self.offset..self.offset) } else { 0.0 })
            .collect();
        Ok((Cube::new(&center, side)?, rng.gen()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma12Config {
    pub grid: GridSpec,
    pub exponent: ExponentSpec,
    /// Values of `m`.
    pub orders: Vec<u32>,
    pub atoms: AtomBatch,
    pub directions: usize,
    /// Distance range in multiples of the cube side.
    pub distance_min: f64,
    pub distance_max: f64,
    pub distances: usize,
    pub slope_tol: f64,
    pub ratio_spread: f64,
}

impl Default for Lemma12Config {
    fn default() -> Self {
        Self {
            grid: GridSpec { n: 2, half_width: 1.0, points: 64 },
            exponent: spec_of(ExponentForm::RadialBump {
                p_out: 1.5,
                p_in: 0.8,
                center: vec![0.0, 0.0],
                radius: 0.3,
                smoothness: 1.0,
            }),
            orders: vec![1, 2],
            atoms: AtomBatch { count: 20, side_min: 0.5, side_max: 0.9, offset: 0.05, p0: 2.0 },
            directions: 64,
            distance_min: 8.0,
            distance_max: 80.0,
            distances: 9,
            slope_tol: 0.15,
            ratio_spread: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma14Config {
    /// `(m, n)` pairs.
    pub cases: Vec<(u32, usize)>,
    pub homogeneity_tol: f64,
    pub sphere_mean_tol: f64,
}

impl Default for Lemma14Config {
    fn default() -> Self {
        Self { cases: vec![(1, 1), (1, 2), (2, 1), (2, 2)], homogeneity_tol: 1e-6, sphere_mean_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prop15Config {
    pub grid: GridSpec,
    pub exponent: ExponentSpec,
    pub m: u32,
    pub q: f64,
    pub mu: f64,
    pub atoms: AtomBatch,
    /// Sample points inside `4√n·Q` and outside `2√n·Q`, per atom.
    pub near_points: usize,
    pub far_points: usize,
    /// Largest distance of far-field points from the cube centre.
    pub far_max: f64,
    pub scales: ScaleSpec,
    /// Independent batches used for the stability of `C`.
    pub reruns: usize,
    pub restarts: usize,
    pub stability: f64,
}

impl Default for Prop15Config {
    fn default() -> Self {
        Self {
            grid: GridSpec { n: 1, half_width: 4.0, points: 2048 },
            exponent: spec_of(ExponentForm::Asymptotic { p_inf: 0.8, c_inf: 0.4 }),
            m: 1,
            q: 2.0,
            mu: 0.25,
            atoms: AtomBatch { count: 10, side_min: 0.2, side_max: 0.4, offset: 0.2, p0: 2.0 },
            near_points: 100,
            far_points: 100,
            far_max: 1.6,
            scales: ScaleSpec { r_min: 1.0 / 16.0, r_max: 8.0, ratio: SCALE_RATIO },
            reruns: 3,
            restarts: 4,
            stability: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem1Config {
    pub grid: GridSpec,
    pub exponent: ExponentSpec,
    pub m: u32,
    pub q: f64,
    pub phi: TestKind,
    /// Number of random decompositions.
    pub decompositions: usize,
    pub atoms_per_decomposition: usize,
    pub atoms: AtomBatch,
    /// Cells per axis of the grid on which `N` is sampled for its norm.
    pub n_points: usize,
    /// Sample points of the pointwise bound lie in `[−pointwise_reach, pointwise_reach]^n`.
    pub pointwise_reach: f64,
    pub pointwise_points: usize,
    pub scales: ScaleSpec,
    pub t_scales: ScaleSpec,
    pub restarts: usize,
    pub spread: f64,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Self {
            grid: GridSpec { n: 1, half_width: 4.0, points: 1024 },
            exponent: spec_of(ExponentForm::Constant { value: 1.0 }),
            m: 1,
            q: 8.0,
            phi: TestKind::Gaussian,
            decompositions: 10,
            atoms_per_decomposition: 1,
            atoms: AtomBatch { count: 1, side_min: 0.2, side_max: 0.4, offset: 0.3, p0: 2.0 },
            n_points: 256,
            pointwise_reach: 1.2,
            pointwise_points: 64,
            scales: ScaleSpec { r_min: 1.0 / 16.0, r_max: 8.0, ratio: SCALE_RATIO },
            t_scales: ScaleSpec { r_min: 1.0 / 32.0, r_max: 4.0, ratio: SCALE_RATIO },
            restarts: 4,
            spread: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theorem2Config {
    pub grid: GridSpec,
    pub m: u32,
    pub q: f64,
    /// Constant exponent; must equal `n(2m + n/q)⁻¹`.
    pub p: f64,
    pub atom_side: f64,
    pub p0: f64,
    /// Annulus radii.
    pub radii: Vec<f64>,
    /// Cells per axis of the grid on which the partial modulars are summed.
    pub modular_points: usize,
    pub scales: ScaleSpec,
    pub restarts: usize,
    pub slope_tol: f64,
    /// Smallest admissible ratio of the last modular increment to the mean increment.
    pub increment_ratio: f64,
}

impl Default for Theorem2Config {
    fn default() -> Self {
        Self {
            grid: GridSpec { n: 1, half_width: 72.0, points: 4096 },
            m: 1,
            q: 4.0,
            p: 4.0 / 9.0,
            atom_side: 1.0,
            p0: 2.0,
            radii: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            modular_points: 512,
            scales: ScaleSpec { r_min: 0.25, r_max: 144.0, ratio: SCALE_RATIO },
            restarts: 4,
            slope_tol: 0.15,
            increment_ratio: 0.5,
        }
    }
}

/// The whole suite configuration. Every field has a default, so `{}` is a
/// valid config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Every experiment grid is refined by `2^refinement` per axis.
    pub refinement: i32,
    pub lemma12: Lemma12Config,
    pub lemma14: Lemma14Config,
    pub prop15: Prop15Config,
    pub theorem1: Theorem1Config,
    pub theorem2: Theorem2Config,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            refinement: 0,
            lemma12: Lemma12Config::default(),
            lemma14: Lemma14Config::default(),
            prop15: Prop15Config::default(),
            theorem1: Theorem1Config::default(),
            theorem2: Theorem2Config::default(),
        }
    }
}

fn spec_of(form: ExponentForm) -> ExponentSpec {
    ExponentSpec { form, declared_constants: None }
}

impl ExperimentConfig {
    /// Parses a config, reporting the line and column of syntax errors.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Generator for one experiment, on its own stream of the config seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// `n (2m + n/q)⁻¹ < p̲`.
pub fn theorem1_hypothesis(n: usize, m: u32, q: f64, p: &impl VariableExponent) -> bool {
    critical_exponent(n, m, q) < p.p_underline()
}

/// `n (2m + n/q)⁻¹`.
pub fn critical_exponent(n: usize, m: u32, q: f64) -> f64 {
    let n = n as f64;
    n / (2.0 * f64::from(m) + n / q)
}

pub(crate) fn exponent(spec: &ExponentSpec) -> Result<ExponentFunction> {
    ExponentFunction::from_spec(spec)
}

pub(crate) fn test_function(kind: TestKind, n: usize) -> Result<TestFunction> {
    TestFunction::unit_mass(kind, n)
}
