//! Objective functions: the evaluation contract used by every scheme and the
//! benchmark landscapes the harness runs against.
//!
//! Gradients are analytic. Finite differences only appear in tests and in the
//! Hessian sampler of [`crate::lipschitz`].

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Result, SbiError};

/// Axis-aligned box, one `[lower, upper]` interval per coordinate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(SbiError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if let Some(k) = (0..lower.len()).find(|&k| !(lower[k] <= upper[k])) {
            return Err(SbiError::InvalidArgument(format!(
                "box coordinate {k}: lower {} > upper {}",
                lower[k], upper[k]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lower
            .iter()
            .chain(self.upper.iter())
            .all(|b| b.is_finite())
    }

    /// Box with the same center and every side scaled by `factor`.
    pub fn inflated(&self, factor: f64) -> Self {
        let (lower, upper) = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| {
                let c = 0.5 * (lo + hi);
                let r = 0.5 * (hi - lo) * factor;
                (c - r, c + r)
            })
            .unzip();
        Self { lower, upper }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&xi, (&lo, &hi))| lo <= xi && xi <= hi)
    }

    /// Uniform sample; degenerate intervals return their endpoint.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect()
    }
}

/// Location and value of a known global minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownMinimum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// A scalar field with an analytic gradient.
///
/// Implementations must be immutable after construction so trials can share
/// them across threads.
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes the gradient at `x` into `out` (both of length `dim`).
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn domain(&self) -> &Domain;
    fn known_min(&self) -> Option<&KnownMinimum> {
        None
    }
}

impl fmt::Debug for dyn Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Objective({}, d={})", self.name(), self.dim())
    }
}

fn check_dim(obj: &dyn Objective, x: &[f64]) -> Result<()> {
    if x.len() != obj.dim() {
        return Err(SbiError::DimensionMismatch {
            expected: obj.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Dimension-checked evaluation of `F(x)`.
pub fn eval_objective(obj: &dyn Objective, x: &[f64]) -> Result<f64> {
    check_dim(obj, x)?;
    Ok(obj.value(x))
}

/// Dimension-checked evaluation of `∇F(x)`.
pub fn eval_gradient(obj: &dyn Objective, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(obj, x)?;
    let mut g = vec![0.0; x.len()];
    obj.gradient(x, &mut g);
    Ok(g)
}

/// `10 d + Σ (x_k² − 10 cos 2πx_k)`.
#[derive(Debug, Clone)]
pub struct Rastrigin {
    domain: Domain,
    min: KnownMinimum,
}

impl Rastrigin {
    pub fn new(dim: usize) -> Self {
        Self {
            domain: Domain::cube(dim, -5.12, 5.12),
            min: KnownMinimum {
                point: vec![0.0; dim],
                value: 0.0,
            },
        }
    }
}

impl Objective for Rastrigin {
    fn name(&self) -> &str {
        "rastrigin"
    }
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        10.0 * x.len() as f64
            + x.iter()
                .map(|&xi| xi * xi - 10.0 * (2.0 * PI * xi).cos())
                .sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (g, &xi) in out.iter_mut().zip(x) {
            *g = 2.0 * xi + 20.0 * PI * (2.0 * PI * xi).sin();
        }
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn known_min(&self) -> Option<&KnownMinimum> {
        Some(&self.min)
    }
}

/// `Σ_{k<d} 100 (x_{k+1} − x_k²)² + (1 − x_k)²`.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    domain: Domain,
    min: KnownMinimum,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Self {
        Self {
            domain: Domain::cube(dim, -2.048, 2.048),
            min: KnownMinimum {
                point: vec![1.0; dim],
                value: 0.0,
            },
        }
    }
}

impl Objective for Rosenbrock {
    fn name(&self) -> &str {
        "rosenbrock"
    }
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| {
                let a = w[1] - w[0] * w[0];
                let b = 1.0 - w[0];
                100.0 * a * a + b * b
            })
            .sum()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        for k in 0..x.len().saturating_sub(1) {
            let a = x[k + 1] - x[k] * x[k];
            out[k] += -400.0 * x[k] * a - 2.0 * (1.0 - x[k]);
            out[k + 1] += 200.0 * a;
        }
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn known_min(&self) -> Option<&KnownMinimum> {
        Some(&self.min)
    }
}

/// `½ Σ (x_k⁴ − 16 x_k² + 5 x_k)`.
#[derive(Debug, Clone)]
pub struct StyblinskiTang {
    domain: Domain,
    min: KnownMinimum,
}

fn st_term(x: f64) -> f64 {
    0.5 * (x.powi(4) - 16.0 * x * x + 5.0 * x)
}

fn st_deriv(x: f64) -> f64 {
    0.5 * (4.0 * x.powi(3) - 32.0 * x + 5.0)
}

impl StyblinskiTang {
    pub fn new(dim: usize) -> Self {
        let x_star = newton_1d(st_deriv, |x| 0.5 * (12.0 * x * x - 32.0), -2.903534);
        Self {
            domain: Domain::cube(dim, -5.0, 5.0),
            min: KnownMinimum {
                point: vec![x_star; dim],
                value: dim as f64 * st_term(x_star),
            },
        }
    }
}

impl Objective for StyblinskiTang {
    fn name(&self) -> &str {
        "styblinski_tang"
    }
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| st_term(xi)).sum()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (g, &xi) in out.iter_mut().zip(x) {
            *g = st_deriv(xi);
        }
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn known_min(&self) -> Option<&KnownMinimum> {
        Some(&self.min)
    }
}

/// One-dimensional `exp(sin 2x²) + (x − π/2)²/10`, global minimum near 1.5355.
#[derive(Debug, Clone)]
pub struct ExpSin1d {
    domain: Domain,
    min: KnownMinimum,
}

fn exp_sin(x: f64) -> f64 {
    (2.0 * x * x).sin().exp() + 0.1 * (x - FRAC_PI_2).powi(2)
}

fn exp_sin_d1(x: f64) -> f64 {
    let s = 2.0 * x * x;
    4.0 * x * s.cos() * s.sin().exp() + 0.2 * (x - FRAC_PI_2)
}

fn exp_sin_d2(x: f64) -> f64 {
    let s = 2.0 * x * x;
    let e = s.sin().exp();
    let c = s.cos();
    4.0 * c * e + 16.0 * x * x * e * (c * c - s.sin()) + 0.2
}

impl ExpSin1d {
    pub fn new() -> Self {
        let x_star = newton_1d(exp_sin_d1, exp_sin_d2, 1.5355);
        Self {
            domain: Domain::cube(1, -4.0, 4.0),
            min: KnownMinimum {
                point: vec![x_star],
                value: exp_sin(x_star),
            },
        }
    }
}

impl Default for ExpSin1d {
    fn default() -> Self {
        Self::new()
    }
}

impl Objective for ExpSin1d {
    fn name(&self) -> &str {
        "exp_sin_1d"
    }
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64]) -> f64 {
        exp_sin(x[0])
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = exp_sin_d1(x[0]);
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn known_min(&self) -> Option<&KnownMinimum> {
        Some(&self.min)
    }
}

/// One-dimensional `x sin x cos 2x − 2x sin 3x + 3x sin 4x + 0.1 x²`,
/// global minimum on `[0, 30]` near 21.5627.
#[derive(Debug, Clone)]
pub struct Oscillatory1d {
    domain: Domain,
    min: KnownMinimum,
}

fn osc(x: f64) -> f64 {
    x * x.sin() * (2.0 * x).cos() - 2.0 * x * (3.0 * x).sin() + 3.0 * x * (4.0 * x).sin() + 0.1 * x * x
}

fn osc_d1(x: f64) -> f64 {
    let (s1, c1) = x.sin_cos();
    let (s2, c2) = (2.0 * x).sin_cos();
    let (s3, c3) = (3.0 * x).sin_cos();
    let (s4, c4) = (4.0 * x).sin_cos();
    s1 * c2 + x * c1 * c2 - 2.0 * x * s1 * s2 - 2.0 * s3 - 6.0 * x * c3 + 3.0 * s4 + 12.0 * x * c4
        + 0.2 * x
}

fn osc_d2(x: f64) -> f64 {
    let (s1, c1) = x.sin_cos();
    let (s2, c2) = (2.0 * x).sin_cos();
    let (s3, c3) = (3.0 * x).sin_cos();
    let (s4, c4) = (4.0 * x).sin_cos();
    // d/dx of each term of osc_d1
    (c1 * c2 - 2.0 * s1 * s2)
        + (c1 * c2 - x * s1 * c2 - 2.0 * x * c1 * s2)
        + (-2.0 * s1 * s2 - 2.0 * x * c1 * s2 - 4.0 * x * s1 * c2)
        - 6.0 * c3
        + (-6.0 * c3 + 18.0 * x * s3)
        + 12.0 * c4
        + (12.0 * c4 - 48.0 * x * s4)
        + 0.2
}

impl Oscillatory1d {
    pub fn new() -> Self {
        let x_star = newton_1d(osc_d1, osc_d2, 21.5627);
        Self {
            domain: Domain::cube(1, 0.0, 30.0),
            min: KnownMinimum {
                point: vec![x_star],
                value: osc(x_star),
            },
        }
    }
}

impl Default for Oscillatory1d {
    fn default() -> Self {
        Self::new()
    }
}

impl Objective for Oscillatory1d {
    fn name(&self) -> &str {
        "oscillatory_1d"
    }
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64]) -> f64 {
        osc(x[0])
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = osc_d1(x[0]);
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn known_min(&self) -> Option<&KnownMinimum> {
        Some(&self.min)
    }
}

/// `(a/2) ‖x‖²`, Hessian `a·I`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    curvature: f64,
    domain: Domain,
    min: KnownMinimum,
}

impl Quadratic {
    pub fn new(dim: usize, curvature: f64) -> Self {
        Self {
            curvature,
            domain: Domain::cube(dim, -5.0, 5.0),
            min: KnownMinimum {
                point: vec![0.0; dim],
                value: 0.0,
            },
        }
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }
}

impl Objective for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.curvature * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (g, &xi) in out.iter_mut().zip(x) {
            *g = self.curvature * xi;
        }
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn known_min(&self) -> Option<&KnownMinimum> {
        Some(&self.min)
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Objective built from user closures.
pub struct CustomObjective {
    name: String,
    domain: Domain,
    value: Box<ValueFn>,
    gradient: Box<GradFn>,
    min: Option<KnownMinimum>,
}

impl CustomObjective {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            value: Box::new(value),
            gradient: Box::new(gradient),
            min: None,
        }
    }

    pub fn with_known_min(mut self, min: KnownMinimum) -> Self {
        self.min = Some(min);
        self
    }
}

impl Objective for CustomObjective {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn known_min(&self) -> Option<&KnownMinimum> {
        self.min.as_ref()
    }
}

fn newton_1d(d1: impl Fn(f64) -> f64, d2: impl Fn(f64) -> f64, mut x: f64) -> f64 {
    for _ in 0..50 {
        let step = d1(x) / d2(x);
        x -= step;
        if step.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

pub type ObjectiveFactory = Box<dyn Fn(usize) -> Result<Arc<dyn Objective>> + Send + Sync>;

/// Name → constructor map. [`ObjectiveRegistry::with_benchmarks`] preloads the
/// built-in landscapes; custom objectives can be added with
/// [`ObjectiveRegistry::register`].
pub struct ObjectiveRegistry {
    factories: BTreeMap<String, ObjectiveFactory>,
}

pub const BENCHMARK_NAMES: [&str; 6] = [
    "rastrigin",
    "rosenbrock",
    "styblinski_tang",
    "exp_sin_1d",
    "oscillatory_1d",
    "quadratic",
];

fn one_dimensional(name: &str, dim: usize) -> Result<()> {
    if dim != 1 {
        return Err(SbiError::Config(format!(
            "objective {name} is one-dimensional, got dim = {dim}"
        )));
    }
    Ok(())
}

fn positive_dim(name: &str, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(SbiError::Config(format!("objective {name}: dim must be >= 1")));
    }
    Ok(())
}

impl ObjectiveRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_benchmarks() -> Self {
        let mut r = Self::empty();
        r.register("rastrigin", |d| {
            positive_dim("rastrigin", d)?;
            Ok(Arc::new(Rastrigin::new(d)))
        });
        r.register("rosenbrock", |d| {
            if d < 2 {
                return Err(SbiError::Config("rosenbrock needs dim >= 2".into()));
            }
            Ok(Arc::new(Rosenbrock::new(d)))
        });
        r.register("styblinski_tang", |d| {
            positive_dim("styblinski_tang", d)?;
            Ok(Arc::new(StyblinskiTang::new(d)))
        });
        r.register("exp_sin_1d", |d| {
            one_dimensional("exp_sin_1d", d)?;
            Ok(Arc::new(ExpSin1d::new()))
        });
        r.register("oscillatory_1d", |d| {
            one_dimensional("oscillatory_1d", d)?;
            Ok(Arc::new(Oscillatory1d::new()))
        });
        r.register("quadratic", |d| {
            positive_dim("quadratic", d)?;
            Ok(Arc::new(Quadratic::new(d, 1.0)))
        });
        r
    }

    pub fn register(
        &mut self,
        name: impl Into<String>,
        factory: impl Fn(usize) -> Result<Arc<dyn Objective>> + Send + Sync + 'static,
    ) {
        self.factories.insert(name.into(), Box::new(factory));
    }

    pub fn build(&self, name: &str, dim: usize) -> Result<Arc<dyn Objective>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            SbiError::Config(format!(
                "unknown objective {name:?}; known: {}",
                self.names().join(", ")
            ))
        })?;
        factory(dim)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }
}

/// Builds one of the built-in benchmarks by name.
pub fn benchmark(name: &str, dim: usize) -> Result<Arc<dyn Objective>> {
    ObjectiveRegistry::with_benchmarks().build(name, dim)
}
