//! Black-box problem abstraction and the benchmark functions.
//!
//! Two families are provided:
//!
//! * the classical set (Ellipsoid, Rosenbrock, Ackley, Griewank, Rastrigin)
//!   on their conventional search boxes, built by [`make_classical`];
//! * shifted/rotated problems in the CEC style, described by a small TOML
//!   document and loaded with [`load_shifted_rotated`]. The shift vectors and
//!   rotation matrices are data supplied by the user.

use std::f64::consts::{E, PI};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Objective function shared between threads.
pub type Objective = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A box-constrained, deterministic, single-objective minimization problem.
///
/// Problems are immutable once built and can be evaluated from several
/// threads at the same time.
#[derive(Clone)]
pub struct Problem {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    optimum_value: Option<f64>,
    objective: Objective,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        optimum_value: Option<f64>,
        objective: Objective,
    ) -> Result<Self> {
        let name = name.into();
        check_bounds(&name, &lower, &upper)?;
        Ok(Self {
            name,
            lower,
            upper,
            optimum_value,
            objective,
        })
    }

    /// Replaces the search box, keeping the objective.
    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "{}: bounds have length {} but the problem has dimension {}",
                self.name,
                lower.len(),
                self.dim()
            )));
        }
        check_bounds(&self.name, &lower, &upper)?;
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Known optimal objective value, used to report function errors.
    pub fn optimum_value(&self) -> Option<f64> {
        self.optimum_value
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim(), "{}: wrong input length", self.name);
        (self.objective)(x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("optimum_value", &self.optimum_value)
            .finish_non_exhaustive()
    }
}

fn check_bounds(name: &str, lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.is_empty() {
        return Err(Error::Config(format!("{name}: dimension must be at least 1")));
    }
    if lower.len() != upper.len() {
        return Err(Error::Dimension(format!(
            "{name}: lower has length {} but upper has length {}",
            lower.len(),
            upper.len()
        )));
    }
    for (j, (lo, hi)) in lower.iter().zip(upper).enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "{name}: invalid bounds [{lo}, {hi}] in dimension {j}"
            )));
        }
    }
    Ok(())
}

/// The classical benchmark functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classical {
    Ellipsoid,
    Rosenbrock,
    Ackley,
    Griewank,
    Rastrigin,
}

impl Classical {
    pub const ALL: [Classical; 5] = [
        Classical::Ellipsoid,
        Classical::Rosenbrock,
        Classical::Ackley,
        Classical::Griewank,
        Classical::Rastrigin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Classical::Ellipsoid => "ellipsoid",
            Classical::Rosenbrock => "rosenbrock",
            Classical::Ackley => "ackley",
            Classical::Griewank => "griewank",
            Classical::Rastrigin => "rastrigin",
        }
    }

    /// Conventional per-dimension search interval.
    pub fn domain(self) -> (f64, f64) {
        match self {
            Classical::Ellipsoid | Classical::Rastrigin => (-5.12, 5.12),
            Classical::Rosenbrock => (-2.048, 2.048),
            Classical::Ackley => (-32.768, 32.768),
            Classical::Griewank => (-600.0, 600.0),
        }
    }

    pub fn evaluate(self, x: &[f64]) -> f64 {
        match self {
            Classical::Ellipsoid => ellipsoid(x),
            Classical::Rosenbrock => rosenbrock(x),
            Classical::Ackley => ackley(x),
            Classical::Griewank => griewank(x),
            Classical::Rastrigin => rastrigin(x),
        }
    }

    /// Global minimizer for dimension `dim`.
    pub fn optimizer(self, dim: usize) -> Vec<f64> {
        match self {
            Classical::Rosenbrock => vec![1.0; dim],
            _ => vec![0.0; dim],
        }
    }

    pub fn problem(self, dim: usize) -> Result<Problem> {
        if dim == 0 {
            return Err(Error::Config(format!("{}: dimension must be at least 1", self.name())));
        }
        let (lo, hi) = self.domain();
        Problem::new(
            self.name(),
            vec![lo; dim],
            vec![hi; dim],
            Some(0.0),
            Arc::new(move |x: &[f64]| self.evaluate(x)),
        )
    }
}

impl FromStr for Classical {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ellipsoid" | "ellipsied" => Ok(Classical::Ellipsoid),
            "rosenbrock" => Ok(Classical::Rosenbrock),
            "ackley" => Ok(Classical::Ackley),
            "griewank" => Ok(Classical::Griewank),
            "rastrigin" => Ok(Classical::Rastrigin),
            other => Err(Error::Config(format!("unknown benchmark `{other}`"))),
        }
    }
}

/// Builds a classical benchmark by name.
pub fn make_classical(name: &str, dim: usize) -> Result<Problem> {
    name.parse::<Classical>()?.problem(dim)
}

/// Weighted sphere, `sum_j j * x_j^2` with 1-based `j`.
pub fn ellipsoid(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v * v).sum()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let sum_cos: f64 = x.iter().map(|v| (2.0 * PI * v).cos()).sum();
    -20.0 * (-0.2 * (sum_sq / n).sqrt()).exp() - (sum_cos / n).exp() + 20.0 + E
}

pub fn griewank(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(j, v)| (v / ((j + 1) as f64).sqrt()).cos())
        .product();
    sum - prod + 1.0
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// High-conditioned elliptic function, condition number 1e6.
pub fn elliptic(x: &[f64]) -> f64 {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let exponent = if d > 1 { i as f64 / (d - 1) as f64 } else { 0.0 };
            1e6_f64.powf(exponent) * v * v
        })
        .sum()
}

/// Schwefel's problem 1.2: sum of squared prefix sums.
pub fn schwefel_1_2(x: &[f64]) -> f64 {
    let mut prefix = 0.0;
    x.iter()
        .map(|v| {
            prefix += v;
            prefix * prefix
        })
        .sum()
}

/// Schwefel's problem 2.22: `sum |x| + prod |x|`.
pub fn schwefel_2_22(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().map(|v| v.abs()).sum();
    let prod: f64 = x.iter().map(|v| v.abs()).product();
    sum + prod
}

/// Weierstrass function with a = 0.5, b = 3, k_max = 20, minimum 0 at the origin.
pub fn weierstrass(x: &[f64]) -> f64 {
    const A: f64 = 0.5;
    const B: f64 = 3.0;
    const K_MAX: i32 = 20;
    let mut total = 0.0;
    let mut offset = 0.0;
    for k in 0..=K_MAX {
        let ak = A.powi(k);
        let bk = B.powi(k);
        total += x.iter().map(|v| ak * (2.0 * PI * bk * (v + 0.5)).cos()).sum::<f64>();
        offset += ak * (PI * bk).cos();
    }
    total - x.len() as f64 * offset
}

/// Base functions available to shifted/rotated problems.
///
/// Every base has its global minimum 0 at the origin of its input, so the
/// transformed problem has its minimum `bias` at the shift vector. Rosenbrock
/// is evaluated at `z + 1` for that reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFunction {
    Sphere,
    Elliptic,
    Rosenbrock,
    Rastrigin,
    Ackley,
    Griewank,
    #[serde(rename = "schwefel_1_2")]
    Schwefel12,
    #[serde(rename = "schwefel_2_22")]
    Schwefel222,
    Weierstrass,
    Hybrid,
}

impl BaseFunction {
    fn default_domain(self) -> (f64, f64) {
        match self {
            BaseFunction::Rastrigin => (-5.0, 5.0),
            BaseFunction::Ackley => (-32.0, 32.0),
            BaseFunction::Griewank => (-600.0, 600.0),
            BaseFunction::Weierstrass => (-0.5, 0.5),
            _ => (-100.0, 100.0),
        }
    }

    /// Evaluates a non-hybrid base at `z`.
    fn eval_simple(self, z: &[f64]) -> f64 {
        match self {
            BaseFunction::Sphere => sphere(z),
            BaseFunction::Elliptic => elliptic(z),
            BaseFunction::Rosenbrock => {
                let shifted: Vec<f64> = z.iter().map(|v| v + 1.0).collect();
                rosenbrock(&shifted)
            }
            BaseFunction::Rastrigin => rastrigin(z),
            BaseFunction::Ackley => ackley(z),
            BaseFunction::Griewank => griewank(z),
            BaseFunction::Schwefel12 => schwefel_1_2(z),
            BaseFunction::Schwefel222 => schwefel_2_22(z),
            BaseFunction::Weierstrass => weierstrass(z),
            BaseFunction::Hybrid => unreachable!("hybrid bases are split before evaluation"),
        }
    }
}

const DEFAULT_HYBRID: [BaseFunction; 3] = [
    BaseFunction::Rastrigin,
    BaseFunction::Elliptic,
    BaseFunction::Schwefel12,
];

/// On-disk description of a shifted (and optionally rotated) problem.
///
/// ```toml
/// base = "rastrigin"
/// dim = 2
/// bias = -330.0
/// shift = [1.5, -0.25]
/// rotation = [1.0, 0.0, 0.0, 1.0]   # row-major, optional
/// lower = -5.0                       # optional, per-base default otherwise
/// upper = 5.0
/// ```
///
/// A `hybrid` base splits the transformed vector into consecutive segments,
/// one per entry of `components`, sized by `proportions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftedRotatedSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub base: BaseFunction,
    pub dim: usize,
    #[serde(default)]
    pub bias: f64,
    pub shift: Vec<f64>,
    #[serde(default)]
    pub rotation: Option<Vec<f64>>,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub components: Option<Vec<BaseFunction>>,
    #[serde(default)]
    pub proportions: Option<Vec<f64>>,
}

impl ShiftedRotatedSpec {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn into_problem(self) -> Result<Problem> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if self.shift.len() != d {
            return Err(Error::Dimension(format!(
                "shift has {} entries, dim is {d}",
                self.shift.len()
            )));
        }
        if let Some(rot) = &self.rotation {
            if rot.len() != d * d {
                return Err(Error::Dimension(format!(
                    "rotation has {} entries, expected {d}x{d} = {}",
                    rot.len(),
                    d * d
                )));
            }
        }
        if self
            .shift
            .iter()
            .chain(self.rotation.iter().flatten())
            .any(|v| !v.is_finite())
            || !self.bias.is_finite()
        {
            return Err(Error::Config("non-finite value in shift, rotation or bias".into()));
        }

        let segments = if self.base == BaseFunction::Hybrid {
            hybrid_segments(d, self.components.as_deref(), self.proportions.as_deref())?
        } else {
            if self.components.is_some() || self.proportions.is_some() {
                return Err(Error::Config(
                    "components/proportions are only valid for a hybrid base".into(),
                ));
            }
            vec![(self.base, 0..d)]
        };

        let (default_lo, default_hi) = if self.base == BaseFunction::Hybrid {
            (-100.0, 100.0)
        } else {
            self.base.default_domain()
        };
        let lo = self.lower.unwrap_or(default_lo);
        let hi = self.upper.unwrap_or(default_hi);
        let name = self
            .name
            .clone()
            .unwrap_or_else(|| format!("shifted_{:?}", self.base).to_lowercase());

        let transform = Transform {
            shift: self.shift,
            rotation: self.rotation,
            bias: self.bias,
            segments,
        };
        let bias = transform.bias;
        Problem::new(
            name,
            vec![lo; d],
            vec![hi; d],
            Some(bias),
            Arc::new(move |x: &[f64]| transform.evaluate(x)),
        )
    }
}

struct Transform {
    shift: Vec<f64>,
    rotation: Option<Vec<f64>>,
    bias: f64,
    segments: Vec<(BaseFunction, std::ops::Range<usize>)>,
}

impl Transform {
    fn evaluate(&self, x: &[f64]) -> f64 {
        let d = self.shift.len();
        let diff: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        let z = match &self.rotation {
            Some(m) => (0..d)
                .map(|i| m[i * d..(i + 1) * d].iter().zip(&diff).map(|(a, b)| a * b).sum())
                .collect(),
            None => diff,
        };
        self.segments
            .iter()
            .map(|(base, range)| base.eval_simple(&z[range.clone()]))
            .sum::<f64>()
            + self.bias
    }
}

fn hybrid_segments(
    d: usize,
    components: Option<&[BaseFunction]>,
    proportions: Option<&[f64]>,
) -> Result<Vec<(BaseFunction, std::ops::Range<usize>)>> {
    let components = components.unwrap_or(&DEFAULT_HYBRID);
    if components.is_empty() || components.contains(&BaseFunction::Hybrid) {
        return Err(Error::Config("hybrid components must be non-empty simple bases".into()));
    }
    if components.len() > d {
        return Err(Error::Dimension(format!(
            "{} hybrid components need at least that many dimensions, dim is {d}",
            components.len()
        )));
    }
    let equal = vec![1.0 / components.len() as f64; components.len()];
    let proportions = proportions.unwrap_or(&equal);
    if proportions.len() != components.len() || proportions.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Config(
            "proportions must be positive and match the component count".into(),
        ));
    }
    let total: f64 = proportions.iter().sum();
    let mut segments = Vec::with_capacity(components.len());
    let mut start = 0;
    for (k, (base, p)) in components.iter().zip(proportions).enumerate() {
        let remaining_parts = components.len() - k - 1;
        let end = if remaining_parts == 0 {
            d
        } else {
            let len = ((p / total) * d as f64).floor().max(1.0) as usize;
            (start + len).min(d - remaining_parts)
        };
        segments.push((*base, start..end));
        start = end;
    }
    Ok(segments)
}

/// Loads a shifted/rotated problem from a TOML file.
pub fn load_shifted_rotated(path: impl AsRef<Path>) -> Result<Problem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let spec = ShiftedRotatedSpec::from_toml_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    spec.into_problem()
}
