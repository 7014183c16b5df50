//! Objective functions, evaluation counting, and the benchmark suite.
//!
//! Everything is expressed in maximization form; benchmarks that are
//! conventionally minimized ship negated. Each benchmark carries frozen
//! constants (known maximum, domain mean, Lipschitz constant) produced by
//! offline oracles; see `assets/benchmarks.json` for the provenance of each
//! number.

use crate::domain::{BoxDomain, DomainError, Point};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("unknown benchmark '{0}' (expected one of himmelblau, holder, rastrigin, rosenbrock, sphere, square)")]
    UnknownBenchmark(String),
    #[error("benchmark '{name}' is only defined in dimension 2, requested {dim}")]
    UnsupportedDimension { name: String, dim: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("theta must lie in [0, 1], got {0}")]
    ThetaOutOfRange(f64),
    #[error("benchmark constants file: {0}")]
    ConstantsIo(#[from] std::io::Error),
    #[error("benchmark constants file: {0}")]
    ConstantsFormat(#[from] serde_json::Error),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A black-box function to maximize over a box domain.
///
/// Implementations must return finite values everywhere inside the domain.
pub trait Objective: Sync {
    fn name(&self) -> &str;
    fn domain(&self) -> &BoxDomain;
    fn eval(&self, x: &Point) -> f64;

    fn dim(&self) -> usize {
        self.domain().dim()
    }
}

/// Wraps an objective and counts every evaluation and candidate draw.
///
/// Confined to a single run; counts never reset.
pub struct CountingObjective<'a> {
    inner: &'a dyn Objective,
    eval_count: u64,
    sample_count: u64,
}

impl<'a> CountingObjective<'a> {
    pub fn new(inner: &'a dyn Objective) -> Self {
        Self {
            inner,
            eval_count: 0,
            sample_count: 0,
        }
    }

    pub fn eval(&mut self, x: &Point) -> f64 {
        self.eval_count += 1;
        self.inner.eval(x)
    }

    pub(crate) fn note_sample(&mut self) {
        self.sample_count += 1;
    }

    pub fn domain(&self) -> &BoxDomain {
        self.inner.domain()
    }

    pub fn name(&self) -> &str {
        self.inner.name()
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }
}

/// The six benchmark functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkName {
    Himmelblau,
    Holder,
    Rastrigin,
    Rosenbrock,
    Sphere,
    Square,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 6] = [
        BenchmarkName::Himmelblau,
        BenchmarkName::Holder,
        BenchmarkName::Rastrigin,
        BenchmarkName::Rosenbrock,
        BenchmarkName::Sphere,
        BenchmarkName::Square,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::Himmelblau => "himmelblau",
            BenchmarkName::Holder => "holder",
            BenchmarkName::Rastrigin => "rastrigin",
            BenchmarkName::Rosenbrock => "rosenbrock",
            BenchmarkName::Sphere => "sphere",
            BenchmarkName::Square => "square",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ObjectiveError> {
        match name.to_ascii_lowercase().as_str() {
            "himmelblau" => Ok(BenchmarkName::Himmelblau),
            "holder" => Ok(BenchmarkName::Holder),
            "rastrigin" => Ok(BenchmarkName::Rastrigin),
            "rosenbrock" => Ok(BenchmarkName::Rosenbrock),
            "sphere" => Ok(BenchmarkName::Sphere),
            "square" => Ok(BenchmarkName::Square),
            other => Err(ObjectiveError::UnknownBenchmark(other.to_string())),
        }
    }

    fn eval(self, x: &[f64]) -> f64 {
        match self {
            BenchmarkName::Himmelblau => {
                let (a, b) = (x[0], x[1]);
                -((a * a + b - 11.0).powi(2) + (a + b * b - 7.0).powi(2))
            }
            BenchmarkName::Holder => {
                let (a, b) = (x[0], x[1]);
                let r = (a * a + b * b).sqrt();
                (a.sin() * b.cos() * (1.0 - r / std::f64::consts::PI).abs().exp()).abs()
            }
            BenchmarkName::Rastrigin => {
                let d = x.len() as f64;
                -(10.0 * d
                    + x.iter()
                        .map(|&v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                        .sum::<f64>())
            }
            BenchmarkName::Rosenbrock => -x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum::<f64>(),
            BenchmarkName::Sphere => -x.iter().map(|&v| v * v).sum::<f64>(),
            BenchmarkName::Square => x.iter().map(|&v| v * v).sum::<f64>(),
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry of the benchmark constants file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConstants {
    pub name: BenchmarkName,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub max_value: f64,
    pub mean_value: f64,
    pub kappa: f64,
    pub provenance: String,
}

/// A benchmark objective together with its frozen reference constants.
#[derive(Debug, Clone)]
pub struct BenchmarkFunction {
    name: BenchmarkName,
    domain: BoxDomain,
    max_value: f64,
    mean_value: f64,
    kappa: f64,
}

impl BenchmarkFunction {
    fn from_constants(c: &BenchmarkConstants) -> Result<Self, ObjectiveError> {
        let domain = BoxDomain::new(Point::new(c.lower.clone())?, Point::new(c.upper.clone())?)?;
        debug_assert!(c.mean_value <= c.max_value);
        Ok(Self {
            name: c.name,
            domain,
            max_value: c.max_value,
            mean_value: c.mean_value,
            kappa: c.kappa,
        })
    }

    pub fn benchmark_name(&self) -> BenchmarkName {
        self.name
    }

    /// Known global maximum value over the domain.
    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    /// Known domain average of the objective.
    pub fn mean_value(&self) -> f64 {
        self.mean_value
    }

    /// Oracle Lipschitz constant (max gradient norm, 1% safety margin).
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

impl Objective for BenchmarkFunction {
    fn name(&self) -> &str {
        self.name.as_str()
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn eval(&self, x: &Point) -> f64 {
        self.name.eval(x.coords())
    }
}

const DEFAULT_CONSTANTS_JSON: &str = include_str!("../assets/benchmarks.json");

/// The constants table embedded in the binary.
pub fn shipped_benchmark_constants() -> &'static [BenchmarkConstants] {
    default_constants()
}

fn default_constants() -> &'static [BenchmarkConstants] {
    static TABLE: OnceLock<Vec<BenchmarkConstants>> = OnceLock::new();
    TABLE.get_or_init(|| {
        serde_json::from_str(DEFAULT_CONSTANTS_JSON).expect("embedded benchmark constants are valid")
    })
}

/// Loads a benchmark constants file, e.g. to override the shipped values.
pub fn load_benchmark_constants(path: &Path) -> Result<Vec<BenchmarkConstants>, ObjectiveError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Builds a named benchmark from an explicit constants table.
pub fn make_benchmark_from(
    table: &[BenchmarkConstants],
    name: &str,
) -> Result<BenchmarkFunction, ObjectiveError> {
    let key = BenchmarkName::parse(name)?;
    let c = table
        .iter()
        .find(|c| c.name == key)
        .ok_or_else(|| ObjectiveError::UnknownBenchmark(name.to_string()))?;
    BenchmarkFunction::from_constants(c)
}

/// Builds a named benchmark in the standard 2D setting with shipped constants.
pub fn make_benchmark(name: &str) -> Result<BenchmarkFunction, ObjectiveError> {
    make_benchmark_from(default_constants(), name)
}

/// Builds a benchmark in dimension `d` where the formula generalizes.
///
/// Himmelblau and the Hölder table are 2D-only. For the generalizable
/// functions the mean and maximum are closed-form; the Lipschitz constant is
/// a conservative analytic gradient bound rather than the tighter 2D grid
/// oracle.
pub fn make_benchmark_in_dim(name: &str, d: usize) -> Result<BenchmarkFunction, ObjectiveError> {
    if d == 0 {
        return Err(ObjectiveError::ZeroDimension);
    }
    let key = BenchmarkName::parse(name)?;
    if d == 2 {
        return make_benchmark(name);
    }
    let df = d as f64;
    let (half_width, max_value, mean_value, kappa) = match key {
        BenchmarkName::Himmelblau | BenchmarkName::Holder => {
            return Err(ObjectiveError::UnsupportedDimension {
                name: key.as_str().to_string(),
                dim: d,
            })
        }
        BenchmarkName::Rastrigin => {
            let a: f64 = 5.12;
            let two_pi_a = 2.0 * std::f64::consts::PI * a;
            let mean = -df * (10.0 + a * a / 3.0 - 10.0 * two_pi_a.sin() / two_pi_a);
            let per_coord = 2.0 * a + 20.0 * std::f64::consts::PI;
            (a, 0.0, mean, df.sqrt() * per_coord * 1.01)
        }
        BenchmarkName::Rosenbrock => {
            let a: f64 = 2.048;
            let mean = -(df - 1.0) * (100.0 * (a * a / 3.0 + a.powi(4) / 5.0) + 1.0 + a * a / 3.0);
            // per-coordinate partial bound: coupling + local terms at |x| = a
            let per_coord = 400.0 * a * (a + a * a) + 2.0 * (1.0 + a) + 200.0 * (a + a * a);
            (a, 0.0, mean, df.sqrt() * per_coord * 1.01)
        }
        BenchmarkName::Sphere => {
            let a: f64 = 5.12;
            (a, 0.0, -df * a * a / 3.0, 2.0 * a * df.sqrt() * 1.01)
        }
        BenchmarkName::Square => {
            let a: f64 = 10.0;
            (a, 100.0 * df, df * a * a / 3.0, 2.0 * a * df.sqrt() * 1.01)
        }
    };
    Ok(BenchmarkFunction {
        name: key,
        domain: BoxDomain::symmetric(d, half_width)?,
        max_value,
        mean_value,
        kappa,
    })
}

/// Value threshold interpolating between the domain mean (`theta = 0`)
/// and the known maximum (`theta = 1`); reaching it ends a target-mode run.
pub fn target_level(bench: &BenchmarkFunction, theta: f64) -> Result<f64, ObjectiveError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(ObjectiveError::ThetaOutOfRange(theta));
    }
    Ok(bench.max_value - (bench.max_value - bench.mean_value) * (1.0 - theta))
}

/// An ad-hoc objective built from a closure, mostly for tests and the
/// dimensionality analysis.
pub struct FnObjective<F: Fn(&Point) -> f64 + Sync> {
    name: String,
    domain: BoxDomain,
    f: F,
}

impl<F: Fn(&Point) -> f64 + Sync> FnObjective<F> {
    pub fn new(name: impl Into<String>, domain: BoxDomain, f: F) -> Self {
        Self {
            name: name.into(),
            domain,
            f,
        }
    }
}

impl<F: Fn(&Point) -> f64 + Sync> Objective for FnObjective<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn eval(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    #[test]
    fn himmelblau_global_optimum() {
        let b = make_benchmark("himmelblau").unwrap();
        assert_eq!(b.eval(&pt(&[3.0, 2.0])), 0.0);
    }

    #[test]
    fn rastrigin_origin() {
        let b = make_benchmark("rastrigin").unwrap();
        assert_eq!(b.eval(&pt(&[0.0, 0.0])), 0.0);
    }

    #[test]
    fn rosenbrock_optimum_at_ones() {
        let b = make_benchmark("rosenbrock").unwrap();
        assert_eq!(b.eval(&pt(&[1.0, 1.0])), 0.0);
    }

    #[test]
    fn square_corner_value() {
        let b = make_benchmark("square").unwrap();
        assert_eq!(b.eval(&pt(&[10.0, 10.0])), 200.0);
        assert_eq!(b.max_value(), 200.0);
    }

    #[test]
    fn holder_max_is_attained_near_frozen_argmax() {
        // refined argmax from the offline grid + Nelder-Mead oracle
        let b = make_benchmark("holder").unwrap();
        let v = b.eval(&pt(&[-8.05502349, -9.66459002]));
        assert_relative_eq!(v, b.max_value(), epsilon = 1e-3);
        assert_relative_eq!(b.max_value(), 19.2085, epsilon = 1e-3);
    }

    #[test]
    fn mean_below_max_for_all_benchmarks() {
        for name in BenchmarkName::ALL {
            let b = make_benchmark(name.as_str()).unwrap();
            assert!(b.mean_value() <= b.max_value(), "{name}");
        }
    }

    #[test]
    fn mean_values_match_quick_monte_carlo() {
        // 1e6 samples; tolerance 5 standard errors with a generous std guess.
        use crate::domain::RngStream;
        let mut rng = RngStream::new(271828);
        for name in BenchmarkName::ALL {
            let b = make_benchmark(name.as_str()).unwrap();
            let n = 1_000_000;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let v = b.eval(&b.domain().sample_uniform(&mut rng));
                sum += v;
                sumsq += v * v;
            }
            let mean = sum / n as f64;
            let var = (sumsq / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - b.mean_value()).abs() < 5.0 * se + 1e-9,
                "{name}: mc {mean} vs frozen {}",
                b.mean_value()
            );
        }
    }

    #[test]
    fn pairwise_slopes_below_kappa() {
        use crate::domain::{euclidean_distance, RngStream};
        let mut rng = RngStream::new(31337);
        for name in BenchmarkName::ALL {
            let b = make_benchmark(name.as_str()).unwrap();
            for _ in 0..100_000 {
                let p = b.domain().sample_uniform(&mut rng);
                let q = b.domain().sample_uniform(&mut rng);
                let d = euclidean_distance(&p, &q).unwrap();
                if d == 0.0 {
                    continue;
                }
                let slope = (b.eval(&p) - b.eval(&q)).abs() / d;
                assert!(slope <= b.kappa(), "{name}: slope {slope} vs kappa {}", b.kappa());
            }
        }
    }

    #[test]
    fn unknown_benchmark_is_an_error() {
        assert!(matches!(
            make_benchmark("ackley"),
            Err(ObjectiveError::UnknownBenchmark(_))
        ));
    }

    #[test]
    fn target_level_endpoints() {
        let b = make_benchmark("sphere").unwrap();
        assert_eq!(target_level(&b, 1.0).unwrap(), b.max_value());
        assert_eq!(target_level(&b, 0.0).unwrap(), b.mean_value());
        assert_relative_eq!(target_level(&b, 0.99).unwrap(), -0.17476266666666668, epsilon = 1e-12);
        assert!(target_level(&b, 1.5).is_err());
        assert!(target_level(&b, -0.1).is_err());
    }

    #[test]
    fn generalized_dimensions() {
        let b = make_benchmark_in_dim("sphere", 5).unwrap();
        assert_eq!(b.dim(), 5);
        assert_relative_eq!(b.mean_value(), -5.0 * 5.12 * 5.12 / 3.0, epsilon = 1e-12);
        assert!(matches!(
            make_benchmark_in_dim("holder", 3),
            Err(ObjectiveError::UnsupportedDimension { .. })
        ));
        // d = 2 falls back to the frozen grid-oracle constants
        let b2 = make_benchmark_in_dim("sphere", 2).unwrap();
        assert_eq!(b2.kappa(), make_benchmark("sphere").unwrap().kappa());
    }

    #[test]
    fn counting_objective_counts() {
        let b = make_benchmark("sphere").unwrap();
        let mut c = CountingObjective::new(&b);
        let p = pt(&[1.0, 1.0]);
        c.eval(&p);
        c.eval(&p);
        assert_eq!(c.eval_count(), 2);
    }
}
