//! Geometry, randomness, and bookkeeping shared by every optimizer.
//!
//! The search space is restricted to axis-aligned boxes: every experiment in
//! this crate samples uniformly over a [`BoxDomain`], and uniform sampling
//! over a box is exact. All coordinates are `f64`; the rejection-bound
//! constants span ~1e-28, so single precision would not do.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("point must have at least one coordinate")]
    EmptyPoint,
    #[error("coordinate {index} is not finite")]
    NonFiniteCoordinate { index: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("domain has empty interior in dimension {index}: lower must be strictly below upper")]
    EmptyInterior { index: usize },
    #[error("objective value is not finite")]
    NonFiniteValue,
}

/// A point of the search space: `d` finite real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, DomainError> {
        if coords.is_empty() {
            return Err(DomainError::EmptyPoint);
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(DomainError::NonFiniteCoordinate { index });
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Squared-distance free inner loop; callers guarantee equal dimensions.
pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean (l2) distance between two points of equal dimension.
pub fn euclidean_distance(a: &Point, b: &Point) -> Result<f64, DomainError> {
    if a.dim() != b.dim() {
        return Err(DomainError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(dist(a, b))
}

/// Axis-aligned compact search domain with non-empty interior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDomain {
    lower: Point,
    upper: Point,
}

impl BoxDomain {
    pub fn new(lower: Point, upper: Point) -> Result<Self, DomainError> {
        if lower.dim() != upper.dim() {
            return Err(DomainError::DimensionMismatch {
                left: lower.dim(),
                right: upper.dim(),
            });
        }
        for (index, (lo, hi)) in lower.coords().iter().zip(upper.coords()).enumerate() {
            if lo >= hi {
                return Err(DomainError::EmptyInterior { index });
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[-half_width, half_width]^d`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self, DomainError> {
        let lower = Point::new(vec![-half_width; dim])?;
        let upper = Point::new(vec![half_width; dim])?;
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &Point {
        &self.lower
    }

    pub fn upper(&self) -> &Point {
        &self.upper
    }

    /// Lebesgue volume of the box, always strictly positive.
    pub fn volume(&self) -> f64 {
        self.lower
            .coords()
            .iter()
            .zip(self.upper.coords())
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim()
            && p.coords()
                .iter()
                .zip(self.lower.coords())
                .zip(self.upper.coords())
                .all(|((x, lo), hi)| *x >= *lo && *x <= *hi)
    }

    /// Draws a point with each coordinate independently uniform on its side.
    pub fn sample_uniform(&self, rng: &mut RngStream) -> Point {
        let coords = self
            .lower
            .coords()
            .iter()
            .zip(self.upper.coords())
            .map(|(lo, hi)| rng.gen_range(*lo, *hi))
            .collect();
        Point { coords }
    }
}

/// One evaluation of the objective: a potential maximizer and its value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedPoint {
    pub point: Point,
    pub value: f64,
}

/// Append-only record of all evaluated points, with running extrema.
///
/// This is the entire state of a LIPO-style run: the sequence of potential
/// maximizers found so far and their values.
#[derive(Debug, Clone, Default)]
pub struct History {
    entries: Vec<EvaluatedPoint>,
    best_index: usize,
    running_max: f64,
    running_min: f64,
}

impl History {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            best_index: 0,
            running_max: f64::NEG_INFINITY,
            running_min: f64::INFINITY,
        }
    }

    pub fn push(&mut self, entry: EvaluatedPoint) -> Result<(), DomainError> {
        if !entry.value.is_finite() {
            return Err(DomainError::NonFiniteValue);
        }
        if entry.value > self.running_max {
            self.running_max = entry.value;
            self.best_index = self.entries.len();
        }
        if entry.value < self.running_min {
            self.running_min = entry.value;
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EvaluatedPoint] {
        &self.entries
    }

    pub fn running_max(&self) -> Option<f64> {
        (!self.is_empty()).then_some(self.running_max)
    }

    pub fn running_min(&self) -> Option<f64> {
        (!self.is_empty()).then_some(self.running_min)
    }

    pub fn best(&self) -> Option<&EvaluatedPoint> {
        self.entries.get(self.best_index)
    }
}

/// One row of the samples-vs-evaluations curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub eval_index: u64,
    pub cumulative_samples: u64,
    pub best_value: f64,
}

/// Per-evaluation record of cumulative candidate samples and the incumbent.
///
/// The slope of `cumulative_samples` against `eval_index` is what the
/// window-based stopping rule watches.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, eval_index: u64, cumulative_samples: u64, best_value: f64) {
        debug_assert!(self.check_next(eval_index, cumulative_samples, best_value).is_ok());
        self.rows.push(TraceRow {
            eval_index,
            cumulative_samples,
            best_value,
        });
    }

    fn check_next(
        &self,
        eval_index: u64,
        cumulative_samples: u64,
        best_value: f64,
    ) -> Result<(), String> {
        if cumulative_samples < eval_index {
            return Err(format!(
                "row {eval_index}: cumulative_samples {cumulative_samples} < eval_index"
            ));
        }
        match self.rows.last() {
            None if eval_index != 1 => Err("first eval_index must be 1".into()),
            Some(prev) => {
                if eval_index != prev.eval_index + 1 {
                    Err(format!("eval_index must increase by 1, got {eval_index}"))
                } else if cumulative_samples < prev.cumulative_samples {
                    Err(format!("cumulative_samples decreased at row {eval_index}"))
                } else if best_value < prev.best_value {
                    Err(format!("best_value decreased at row {eval_index}"))
                } else {
                    Ok(())
                }
            }
            None => Ok(()),
        }
    }

    /// Re-derives every monotonicity invariant by full scan.
    pub fn validate(&self) -> Result<(), String> {
        let mut rebuilt = RunTrace::new();
        for row in &self.rows {
            rebuilt.check_next(row.eval_index, row.cumulative_samples, row.best_value)?;
            rebuilt.rows.push(*row);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    /// CSV with header `eval_index,cumulative_samples,best_value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "eval_index,cumulative_samples,best_value")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{}",
                row.eval_index,
                row.cumulative_samples,
                format_g17(row.best_value)
            )?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits (f64 round-trip safe).
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Seeded deterministic random stream: same seed, same sample sequence.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn gen_range(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Uniform draw on `[0, 1)`, used for Bernoulli state switches.
    pub fn gen_unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
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
    fn distance_pythagoras() {
        assert_eq!(euclidean_distance(&pt(&[0.0, 0.0]), &pt(&[3.0, 4.0])).unwrap(), 5.0);
    }

    #[test]
    fn distance_identity() {
        assert_eq!(euclidean_distance(&pt(&[1.3, -2.0]), &pt(&[1.3, -2.0])).unwrap(), 0.0);
    }

    #[test]
    fn distance_unit_cube_diagonal() {
        let d = euclidean_distance(&pt(&[1.0, 1.0, 1.0]), &pt(&[0.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(d, 3.0_f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn distance_dimension_mismatch() {
        assert!(matches!(
            euclidean_distance(&pt(&[0.0]), &pt(&[0.0, 1.0])),
            Err(DomainError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point::new(vec![0.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
    }

    #[test]
    fn degenerate_domain_rejected_at_construction() {
        let lo = pt(&[0.0, 0.0]);
        let hi = pt(&[1.0, 0.0]);
        assert!(matches!(
            BoxDomain::new(lo, hi),
            Err(DomainError::EmptyInterior { index: 1 })
        ));
    }

    #[test]
    fn box_volume() {
        let domain = BoxDomain::symmetric(3, 2.0).unwrap();
        assert_eq!(domain.volume(), 64.0);
    }

    #[test]
    fn samples_stay_inside_domain() {
        let domain = BoxDomain::symmetric(2, 1.0).unwrap();
        let mut rng = RngStream::new(9);
        for _ in 0..10_000 {
            assert!(domain.contains(&domain.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn sample_mean_matches_uniform_clt_bound() {
        // 1e5 draws on [-5,5]^2: per-coordinate mean within 5*width/sqrt(12 n) of 0.
        let n = 100_000;
        let domain = BoxDomain::symmetric(2, 5.0).unwrap();
        let mut rng = RngStream::new(4242);
        let mut sums = [0.0f64; 2];
        for _ in 0..n {
            let p = domain.sample_uniform(&mut rng);
            sums[0] += p.coords()[0];
            sums[1] += p.coords()[1];
        }
        let bound = 5.0 * 10.0 / (12.0 * n as f64).sqrt();
        for sum in sums {
            assert!((sum / n as f64).abs() < bound, "mean {} vs bound {}", sum / n as f64, bound);
        }
    }

    #[test]
    fn rng_stream_is_reproducible() {
        let domain = BoxDomain::symmetric(4, 3.0).unwrap();
        let mut a = RngStream::new(77);
        let mut b = RngStream::new(77);
        for _ in 0..100 {
            assert_eq!(domain.sample_uniform(&mut a), domain.sample_uniform(&mut b));
        }
    }

    #[test]
    fn history_running_extrema() {
        let mut h = History::new();
        assert!(h.running_max().is_none());
        for (i, v) in [1.0, 3.0, 2.0, -1.0].into_iter().enumerate() {
            h.push(EvaluatedPoint {
                point: pt(&[i as f64]),
                value: v,
            })
            .unwrap();
        }
        assert_eq!(h.running_max(), Some(3.0));
        assert_eq!(h.running_min(), Some(-1.0));
        assert_eq!(h.best().unwrap().point, pt(&[1.0]));
        // re-derivable by full scan
        let max = h.entries().iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(h.running_max(), Some(max));
    }

    #[test]
    fn history_rejects_non_finite_value() {
        let mut h = History::new();
        assert!(h
            .push(EvaluatedPoint {
                point: pt(&[0.0]),
                value: f64::NAN,
            })
            .is_err());
    }

    #[test]
    fn trace_validate_catches_violations() {
        let mut t = RunTrace::new();
        t.push(1, 1, -3.0);
        t.push(2, 4, -1.0);
        assert!(t.validate().is_ok());
        // hand-build a broken trace
        let broken = RunTrace {
            rows: vec![
                TraceRow { eval_index: 1, cumulative_samples: 1, best_value: 0.0 },
                TraceRow { eval_index: 2, cumulative_samples: 1, best_value: -1.0 },
            ],
        };
        assert!(broken.validate().is_err());
    }

    #[test]
    fn trace_csv_format() {
        let mut t = RunTrace::new();
        t.push(1, 1, 0.25);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "eval_index,cumulative_samples,best_value\n1,1,2.5000000000000000e-1\n");
        // 17 significant digits round-trip
        assert_eq!("2.5000000000000000e-1".parse::<f64>().unwrap(), 0.25);
    }
}
