//! The Lipschitz upper bound, the candidate acceptance test, and the
//! adaptive Lipschitz-constant estimator.
//!
//! Given evaluated points `(X_i, f(X_i))` and a constant `kappa`, the value
//! of a kappa-Lipschitz `f` at `x` cannot exceed
//! `min_i [ f(X_i) + kappa * ||x - X_i|| ]`. A candidate is worth evaluating
//! iff that bound reaches the best value observed so far; ties accept.

use crate::domain::{dist, History, Point};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LipschitzError {
    #[error("history is empty; evaluate the first point unconditionally")]
    EmptyHistory,
    #[error("kappa must be non-negative, got {0}")]
    NegativeKappa(f64),
    #[error("alpha must be strictly positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("need at least two history entries to estimate kappa")]
    TooFewEntries,
    #[error("all history points coincide; no pairwise slope is defined")]
    DegenerateHistory,
}

/// Grid-snapped Lipschitz-constant estimate `(1 + alpha)^i`.
///
/// `grid_index` is `None` for the zero-slope sentinel (all observed values
/// equal), in which case `value` is 0 and the acceptance test degenerates to
/// accept-all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaEstimate {
    pub alpha: f64,
    pub grid_index: Option<i64>,
    pub value: f64,
}

fn grid_snap(max_slope: f64, alpha: f64) -> KappaEstimate {
    if max_slope == 0.0 {
        return KappaEstimate {
            alpha,
            grid_index: None,
            value: 0.0,
        };
    }
    let i = (max_slope.ln() / (1.0 + alpha).ln()).ceil() as i64;
    KappaEstimate {
        alpha,
        grid_index: Some(i),
        value: (1.0 + alpha).powi(i as i32),
    }
}

pub(crate) fn upper_bound_unchecked(x: &Point, history: &History, kappa: f64) -> f64 {
    history
        .entries()
        .iter()
        .map(|e| e.value + kappa * dist(x, &e.point))
        .fold(f64::INFINITY, f64::min)
}

/// The LIPO envelope `min_i [ f(X_i) + kappa * ||x - X_i|| ]` at `x`.
pub fn upper_bound_at(x: &Point, history: &History, kappa: f64) -> Result<f64, LipschitzError> {
    if history.is_empty() {
        return Err(LipschitzError::EmptyHistory);
    }
    if kappa < 0.0 {
        return Err(LipschitzError::NegativeKappa(kappa));
    }
    Ok(upper_bound_unchecked(x, history, kappa))
}

/// Early-exit acceptance test: rejects on the first envelope term that falls
/// below the running maximum. Decision-equivalent to comparing against
/// [`upper_bound_at`].
pub(crate) fn accept_unchecked(x: &Point, history: &History, kappa: f64) -> bool {
    let max = history.running_max().expect("non-empty history");
    history
        .entries()
        .iter()
        .all(|e| e.value + kappa * dist(x, &e.point) >= max)
}

/// True iff the candidate is a potential maximizer: the upper bound at `x`
/// reaches the best value observed so far (equality accepts).
pub fn accept_candidate(x: &Point, history: &History, kappa: f64) -> Result<bool, LipschitzError> {
    if history.is_empty() {
        return Err(LipschitzError::EmptyHistory);
    }
    if kappa < 0.0 {
        return Err(LipschitzError::NegativeKappa(kappa));
    }
    Ok(accept_unchecked(x, history, kappa))
}

/// Full pair scan over the history: `O(t^2)` reference implementation.
///
/// The optimizer loop uses the incremental [`KappaEstimator`] instead; this
/// function is the authoritative definition the estimator must agree with.
pub fn estimate_kappa(history: &History, alpha: f64) -> Result<KappaEstimate, LipschitzError> {
    if alpha <= 0.0 {
        return Err(LipschitzError::NonPositiveAlpha(alpha));
    }
    let entries = history.entries();
    if entries.len() < 2 {
        return Err(LipschitzError::TooFewEntries);
    }
    let mut max_slope = 0.0f64;
    let mut any_pair = false;
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            let d = dist(&a.point, &b.point);
            if d == 0.0 {
                continue; // duplicate sampled point, skip
            }
            any_pair = true;
            let slope = (a.value - b.value).abs() / d;
            if slope > max_slope {
                max_slope = slope;
            }
        }
    }
    if !any_pair {
        return Err(LipschitzError::DegenerateHistory);
    }
    Ok(grid_snap(max_slope, alpha))
}

/// Incremental estimator: each new evaluation only introduces pairs that
/// touch the newest point, so the running maximum slope updates in `O(t)`.
///
/// The unwindowed form tracks the running maximum over all pairs, matching
/// [`estimate_kappa`]. The windowed form restricts the pair scan to the last
/// `window` evaluations: as evaluations concentrate in the region of
/// potential maximizers, globally-steep pairs age out and the estimate tracks
/// the local variation there — deliberately allowed to fall below the global
/// constant.
/// A windowed estimate is floored at the largest slope between the incumbent
/// best point and any other history point. Below that value the estimate
/// would certify the incumbent itself as suboptimal and the acceptance
/// region could become empty, deadlocking the rejection sampler; at or above
/// it the region keeps an open neighborhood of the incumbent. The unwindowed
/// estimate satisfies the floor by construction (those slopes are ordinary
/// pairwise slopes).
#[derive(Debug, Clone, Copy, PartialEq)]
enum Memory {
    /// Running maximum over all pairs ever seen (the `estimate_kappa` form).
    Global,
    /// Maximum pairwise slope among the last `n` evaluations only.
    PairWindow(usize),
    /// The newest evaluation's ratio: its maximum slope against everything
    /// evaluated before it.
    LastRatio,
}

#[derive(Debug, Clone)]
pub struct KappaEstimator {
    alpha: f64,
    max_slope: f64,
    has_pair: bool,
    memory: Memory,
    recent: std::collections::VecDeque<crate::domain::EvaluatedPoint>,
    last_ratio: f64,
    incumbent_floor: f64,
}

impl KappaEstimator {
    pub fn new(alpha: f64) -> Result<Self, LipschitzError> {
        if alpha <= 0.0 {
            return Err(LipschitzError::NonPositiveAlpha(alpha));
        }
        Ok(Self {
            alpha,
            max_slope: 0.0,
            has_pair: false,
            memory: Memory::Global,
            recent: std::collections::VecDeque::new(),
            last_ratio: 0.0,
            incumbent_floor: 0.0,
        })
    }

    /// Estimator whose memory is limited to the last `window` evaluations;
    /// only pairs with both endpoints inside the window count.
    pub fn windowed(alpha: f64, window: usize) -> Result<Self, LipschitzError> {
        if window < 2 {
            return Err(LipschitzError::TooFewEntries);
        }
        let mut est = Self::new(alpha)?;
        est.memory = Memory::PairWindow(window);
        Ok(est)
    }

    /// Estimator that tracks only the newest evaluation's ratio.
    pub fn last_ratio(alpha: f64) -> Result<Self, LipschitzError> {
        let mut est = Self::new(alpha)?;
        est.memory = Memory::LastRatio;
        Ok(est)
    }

    /// Folds the newest history entry into the running maximum slope.
    /// Call exactly once after each `History::push`.
    pub fn observe_last(&mut self, history: &History) {
        let entries = history.entries();
        let Some((last, rest)) = entries.split_last() else {
            return;
        };
        let mut ratio: Option<f64> = None;
        for e in rest {
            let d = dist(&last.point, &e.point);
            if d == 0.0 {
                continue;
            }
            self.has_pair = true;
            let slope = (last.value - e.value).abs() / d;
            if ratio.is_none_or(|r| slope > r) {
                ratio = Some(slope);
            }
            if slope > self.max_slope {
                self.max_slope = slope;
            }
        }
        if self.memory != Memory::Global {
            if let Some(r) = ratio {
                self.last_ratio = r;
            }
            if let Memory::PairWindow(w) = self.memory {
                self.recent.push_back(last.clone());
                while self.recent.len() > w {
                    self.recent.pop_front();
                }
            }
            let best = history.best().expect("non-empty history");
            self.incumbent_floor = entries
                .iter()
                .filter_map(|e| {
                    let d = dist(&best.point, &e.point);
                    (d > 0.0).then(|| (best.value - e.value) / d)
                })
                .fold(0.0, f64::max);
        }
    }

    pub fn has_pair(&self) -> bool {
        self.has_pair
    }

    pub fn estimate(&self) -> KappaEstimate {
        let slope = match self.memory {
            Memory::Global => self.max_slope,
            Memory::LastRatio => self.last_ratio.max(self.incumbent_floor),
            Memory::PairWindow(_) => {
                let pts: Vec<_> = self.recent.iter().collect();
                let mut max = 0.0f64;
                for (i, a) in pts.iter().enumerate() {
                    for b in &pts[i + 1..] {
                        let d = dist(&a.point, &b.point);
                        if d == 0.0 {
                            continue;
                        }
                        let s = (a.value - b.value).abs() / d;
                        if s > max {
                            max = s;
                        }
                    }
                }
                max.max(self.incumbent_floor)
            }
        };
        let mut est = grid_snap(slope, self.alpha);
        // grid snap is >= its input but may land exactly on the floor; one
        // extra grid step keeps the incumbent's neighborhood strictly inside
        // the acceptance region
        if self.incumbent_floor > 0.0 && est.value <= self.incumbent_floor {
            let i = est.grid_index.expect("positive slope has a grid index") + 1;
            est = KappaEstimate {
                alpha: self.alpha,
                grid_index: Some(i),
                value: (1.0 + self.alpha).powi(i as i32),
            };
        }
        est
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EvaluatedPoint, Point};
    use approx::assert_relative_eq;

    fn history_1d(pairs: &[(f64, f64)]) -> History {
        let mut h = History::new();
        for &(x, v) in pairs {
            h.push(EvaluatedPoint {
                point: Point::new(vec![x]).unwrap(),
                value: v,
            })
            .unwrap();
        }
        h
    }

    fn pt1(x: f64) -> Point {
        Point::new(vec![x]).unwrap()
    }

    #[test]
    fn upper_bound_two_term_hand_evaluation() {
        let h = history_1d(&[(0.0, 0.0), (1.0, 1.0)]);
        // min(0 + 0.25, 1 + 0.75) = 0.25
        assert_eq!(upper_bound_at(&pt1(0.25), &h, 1.0).unwrap(), 0.25);
    }

    #[test]
    fn upper_bound_at_history_point() {
        let h = history_1d(&[(0.0, 0.0), (1.0, 1.0)]);
        let at_zero = upper_bound_at(&pt1(0.0), &h, 1.0).unwrap();
        assert!(at_zero <= 0.0 + 0.0 + f64::EPSILON);
        assert!(at_zero >= h.running_min().unwrap());
    }

    #[test]
    fn upper_bound_zero_kappa_is_min_value() {
        let h = history_1d(&[(0.0, 0.3), (1.0, 1.0), (2.0, -0.5)]);
        assert_eq!(upper_bound_at(&pt1(0.7), &h, 0.0).unwrap(), -0.5);
    }

    #[test]
    fn empty_history_is_a_usage_error() {
        let h = History::new();
        assert!(matches!(
            upper_bound_at(&pt1(0.0), &h, 1.0),
            Err(LipschitzError::EmptyHistory)
        ));
        assert!(matches!(
            accept_candidate(&pt1(0.0), &h, 1.0),
            Err(LipschitzError::EmptyHistory)
        ));
    }

    #[test]
    fn single_point_history_accepts_anything() {
        let h = history_1d(&[(0.5, 3.0)]);
        for x in [0.0, 0.5, 1.0] {
            assert!(accept_candidate(&pt1(x), &h, 0.0).unwrap());
            assert!(accept_candidate(&pt1(x), &h, 10.0).unwrap());
        }
    }

    #[test]
    fn accept_examples_from_two_point_history() {
        let h = history_1d(&[(0.0, 0.0), (1.0, 1.0)]);
        // bound at 0.25 is 0.25 < 1 = running max
        assert!(!accept_candidate(&pt1(0.25), &h, 1.0).unwrap());
        // bound at 2 is min(0+2, 1+1) = 2 >= 1
        assert!(accept_candidate(&pt1(2.0), &h, 1.0).unwrap());
    }

    #[test]
    fn ties_accept() {
        // at x = 2, kappa = 0.5: min(0+1, 1+0.5) = 1 == running max
        let h = history_1d(&[(0.0, 0.0), (1.0, 1.0)]);
        assert!(accept_candidate(&pt1(2.0), &h, 0.5).unwrap());
    }

    #[test]
    fn estimate_scalar_hand_computation() {
        let h = history_1d(&[(0.0, 0.0), (1.0, 2.0)]);
        let est = estimate_kappa(&h, 0.01).unwrap();
        assert_eq!(est.grid_index, Some(70));
        assert_relative_eq!(est.value, 1.01f64.powi(70), max_relative = 1e-15);
        assert_relative_eq!(est.value, 2.006763368395385, max_relative = 1e-12);
    }

    #[test]
    fn estimate_on_exact_grid_point() {
        let h = history_1d(&[(0.0, 0.0), (1.0, 1.01)]);
        let est = estimate_kappa(&h, 0.01).unwrap();
        assert_eq!(est.grid_index, Some(1));
        assert_eq!(est.value, 1.01);
    }

    #[test]
    fn zero_slope_sentinel() {
        let h = history_1d(&[(0.0, 5.0), (1.0, 5.0), (2.0, 5.0)]);
        let est = estimate_kappa(&h, 0.01).unwrap();
        assert_eq!(est.grid_index, None);
        assert_eq!(est.value, 0.0);
        // sentinel keeps accept-all behavior: all values equal
        assert!(accept_candidate(&pt1(0.7), &h, est.value).unwrap());
    }

    #[test]
    fn degenerate_history_errors() {
        let h = history_1d(&[(1.0, 2.0), (1.0, 2.0)]);
        assert!(matches!(
            estimate_kappa(&h, 0.01),
            Err(LipschitzError::DegenerateHistory)
        ));
    }

    #[test]
    fn duplicate_points_are_skipped_not_fatal() {
        let h = history_1d(&[(0.0, 0.0), (0.0, 0.0), (1.0, 2.0)]);
        let est = estimate_kappa(&h, 0.01).unwrap();
        assert_eq!(est.grid_index, Some(70));
    }

    #[test]
    fn too_few_entries_errors() {
        let h = history_1d(&[(0.0, 0.0)]);
        assert!(matches!(
            estimate_kappa(&h, 0.01),
            Err(LipschitzError::TooFewEntries)
        ));
        assert!(matches!(
            estimate_kappa(&history_1d(&[(0.0, 0.0), (1.0, 1.0)]), 0.0),
            Err(LipschitzError::NonPositiveAlpha(_))
        ));
    }

    #[test]
    fn incremental_matches_full_scan() {
        use crate::domain::RngStream;
        let mut rng = RngStream::new(99);
        let mut h = History::new();
        let mut inc = KappaEstimator::new(0.01).unwrap();
        for _ in 0..60 {
            let x = rng.gen_range(-3.0, 3.0);
            let y = rng.gen_range(-3.0, 3.0);
            h.push(EvaluatedPoint {
                point: Point::new(vec![x, y]).unwrap(),
                value: (x * y).sin() + x,
            })
            .unwrap();
            inc.observe_last(&h);
            if h.len() >= 2 {
                assert_eq!(inc.estimate(), estimate_kappa(&h, 0.01).unwrap());
            }
        }
    }

    #[test]
    fn windowed_estimator_forgets_old_slopes() {
        // steep pair first, then a cluster of flat pairs: the windowed
        // estimate decays to the local slope while the global one stays put
        let mut h = History::new();
        let mut global = KappaEstimator::new(0.01).unwrap();
        let mut local = KappaEstimator::windowed(0.01, 3).unwrap();
        let pts = [(0.0, 0.0), (1.0, 10.0), (100.0, 10.1), (100.2, 10.12), (100.4, 10.14), (100.6, 10.16)];
        for &(x, v) in &pts {
            h.push(EvaluatedPoint { point: pt1(x), value: v }).unwrap();
            global.observe_last(&h);
            local.observe_last(&h);
        }
        assert!(global.estimate().value >= 10.0);
        // last 3 ratios all come from the flat cluster (slope 0.1)
        assert!(local.estimate().value < 0.2);
        assert!(local.estimate().value >= 0.1);
    }

    #[test]
    fn windowed_estimator_with_large_window_matches_global() {
        use crate::domain::RngStream;
        let mut rng = RngStream::new(21);
        let mut h = History::new();
        let mut global = KappaEstimator::new(0.01).unwrap();
        let mut local = KappaEstimator::windowed(0.01, 1000).unwrap();
        for _ in 0..50 {
            let x = rng.gen_range(-2.0, 2.0);
            h.push(EvaluatedPoint { point: pt1(x), value: (3.0 * x).sin() }).unwrap();
            global.observe_last(&h);
            local.observe_last(&h);
        }
        assert_eq!(global.estimate(), local.estimate());
    }

    #[test]
    fn estimate_is_non_decreasing_as_history_grows() {
        use crate::domain::RngStream;
        let mut rng = RngStream::new(5);
        let mut h = History::new();
        let mut inc = KappaEstimator::new(0.01).unwrap();
        let mut prev = 0.0;
        for _ in 0..40 {
            let x = rng.gen_range(0.0, 1.0);
            h.push(EvaluatedPoint {
                point: pt1(x),
                value: (7.0 * x).cos(),
            })
            .unwrap();
            inc.observe_last(&h);
            let v = inc.estimate().value;
            assert!(v >= prev);
            prev = v;
        }
    }
}
