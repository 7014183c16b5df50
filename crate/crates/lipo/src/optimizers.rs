//! The six optimization procedures and their stopping rules.
//!
//! All variants share one skeleton: evaluate one uniform point
//! unconditionally, then repeatedly pick the next point to evaluate.
//! PRS evaluates every sample. LIPO variants rejection-sample until a
//! candidate passes the acceptance test under the known constant. AdaLIPO
//! variants flip a Bernoulli coin once per iteration: exploration evaluates
//! the next uniform sample directly, exploitation rejection-samples under
//! the current estimate. The `+` variants add a stopping rule on the growth
//! rate of the samples-vs-evaluations curve; `adalipo+` additionally decays
//! the exploration probability as `min(1, 1/ln t)`.

use crate::domain::{EvaluatedPoint, History, Point, RngStream, RunTrace};
use crate::lipschitz::{accept_unchecked, KappaEstimator, LipschitzError};
use crate::objective::CountingObjective;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("{0} requires a Lipschitz constant (kappa)")]
    MissingKappa(OptimizerKind),
    #[error("adalipo requires a fixed exploration probability in (0, 1]")]
    MissingExplorationProbability,
    #[error("exploration probability must lie in (0, 1], got {0}")]
    InvalidExplorationProbability(f64),
    #[error("alpha must be strictly positive, got {0}")]
    InvalidAlpha(f64),
    #[error("kappa must be non-negative, got {0}")]
    InvalidKappa(f64),
    #[error("stopping rule needs at least one of budget, sample cap, or target value")]
    NoStoppingRule,
    #[error("sample cap must be at least 1")]
    ZeroSampleCap,
    #[error("slope window must be at least 2, got {0}")]
    WindowTooSmall(u64),
    #[error("kappa estimator window must be at least 2")]
    ZeroKappaWindow,
    #[error("unknown optimizer '{0}' (expected prs, lipo, lipo+, adalipo, adalipo+, adalipo+ns)")]
    UnknownOptimizer(String),
    #[error(transparent)]
    Lipschitz(#[from] LipschitzError),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

/// The members of the optimizer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "prs")]
    Prs,
    #[serde(rename = "lipo")]
    Lipo,
    #[serde(rename = "lipo+")]
    LipoPlus,
    #[serde(rename = "adalipo")]
    AdaLipo,
    #[serde(rename = "adalipo+")]
    AdaLipoPlus,
    #[serde(rename = "adalipo+ns")]
    AdaLipoPlusNs,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Prs,
        OptimizerKind::Lipo,
        OptimizerKind::LipoPlus,
        OptimizerKind::AdaLipo,
        OptimizerKind::AdaLipoPlus,
        OptimizerKind::AdaLipoPlusNs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Prs => "prs",
            OptimizerKind::Lipo => "lipo",
            OptimizerKind::LipoPlus => "lipo+",
            OptimizerKind::AdaLipo => "adalipo",
            OptimizerKind::AdaLipoPlus => "adalipo+",
            OptimizerKind::AdaLipoPlusNs => "adalipo+ns",
        }
    }

    pub fn parse(name: &str) -> Result<Self, OptimError> {
        match name.to_ascii_lowercase().as_str() {
            "prs" => Ok(OptimizerKind::Prs),
            "lipo" => Ok(OptimizerKind::Lipo),
            "lipo+" | "lipo-plus" => Ok(OptimizerKind::LipoPlus),
            "adalipo" => Ok(OptimizerKind::AdaLipo),
            "adalipo+" | "adalipo-plus" => Ok(OptimizerKind::AdaLipoPlus),
            "adalipo+ns" | "adalipo+|ns" | "adalipo-plus-ns" => Ok(OptimizerKind::AdaLipoPlusNs),
            other => Err(OptimError::UnknownOptimizer(other.to_string())),
        }
    }

    /// True for the variants that estimate kappa online.
    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            OptimizerKind::AdaLipo | OptimizerKind::AdaLipoPlus | OptimizerKind::AdaLipoPlusNs
        )
    }

    /// True for the variants that require a known Lipschitz constant.
    pub fn needs_kappa(self) -> bool {
        matches!(self, OptimizerKind::Lipo | OptimizerKind::LipoPlus)
    }

    /// The window-slope stopping rule only applies to the `+` variants
    /// (and not to the no-stopping `adalipo+ns`).
    pub fn has_slope_rule(self) -> bool {
        matches!(self, OptimizerKind::LipoPlus | OptimizerKind::AdaLipoPlus)
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which optimizer to run and with which hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Known Lipschitz constant; required for `lipo` and `lipo+`.
    pub kappa: Option<f64>,
    /// Fixed exploration probability; required for `adalipo`.
    pub p_fixed: Option<f64>,
    /// Grid ratio of the kappa estimator.
    pub alpha: f64,
    /// Memory of the kappa estimator. `Global` keeps every observed slope
    /// (the closed-form estimate); `adalipo+ns` defaults to `LastRatio` so
    /// the estimate tracks the region currently being exploited.
    pub kappa_memory: KappaMemory,
}

/// How much history the adaptive Lipschitz estimate remembers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaMemory {
    /// Maximum slope over every pair of evaluations.
    Global,
    /// Maximum pairwise slope among the last `n` evaluations.
    Window(usize),
    /// The newest evaluation's maximum slope against all earlier points.
    LastRatio,
}

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_P_FIXED: f64 = 0.1;

impl OptimizerSpec {
    pub fn prs() -> Self {
        Self::bare(OptimizerKind::Prs)
    }

    pub fn lipo(kappa: f64) -> Self {
        Self {
            kappa: Some(kappa),
            ..Self::bare(OptimizerKind::Lipo)
        }
    }

    pub fn lipo_plus(kappa: f64) -> Self {
        Self {
            kappa: Some(kappa),
            ..Self::bare(OptimizerKind::LipoPlus)
        }
    }

    pub fn adalipo(p_fixed: f64) -> Self {
        Self {
            p_fixed: Some(p_fixed),
            ..Self::bare(OptimizerKind::AdaLipo)
        }
    }

    pub fn adalipo_plus() -> Self {
        Self::bare(OptimizerKind::AdaLipoPlus)
    }

    pub fn adalipo_plus_ns() -> Self {
        Self {
            kappa_memory: KappaMemory::LastRatio,
            ..Self::bare(OptimizerKind::AdaLipoPlusNs)
        }
    }

    fn bare(kind: OptimizerKind) -> Self {
        Self {
            kind,
            kappa: None,
            p_fixed: None,
            alpha: DEFAULT_ALPHA,
            kappa_memory: KappaMemory::Global,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.alpha <= 0.0 {
            return Err(OptimError::InvalidAlpha(self.alpha));
        }
        if self.kind.needs_kappa() {
            match self.kappa {
                None => return Err(OptimError::MissingKappa(self.kind)),
                Some(k) if k < 0.0 => return Err(OptimError::InvalidKappa(k)),
                _ => {}
            }
        }
        if matches!(self.kappa_memory, KappaMemory::Window(w) if w < 2) {
            return Err(OptimError::ZeroKappaWindow);
        }
        if self.kind == OptimizerKind::AdaLipo {
            match self.p_fixed {
                None => return Err(OptimError::MissingExplorationProbability),
                Some(p) if !(p > 0.0 && p <= 1.0) => {
                    return Err(OptimError::InvalidExplorationProbability(p))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

pub const DEFAULT_SAMPLE_CAP: u64 = 100_000_000;
pub const DEFAULT_SLOPE_THRESHOLD: f64 = 600.0;
pub const DEFAULT_SLOPE_WINDOW: u64 = 5;

/// Termination conditions, checked in the order target, slope, budget after
/// every evaluation; the sample cap is checked on every candidate draw.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    /// Maximum number of function evaluations.
    pub budget: Option<u64>,
    /// Hard cap on total candidate samples; guards against the acceptance
    /// region becoming vanishingly small with only an evaluation budget set.
    pub sample_cap: u64,
    /// Window size of the slope rule.
    pub slope_window: Option<u64>,
    /// Slope threshold (candidate samples per evaluation over the window).
    pub slope_threshold: Option<f64>,
    /// Stop once the running maximum reaches this value.
    pub target_value: Option<f64>,
}

impl StoppingRule {
    /// Budget-only rule with the default sample cap.
    pub fn budget(budget: u64) -> Self {
        Self {
            budget: Some(budget),
            sample_cap: DEFAULT_SAMPLE_CAP,
            slope_window: None,
            slope_threshold: None,
            target_value: None,
        }
    }

    /// Budget plus the window-slope rule.
    pub fn budget_with_slope(budget: u64, window: u64, threshold: f64) -> Self {
        Self {
            slope_window: Some(window),
            slope_threshold: Some(threshold),
            ..Self::budget(budget)
        }
    }

    /// Target-value rule with no evaluation budget (sample cap as safety).
    pub fn target(target_value: f64) -> Self {
        Self {
            budget: None,
            sample_cap: DEFAULT_SAMPLE_CAP,
            slope_window: None,
            slope_threshold: None,
            target_value: Some(target_value),
        }
    }

    pub fn with_sample_cap(mut self, cap: u64) -> Self {
        self.sample_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if self.sample_cap == 0 {
            return Err(OptimError::ZeroSampleCap);
        }
        if let Some(w) = self.slope_window {
            if w < 2 {
                return Err(OptimError::WindowTooSmall(w));
            }
        }
        Ok(())
    }
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Slope,
    Target,
    SampleCap,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Budget => "budget",
            StopReason::Slope => "slope",
            StopReason::Target => "target",
            StopReason::SampleCap => "sample_cap",
        })
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: EvaluatedPoint,
    pub n_evals: u64,
    pub n_samples: u64,
    pub stop_reason: StopReason,
    pub trace: RunTrace,
    /// Final Lipschitz constant: the estimate for adaptive kinds, the given
    /// constant for `lipo`/`lipo+`, absent for PRS.
    pub kappa_final: Option<f64>,
}

/// Probability of entering the exploration state at iteration `t`
/// (`t` = number of evaluations so far): `min(1, 1/ln t)` with `p(1) = 1`.
pub fn exploration_probability(t: u64) -> f64 {
    assert!(t >= 1, "exploration_probability requires t >= 1");
    if t == 1 {
        1.0
    } else {
        (1.0 / (t as f64).ln()).min(1.0)
    }
}

/// True once the samples-vs-evaluations curve grows faster than `threshold`
/// candidates per evaluation over the last `w` evaluations.
pub fn slope_triggered(trace: &RunTrace, w: u64, threshold: f64) -> bool {
    let rows = trace.rows();
    let w_usize = w as usize;
    if rows.len() < w_usize + 1 {
        return false;
    }
    let last = rows[rows.len() - 1].cumulative_samples;
    let first = rows[rows.len() - 1 - w_usize].cumulative_samples;
    (last - first) as f64 / w as f64 > threshold
}

/// Mid-streak form of the slope rule: the inequality that
/// [`slope_triggered`] will report once the in-progress evaluation lands is
/// already decided by the samples consumed so far (cumulative samples only
/// grow), so a hopeless rejection streak can be cut short instead of running
/// to the sample cap.
fn slope_pending(trace: &RunTrace, n_samples_now: u64, w: u64, threshold: f64) -> bool {
    let rows = trace.rows();
    let w_usize = w as usize;
    if rows.len() < w_usize {
        return false;
    }
    let first = rows[rows.len() - w_usize].cumulative_samples;
    (n_samples_now - first) as f64 / w as f64 > threshold
}

fn check_after_eval(
    spec: &OptimizerSpec,
    stop: &StoppingRule,
    history: &History,
    trace: &RunTrace,
) -> Option<StopReason> {
    if let Some(target) = stop.target_value {
        if history.running_max().expect("non-empty history") >= target {
            return Some(StopReason::Target);
        }
    }
    if spec.kind.has_slope_rule() {
        if let (Some(w), Some(threshold)) = (stop.slope_window, stop.slope_threshold) {
            if slope_triggered(trace, w, threshold) {
                return Some(StopReason::Slope);
            }
        }
    }
    if let Some(budget) = stop.budget {
        if history.len() as u64 >= budget {
            return Some(StopReason::Budget);
        }
    }
    None
}

/// Executes one optimization run. See the module docs for the loop shape.
pub fn run(
    objective: &mut CountingObjective<'_>,
    spec: &OptimizerSpec,
    stop: &StoppingRule,
    rng: &mut RngStream,
) -> Result<RunResult, OptimError> {
    run_with_history(objective, spec, stop, rng).map(|(result, _)| result)
}

/// Like [`run`], but also hands back the full evaluation history (used by
/// the rejection-rate analysis, which probes the final acceptance region).
pub fn run_with_history(
    objective: &mut CountingObjective<'_>,
    spec: &OptimizerSpec,
    stop: &StoppingRule,
    rng: &mut RngStream,
) -> Result<(RunResult, History), OptimError> {
    spec.validate()?;
    stop.validate()?;
    let domain = objective.domain().clone();

    let mut history = History::new();
    let mut trace = RunTrace::new();
    let mut estimator = match spec.kappa_memory {
        KappaMemory::Global => KappaEstimator::new(spec.alpha)?,
        KappaMemory::Window(w) => KappaEstimator::windowed(spec.alpha, w)?,
        KappaMemory::LastRatio => KappaEstimator::last_ratio(spec.alpha)?,
    };
    let mut n_samples: u64 = 0;

    let draw = |objective: &mut CountingObjective<'_>,
                    rng: &mut RngStream,
                    n_samples: &mut u64|
     -> Option<Point> {
        if *n_samples >= stop.sample_cap {
            return None;
        }
        *n_samples += 1;
        objective.note_sample();
        Some(domain.sample_uniform(rng))
    };

    // first point, evaluated unconditionally
    let stop_reason = {
        let x = draw(objective, rng, &mut n_samples).expect("sample_cap >= 1 validated");
        {
            let value = objective.eval(&x);
            history.push(EvaluatedPoint { point: x, value })?;
            if spec.kind.is_adaptive() {
                estimator.observe_last(&history);
            }
            trace.push(1, n_samples, value);
            let mut reason = check_after_eval(spec, stop, &history, &trace);
            while reason.is_none() {
                let t = history.len() as u64;
                // rejection-samples until acceptance, cutting the streak
                // short if the slope rule is armed and already decided
                let filtered = |history: &History,
                                    trace: &RunTrace,
                                    kappa: f64,
                                    objective: &mut CountingObjective<'_>,
                                    rng: &mut RngStream,
                                    n_samples: &mut u64|
                 -> Result<Point, StopReason> {
                    let slope_armed = spec.kind.has_slope_rule();
                    loop {
                        match draw(objective, rng, n_samples) {
                            None => break Err(StopReason::SampleCap),
                            Some(x) => {
                                if accept_unchecked(&x, history, kappa) {
                                    break Ok(x);
                                }
                                if slope_armed {
                                    if let (Some(w), Some(threshold)) =
                                        (stop.slope_window, stop.slope_threshold)
                                    {
                                        if slope_pending(trace, *n_samples, w, threshold) {
                                            break Err(StopReason::Slope);
                                        }
                                    }
                                }
                            }
                        }
                    }
                };
                let next = match spec.kind {
                    OptimizerKind::Prs => draw(objective, rng, &mut n_samples)
                        .ok_or(StopReason::SampleCap),
                    OptimizerKind::Lipo | OptimizerKind::LipoPlus => {
                        let kappa = spec.kappa.expect("validated");
                        filtered(&history, &trace, kappa, objective, rng, &mut n_samples)
                    }
                    OptimizerKind::AdaLipo
                    | OptimizerKind::AdaLipoPlus
                    | OptimizerKind::AdaLipoPlusNs => {
                        let p = if spec.kind == OptimizerKind::AdaLipo {
                            spec.p_fixed.expect("validated")
                        } else {
                            exploration_probability(t)
                        };
                        // One Bernoulli variate per iteration, drawn (and
                        // ignored) even while exploration is forced, so the
                        // streams of all adaptive variants stay alignable.
                        let coin = rng.gen_unit();
                        let explore = history.len() < 2 || coin < p;
                        if explore {
                            draw(objective, rng, &mut n_samples).ok_or(StopReason::SampleCap)
                        } else {
                            let kappa_hat = estimator.estimate().value;
                            filtered(&history, &trace, kappa_hat, objective, rng, &mut n_samples)
                        }
                    }
                };
                match next {
                    Err(r) => {
                        reason = Some(r);
                    }
                    Ok(x) => {
                        let value = objective.eval(&x);
                        history.push(EvaluatedPoint { point: x, value })?;
                        if spec.kind.is_adaptive() {
                            estimator.observe_last(&history);
                        }
                        trace.push(
                            history.len() as u64,
                            n_samples,
                            history.running_max().expect("non-empty"),
                        );
                        reason = check_after_eval(spec, stop, &history, &trace);
                    }
                }
            }
            reason.expect("loop exits with a reason")
        }
    };

    debug_assert!(trace.validate().is_ok());
    debug_assert_eq!(objective.eval_count(), history.len() as u64);
    let kappa_final = if spec.kind.is_adaptive() {
        Some(estimator.estimate().value)
    } else {
        spec.kappa
    };
    let best = history.best().cloned().expect("at least one evaluation");
    let result = RunResult {
        best,
        n_evals: history.len() as u64,
        n_samples,
        stop_reason,
        trace,
        kappa_final,
    };
    Ok((result, history))
}
