//! Ensembles and parameter sweeps, regime-transition detection on sweep
//! curves, and scripted news-streak scenarios.
//!
//! Sweeps run realizations in parallel and can journal each finished
//! realization to an append-only CSV, so an interrupted sweep resumes
//! without recomputing. Realization `i` of every grid point uses seed
//! `seed_base + i`, which keeps ensembles extensible and makes paired
//! comparisons across grid points share their noise.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{extremal_runs, max_mean_k, AnalyticsError, RunStatistics};
use crate::config::ConfigError;
use crate::io::{self, ReadError};
use crate::news::{NewsSpec, ScriptedEntry};
use crate::params::ModelParams;
use crate::sim::{Simulation, StepRecord};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Journal(#[from] ReadError),
    #[error("cannot append to sweep journal: {0}")]
    JournalWrite(#[from] std::io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("transition curve needs at least 6 points, got {0}")]
    CurveTooShort(usize),
    #[error("transition curve x values must be strictly increasing")]
    CurveNotSorted,
    #[error("streak [{start}, {end}] must end before step {n_steps}")]
    StreakOutOfRange { start: usize, end: usize, n_steps: usize },
}

/// One full simulation plus its summary.
pub struct SingleRun {
    pub records: Vec<StepRecord>,
    pub stats: RunStatistics,
    pub cap_events: u64,
}

/// Run one simulation and summarize it.
pub fn run_single(
    params: &ModelParams,
    news: &NewsSpec,
    opts: &crate::analytics::AnalysisOptions,
) -> Result<SingleRun, ExperimentError> {
    let mut sim = Simulation::new(params, news)?;
    let records = sim.run();
    let stats = RunStatistics::from_records(&records, params.burn_in, opts)?;
    Ok(SingleRun { records, stats, cap_events: sim.cap_events() })
}

/// Model parameter a sweep axis can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    C1Max,
    C2Max,
    Alpha,
}

impl SweepParam {
    pub fn apply(self, params: &mut ModelParams, value: f64) {
        match self {
            SweepParam::C1Max => params.c1_max = value,
            SweepParam::C2Max => params.c2_max = value,
            SweepParam::Alpha => params.alpha = value,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::C1Max => "c1_max",
            SweepParam::C2Max => "c2_max",
            SweepParam::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// A one- or two-axis grid of parameter points, each run `n_realizations`
/// times with seeds `seed_base..seed_base + n_realizations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis1: SweepAxis,
    #[serde(default)]
    pub axis2: Option<SweepAxis>,
    pub n_realizations: usize,
    pub seed_base: u64,
}

impl SweepSpec {
    /// Checks the grid itself and every parameter set it induces.
    pub fn validate(&self, base: &ModelParams) -> Result<(), ConfigError> {
        if self.n_realizations == 0 {
            return Err(ConfigError::invalid("sweep.n_realizations", "must be >= 1".to_string()));
        }
        if self.axis1.values.is_empty() {
            return Err(ConfigError::invalid("sweep.axis1.values", "must not be empty".to_string()));
        }
        if let Some(axis2) = &self.axis2 {
            if axis2.values.is_empty() {
                return Err(ConfigError::invalid("sweep.axis2.values", "must not be empty".to_string()));
            }
            if axis2.param == self.axis1.param {
                return Err(ConfigError::invalid(
                    "sweep.axis2.param",
                    "both axes vary the same parameter".to_string(),
                ));
            }
        }
        for (a1, a2) in self.grid() {
            self.point_params(base, a1, a2, 0).validate()?;
        }
        Ok(())
    }

    /// Grid points in axis1-major order.
    pub fn grid(&self) -> Vec<(f64, Option<f64>)> {
        match &self.axis2 {
            None => self.axis1.values.iter().map(|&v| (v, None)).collect(),
            Some(axis2) => self
                .axis1
                .values
                .iter()
                .flat_map(|&a1| axis2.values.iter().map(move |&a2| (a1, Some(a2))))
                .collect(),
        }
    }

    /// The parameter set for one realization of one grid point.
    pub fn point_params(
        &self,
        base: &ModelParams,
        axis1: f64,
        axis2: Option<f64>,
        realization: usize,
    ) -> ModelParams {
        let mut params = base.clone();
        self.axis1.param.apply(&mut params, axis1);
        if let (Some(axis), Some(value)) = (&self.axis2, axis2) {
            axis.param.apply(&mut params, value);
        }
        params.seed = self.seed_base + realization as u64;
        params
    }
}

/// Per-realization summary kept by sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationStats {
    pub max_mean_k: f64,
    pub max_drawdown: f64,
    pub max_drawup: f64,
}

/// One journaled realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JournalRow {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub realization: usize,
    pub seed: u64,
    pub stats: RealizationStats,
}

impl JournalRow {
    fn key(&self) -> (u64, Option<u64>, usize) {
        (self.axis1.to_bits(), self.axis2.map(f64::to_bits), self.realization)
    }
}

/// Ensemble summary of one grid point. Means and standard deviations are
/// over completed realizations (sample standard deviation, n-1 normalizer).
#[derive(Debug, Clone, PartialEq)]
pub struct GridPointSummary {
    pub axis1: f64,
    pub axis2: Option<f64>,
    pub n_completed: usize,
    /// False when some realization failed twice and was skipped.
    pub complete: bool,
    pub mean_max_mean_k: f64,
    pub std_max_mean_k: f64,
    pub mean_max_drawdown: f64,
    pub std_max_drawdown: f64,
    pub mean_max_drawup: f64,
    pub std_max_drawup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<GridPointSummary>,
}

/// The realization sweeps run by default: one gaussian-news simulation,
/// summarized over its post burn-in segment.
pub fn default_realization(params: &ModelParams) -> RealizationStats {
    let mut sim = Simulation::new(params, &NewsSpec::Gaussian).expect("sweep params were validated");
    let records = sim.run();
    let tail = &records[params.burn_in..];
    let returns: Vec<f64> = tail.iter().map(|r| r.ret).collect();
    let (max_drawdown, max_drawup) = extremal_runs(&returns).expect("post burn-in segment is non-empty");
    let max_mean_k = max_mean_k(tail).expect("post burn-in segment is non-empty");
    RealizationStats { max_mean_k, max_drawdown, max_drawup }
}

/// Run (or resume) a sweep with the default realization runner.
///
/// `journal` is an append-only CSV of finished realizations; when it already
/// holds rows for this grid, those realizations are skipped. `workers = 0`
/// sizes the pool to the machine.
pub fn run_ensemble(
    base: &ModelParams,
    spec: &SweepSpec,
    journal: Option<&Path>,
    workers: usize,
) -> Result<SweepResult, ExperimentError> {
    run_ensemble_with(base, spec, journal, workers, default_realization)
}

/// As `run_ensemble`, with a caller-supplied realization runner. A panicking
/// realization is retried once; a second panic marks its grid point
/// incomplete rather than aborting the sweep.
pub fn run_ensemble_with<F>(
    base: &ModelParams,
    spec: &SweepSpec,
    journal: Option<&Path>,
    workers: usize,
    runner: F,
) -> Result<SweepResult, ExperimentError>
where
    F: Fn(&ModelParams) -> RealizationStats + Sync,
{
    base.validate()?;
    spec.validate(base)?;
    let grid = spec.grid();

    let mut prior: Vec<JournalRow> = match journal {
        Some(path) if path.exists() => io::read_journal(path)?,
        _ => Vec::new(),
    };
    let mut seen = HashSet::new();
    prior.retain(|row| seen.insert(row.key()));

    let mut jobs = Vec::new();
    for &(axis1, axis2) in &grid {
        for realization in 0..spec.n_realizations {
            let key = (axis1.to_bits(), axis2.map(f64::to_bits), realization);
            if !seen.contains(&key) {
                jobs.push((axis1, axis2, realization));
            }
        }
    }

    let writer = match journal {
        Some(path) => Some(Mutex::new(io::open_journal_appender(path)?)),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let fresh: Vec<JournalRow> = pool.install(|| {
        jobs.par_iter()
            .filter_map(|&(axis1, axis2, realization)| {
                let params = spec.point_params(base, axis1, axis2, realization);
                let stats = run_with_retry(&runner, &params, axis1, axis2, realization)?;
                let row = JournalRow { axis1, axis2, realization, seed: params.seed, stats };
                if let Some(writer) = &writer {
                    let mut guard = writer.lock().expect("journal writer lock");
                    if let Err(e) = io::append_journal_row(&mut *guard, &row) {
                        eprintln!("warning: journal append failed: {e}");
                    }
                }
                Some(row)
            })
            .collect()
    });

    prior.extend(fresh);
    Ok(aggregate(spec, &grid, prior))
}

fn run_with_retry<F>(
    runner: &F,
    params: &ModelParams,
    axis1: f64,
    axis2: Option<f64>,
    realization: usize,
) -> Option<RealizationStats>
where
    F: Fn(&ModelParams) -> RealizationStats + Sync,
{
    for attempt in 1..=2 {
        match catch_unwind(AssertUnwindSafe(|| runner(params))) {
            Ok(stats) => return Some(stats),
            Err(_) => eprintln!(
                "warning: realization {realization} at ({axis1}, {axis2:?}) panicked (attempt {attempt})"
            ),
        }
    }
    None
}

fn aggregate(spec: &SweepSpec, grid: &[(f64, Option<f64>)], mut rows: Vec<JournalRow>) -> SweepResult {
    // sort so the fold below is independent of completion order
    rows.sort_by_key(JournalRow::key);
    let points = grid
        .iter()
        .map(|&(axis1, axis2)| {
            let stats: Vec<RealizationStats> = rows
                .iter()
                .filter(|row| {
                    row.axis1.to_bits() == axis1.to_bits()
                        && row.axis2.map(f64::to_bits) == axis2.map(f64::to_bits)
                        && row.realization < spec.n_realizations
                })
                .map(|row| row.stats)
                .collect();
            let trust: Vec<f64> = stats.iter().map(|s| s.max_mean_k).collect();
            let down: Vec<f64> = stats.iter().map(|s| s.max_drawdown).collect();
            let up: Vec<f64> = stats.iter().map(|s| s.max_drawup).collect();
            let (mean_max_mean_k, std_max_mean_k) = mean_std(&trust);
            let (mean_max_drawdown, std_max_drawdown) = mean_std(&down);
            let (mean_max_drawup, std_max_drawup) = mean_std(&up);
            GridPointSummary {
                axis1,
                axis2,
                n_completed: stats.len(),
                complete: stats.len() == spec.n_realizations,
                mean_max_mean_k,
                std_max_mean_k,
                mean_max_drawdown,
                std_max_drawdown,
                mean_max_drawup,
                std_max_drawup,
            }
        })
        .collect();
    SweepResult { points }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Outcome of scanning a response curve for a sigmoid-like rise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransitionResult {
    Found { c1_star: f64, width: f64 },
    /// The curve never completes the quarter/mid/three-quarter crossings.
    NoTransition,
}

/// Locate a transition on a response curve of (x, y) points with strictly
/// increasing x. The low and high plateaus are estimated from the first and
/// last two points; `c1_star` is the linearly interpolated first crossing of
/// the plateau midpoint and `width` the x-distance between the 25% and 75%
/// crossings.
pub fn detect_transition(curve: &[(f64, f64)]) -> Result<TransitionResult, ExperimentError> {
    if curve.len() < 6 {
        return Err(ExperimentError::CurveTooShort(curve.len()));
    }
    if !curve.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(ExperimentError::CurveNotSorted);
    }
    let lo = (curve[0].1 + curve[1].1) / 2.0;
    let hi = (curve[curve.len() - 2].1 + curve[curve.len() - 1].1) / 2.0;
    if !(hi > lo) {
        return Ok(TransitionResult::NoTransition);
    }
    let cross = |level: f64| -> Option<f64> {
        if curve[0].1 >= level {
            return None;
        }
        for w in curve.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if y0 < level && y1 >= level {
                return Some(x0 + (level - y0) / (y1 - y0) * (x1 - x0));
            }
        }
        None
    };
    let q1 = cross(lo + 0.25 * (hi - lo));
    let mid = cross(lo + 0.5 * (hi - lo));
    let q3 = cross(lo + 0.75 * (hi - lo));
    match (q1, mid, q3) {
        (Some(x25), Some(x50), Some(x75)) => {
            Ok(TransitionResult::Found { c1_star: x50, width: x75 - x25 })
        }
        _ => Ok(TransitionResult::NoTransition),
    }
}

/// Diagnostics of the news-weight response to a scripted streak.
#[derive(Debug, Clone, PartialEq)]
pub struct StreakDiagnostics {
    pub streak_start: usize,
    /// Last streak step, inclusive.
    pub streak_end: usize,
    /// Whether |u| inside the response window beat the pre-streak maximum.
    pub responded: bool,
    pub baseline_abs_u: f64,
    pub peak_step: usize,
    pub peak_abs_u: f64,
    /// e-folding time in steps of the post-peak |u| decay, from a linear fit
    /// of ln |u|; NaN when fewer than 5 points qualified for the fit.
    pub efold_steps: f64,
    pub fit_points: usize,
}

/// Run one simulation whose news is the given scripted streak (gaussian
/// elsewhere) and measure the news-weight response.
pub fn scenario_streak(
    params: &ModelParams,
    streak: &ScriptedEntry,
) -> Result<(Vec<StepRecord>, StreakDiagnostics), ExperimentError> {
    let spec = NewsSpec::Scripted { entries: vec![streak.clone()] };
    spec.validate()?;
    let end = streak.start_step + streak.values.len() - 1;
    if end >= params.n_steps {
        return Err(ExperimentError::StreakOutOfRange {
            start: streak.start_step,
            end,
            n_steps: params.n_steps,
        });
    }
    let mut sim = Simulation::new(params, &spec)?;
    let records = sim.run();
    let diag = streak_diagnostics(&records, streak.start_step, end);
    Ok((records, diag))
}

/// Measure the |u| response to a streak over records that contain it.
///
/// The baseline is the largest |u| over the 100 steps before the streak; the
/// peak is searched from the streak start to 10 steps past its end. The decay
/// fit regresses ln |u| on the steps after the peak while |u| stays above
/// peak * e^-2, capped at 120 steps.
pub fn streak_diagnostics(records: &[StepRecord], start: usize, end: usize) -> StreakDiagnostics {
    assert!(start <= end && end < records.len(), "streak must lie inside the records");
    let baseline_abs_u = records[start.saturating_sub(100)..start]
        .iter()
        .map(|r| r.u.abs())
        .fold(0.0, f64::max);
    let window_hi = (end + 10).min(records.len() - 1);
    let (peak_step, peak_abs_u) = records[start..=window_hi]
        .iter()
        .map(|r| (r.t, r.u.abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("response window is non-empty");
    let responded = peak_abs_u > baseline_abs_u;

    let floor = peak_abs_u * (-2.0f64).exp();
    let fit_hi = (peak_step + 120).min(records.len() - 1);
    let mut steps = Vec::new();
    let mut log_u = Vec::new();
    if peak_step < fit_hi {
        for rec in &records[peak_step + 1..=fit_hi] {
            let a = rec.u.abs();
            if a < floor || a == 0.0 {
                break;
            }
            steps.push(rec.t as f64);
            log_u.push(a.ln());
        }
    }
    let fit_points = steps.len();
    let efold_steps = if fit_points >= 5 {
        let slope = linear_slope(&steps, &log_u);
        if slope < 0.0 {
            -1.0 / slope
        } else {
            f64::INFINITY
        }
    } else {
        f64::NAN
    };
    StreakDiagnostics {
        streak_start: start,
        streak_end: end,
        responded,
        baseline_abs_u,
        peak_step,
        peak_abs_u,
        efold_steps,
        fit_points,
    }
}

fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}
