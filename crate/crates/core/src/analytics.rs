//! Statistics over completed runs: extremal draw-downs/ups, autocorrelation,
//! kurtosis, histograms, and the bundled per-run summary.
//!
//! Everything operates on the post burn-in segment handed to it; the fallible
//! primitives reject empty or constant input, while `RunStatistics` maps a
//! degenerate (constant-return) run to zero statistics so inert markets still
//! summarize cleanly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigError;
use crate::sim::StepRecord;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("empty series")]
    EmptySeries,
    #[error("constant series has no correlation structure")]
    ConstantSeries,
    #[error("series too short: {got} points for max_lag {max_lag} (need > 4*max_lag)")]
    TooShort { got: usize, max_lag: usize },
}

/// Largest cumulative loss and gain over runs of same-signed returns.
///
/// A run is a maximal block of strictly negative (or strictly positive)
/// returns; zeros terminate runs. Returns `(max_drawdown, max_drawup)` with
/// `max_drawdown <= 0 <= max_drawup`; a series without negative (positive)
/// returns reports 0 for that side.
pub fn extremal_runs(returns: &[f64]) -> Result<(f64, f64), AnalyticsError> {
    if returns.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    debug_assert!(returns.iter().all(|r| r.is_finite()));
    let mut max_drawdown = 0.0f64;
    let mut max_drawup = 0.0f64;
    let mut run = 0.0f64;
    for &r in returns {
        if r > 0.0 {
            run = if run > 0.0 { run + r } else { r };
            max_drawup = max_drawup.max(run);
        } else if r < 0.0 {
            run = if run < 0.0 { run + r } else { r };
            max_drawdown = max_drawdown.min(run);
        } else {
            run = 0.0;
        }
    }
    Ok((max_drawdown, max_drawup))
}

/// Sample autocorrelation at lags 0..=max_lag with the biased (1/n)
/// normalizer: rho(l) = sum_t (x_t - m)(x_{t+l} - m) / sum_t (x_t - m)^2.
/// rho(0) is 1 by construction. Needs more than 4*max_lag points.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>, AnalyticsError> {
    if series.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    if series.len() <= 4 * max_lag {
        return Err(AnalyticsError::TooShort { got: series.len(), max_lag });
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let denom: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    if denom == 0.0 {
        return Err(AnalyticsError::ConstantSeries);
    }
    let mut acf = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut num = 0.0;
        for t in 0..n - lag {
            num += (series[t] - mean) * (series[t + lag] - mean);
        }
        acf.push(num / denom);
    }
    Ok(acf)
}

/// Fourth standardized moment minus 3, with population (1/n) moments.
/// A gaussian scores 0; the two-point distribution at +-1 scores exactly -2.
pub fn excess_kurtosis(series: &[f64]) -> Result<f64, AnalyticsError> {
    if series.len() < 2 {
        return Err(AnalyticsError::EmptySeries);
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(AnalyticsError::ConstantSeries);
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Equal-width histogram bins over [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl BinSpec {
    pub fn validate(&self, field: &'static str) -> Result<(), ConfigError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(ConfigError::invalid(
                field,
                format!("bin range must be finite with lo < hi, got [{}, {})", self.lo, self.hi),
            ));
        }
        if self.count == 0 {
            return Err(ConfigError::invalid(field, "need at least one bin".to_string()));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }
}

/// Bin masses normalized to total mass 1. Values outside [lo, hi) are clamped
/// into the first/last bin so the unit mass is exact and ensembles with the
/// same declared edges stay comparable.
pub fn histogram(values: &[f64], bins: &BinSpec) -> Result<Vec<f64>, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    debug_assert!(values.iter().all(|v| v.is_finite()));
    let width = bins.width();
    let mut mass = vec![0.0; bins.count];
    for &v in values {
        let idx = ((v - bins.lo) / width).floor().max(0.0) as usize;
        mass[idx.min(bins.count - 1)] += 1.0;
    }
    let total = values.len() as f64;
    for m in &mut mass {
        *m /= total;
    }
    Ok(mass)
}

/// Quantile by linear interpolation between order statistics, q in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> Result<f64, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

/// The network-mean trust column of a run.
pub fn mean_k_trace(records: &[StepRecord]) -> Vec<f64> {
    records.iter().map(|r| r.mean_k).collect()
}

/// Largest network-mean trust reached in the segment.
pub fn max_mean_k(records: &[StepRecord]) -> Result<f64, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptySeries);
    }
    Ok(records.iter().map(|r| r.mean_k).fold(f64::NEG_INFINITY, f64::max))
}

/// Which statistics to compute and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisOptions {
    /// Largest autocorrelation lag.
    pub max_lag: usize,
    /// Bin edges of the return histogram.
    pub return_bins: BinSpec,
    /// Bin edges of the network-mean trust histogram.
    pub mean_k_bins: BinSpec,
    pub include_acf: bool,
    pub include_histograms: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            max_lag: 50,
            return_bins: BinSpec { lo: -0.1, hi: 0.1, count: 101 },
            mean_k_bins: BinSpec { lo: -0.25, hi: 1.25, count: 150 },
            include_acf: true,
            include_histograms: true,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_lag == 0 {
            return Err(ConfigError::invalid("analysis.max_lag", "must be >= 1".to_string()));
        }
        self.return_bins.validate("analysis.return_bins")?;
        self.mean_k_bins.validate("analysis.mean_k_bins")?;
        Ok(())
    }
}

/// Summary of one run, computed on its post burn-in segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStatistics {
    pub max_mean_k: f64,
    pub max_drawdown: f64,
    pub max_drawup: f64,
    pub excess_kurtosis: f64,
    /// rho(0..=max_lag) of returns; empty if disabled or degenerate.
    pub return_acf: Vec<f64>,
    /// rho(0..=max_lag) of absolute returns; empty if disabled or degenerate.
    pub vol_acf: Vec<f64>,
    pub return_histogram: Vec<f64>,
    pub mean_k_histogram: Vec<f64>,
}

impl RunStatistics {
    /// Drops the first `burn_in` records and summarizes the rest. The
    /// requested lag is shrunk to fit short runs; constant return series
    /// yield kurtosis 0 and empty ACFs ("zero statistics") instead of errors.
    pub fn from_records(
        records: &[StepRecord],
        burn_in: usize,
        opts: &AnalysisOptions,
    ) -> Result<Self, AnalyticsError> {
        if burn_in >= records.len() {
            return Err(AnalyticsError::EmptySeries);
        }
        let tail = &records[burn_in..];
        let returns: Vec<f64> = tail.iter().map(|r| r.ret).collect();
        let (max_drawdown, max_drawup) = extremal_runs(&returns)?;
        let top_k = max_mean_k(tail)?;
        let kurt = match excess_kurtosis(&returns) {
            Ok(k) => k,
            Err(AnalyticsError::ConstantSeries) | Err(AnalyticsError::EmptySeries) => 0.0,
            Err(e) => return Err(e),
        };
        let lag = opts.max_lag.min(returns.len().saturating_sub(1) / 4);
        let mut return_acf = Vec::new();
        let mut vol_acf = Vec::new();
        if opts.include_acf && lag >= 1 {
            match autocorrelation(&returns, lag) {
                Ok(acf) => return_acf = acf,
                Err(AnalyticsError::ConstantSeries) => {}
                Err(e) => return Err(e),
            }
            let abs: Vec<f64> = returns.iter().map(|r| r.abs()).collect();
            match autocorrelation(&abs, lag) {
                Ok(acf) => vol_acf = acf,
                Err(AnalyticsError::ConstantSeries) => {}
                Err(e) => return Err(e),
            }
        }
        let (return_histogram, mean_k_histogram) = if opts.include_histograms {
            (histogram(&returns, &opts.return_bins)?, histogram(&mean_k_trace(tail), &opts.mean_k_bins)?)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(RunStatistics {
            max_mean_k: top_k,
            max_drawdown,
            max_drawup,
            excess_kurtosis: kurt,
            return_acf,
            vol_acf,
            return_histogram,
            mean_k_histogram,
        })
    }
}
