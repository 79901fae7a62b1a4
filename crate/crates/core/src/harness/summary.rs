//! Cross-trial statistics and percentile bands.

use std::collections::BTreeMap;

use super::{Framework, StageRecord};
use crate::error::{BocoError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Per-trial averages over all stages and over stages `t ≥ T/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialStats {
    pub reward_full: f64,
    pub reward_half: f64,
    pub feas_full: f64,
    pub feas_half: f64,
    pub regret_first_half: f64,
    pub regret_second_half: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: usize,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryStats {
    pub framework: Framework,
    pub trials: usize,
    pub horizon: usize,
    pub per_trial: Vec<TrialStats>,
    pub reward_full: MeanStd,
    pub reward_half: MeanStd,
    pub feas_full: MeanStd,
    pub feas_half: MeanStd,
    pub reward_curve: Vec<CurvePoint>,
    pub feas_curve: Vec<CurvePoint>,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    MeanStd { mean: m, std: var.sqrt() }
}

/// Percentile with linear interpolation between closest ranks, `p ∈ [0, 100]`.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (rank - lo as f64) * (v[hi] - v[lo])
}

/// Time-averaged running mean `(1/(t+1)) Σ_{s ≤ t} v_s`.
pub fn running_average(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(t, v)| {
            acc += v;
            acc / (t + 1) as f64
        })
        .collect()
}

fn window_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn band(curves: &[Vec<f64>], horizon: usize) -> Vec<CurvePoint> {
    (0..horizon)
        .map(|t| {
            let col: Vec<f64> = curves.iter().map(|c| c[t]).collect();
            CurvePoint {
                t,
                mean: mean(&col),
                p10: percentile(&col, 10.0),
                p90: percentile(&col, 90.0),
            }
        })
        .collect()
}

/// Groups records by trial and computes the summary for one framework.
///
/// Every trial must cover the same stages `0..T`, in order.
pub fn summarize(records: &[StageRecord]) -> Result<SummaryStats> {
    let framework = records
        .first()
        .map(|r| r.framework)
        .ok_or_else(|| BocoError::Argument("no records to summarize".into()))?;
    let mut by_trial: BTreeMap<usize, Vec<&StageRecord>> = BTreeMap::new();
    for r in records {
        if r.framework != framework {
            return Err(BocoError::Argument("records mix frameworks".into()));
        }
        by_trial.entry(r.trial).or_default().push(r);
    }
    let horizon = by_trial.values().next().map_or(0, Vec::len);
    let mut per_trial = Vec::with_capacity(by_trial.len());
    let mut reward_curves = Vec::with_capacity(by_trial.len());
    let mut feas_curves = Vec::with_capacity(by_trial.len());
    for (trial, recs) in &by_trial {
        if recs.len() != horizon {
            return Err(BocoError::Argument(format!(
                "trial {trial} has {} stages, expected {horizon}",
                recs.len()
            )));
        }
        if recs.iter().enumerate().any(|(t, r)| r.t != t) {
            return Err(BocoError::Argument(format!("trial {trial} stages are not 0..{horizon} in order")));
        }
        let rewards: Vec<f64> = recs.iter().map(|r| r.reward).collect();
        let feas: Vec<f64> = recs.iter().map(|r| f64::from(u8::from(r.feasible))).collect();
        let regrets: Vec<f64> = recs.iter().map(|r| r.regret).collect();
        let half = horizon / 2;
        let rc = running_average(&rewards);
        let fc = running_average(&feas);
        per_trial.push(TrialStats {
            reward_full: rc.last().copied().unwrap_or(f64::NAN),
            reward_half: window_mean(&rewards[half..]),
            feas_full: fc.last().copied().unwrap_or(f64::NAN),
            feas_half: window_mean(&feas[half..]),
            regret_first_half: window_mean(&regrets[..half]),
            regret_second_half: window_mean(&regrets[half..]),
        });
        reward_curves.push(rc);
        feas_curves.push(fc);
    }
    let col = |f: fn(&TrialStats) -> f64| mean_std(&per_trial.iter().map(f).collect::<Vec<_>>());
    Ok(SummaryStats {
        framework,
        trials: per_trial.len(),
        horizon,
        reward_full: col(|s| s.reward_full),
        reward_half: col(|s| s.reward_half),
        feas_full: col(|s| s.feas_full),
        feas_half: col(|s| s.feas_half),
        reward_curve: band(&reward_curves, horizon),
        feas_curve: band(&feas_curves, horizon),
        per_trial,
    })
}
