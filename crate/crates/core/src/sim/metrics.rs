use serde::{Deserialize, Serialize};

use crate::error::{GuidanceError, Result};

/// D_H thresholds at which convergence times are reported.
pub const HELLINGER_THRESHOLDS: [f64; 11] =
    [0.30, 0.28, 0.26, 0.24, 0.22, 0.20, 0.18, 0.16, 0.14, 0.12, 0.10];

/// Hellinger distance `(1/√2)·‖√Θ − √μ‖₂`, clamped to [0, 1].
pub fn hellinger(theta: &[f64], mu: &[f64]) -> Result<f64> {
    if theta.len() != mu.len() {
        return Err(GuidanceError::DimensionMismatch {
            expected: theta.len(),
            got: mu.len(),
        });
    }
    let s: f64 = theta
        .iter()
        .zip(mu)
        .map(|(&t, &m)| (t.sqrt() - m.sqrt()).powi(2))
        .sum();
    Ok((s.sqrt() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
}

/// Metrics recorded after one time instant (or for the initial state at
/// step 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub hellinger: f64,
    pub transitioning_fraction: f64,
    pub cumulative_expense: f64,
    /// Largest realised number of agents over one ordered path.
    pub max_path_flux: u64,
    /// Largest expected flow `n[i]·P[i,l]` over ordered paths.
    pub max_prob_flux: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub config_digest: String,
    pub policy: String,
    pub n_agents: usize,
    pub n_bins: usize,
    pub theta: Vec<f64>,
    pub samples: Vec<StepMetrics>,
    /// Per step: number of ordered paths whose realised flow exceeded its cap.
    pub flux_exceedances: Vec<u32>,
    /// Number of ordered communication paths (denominator of exceedance rates).
    pub n_paths: usize,
    /// `(connected, total)` windows of the readiness monitor, if blocking was on.
    pub async_windows: Option<(usize, usize)>,
}

impl RunTrace {
    pub fn steps(&self) -> u64 {
        self.samples.last().map_or(0, |s| s.step)
    }

    pub fn initial_hellinger(&self) -> f64 {
        self.samples[0].hellinger
    }

    pub fn final_hellinger(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.hellinger)
    }

    pub fn hellinger_at(&self, step: u64) -> Option<f64> {
        self.samples.iter().find(|s| s.step == step).map(|s| s.hellinger)
    }

    /// First step at which D_H ≤ `threshold`.
    pub fn time_to(&self, threshold: f64) -> Option<u64> {
        self.samples
            .iter()
            .find(|s| s.hellinger <= threshold)
            .map(|s| s.step)
    }

    pub fn cumulative_expense(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.cumulative_expense)
    }

    /// Fraction of (step, path) samples whose realised flow exceeded the cap.
    pub fn exceedance_rate(&self) -> f64 {
        let total = self.flux_exceedances.len() * self.n_paths;
        if total == 0 {
            return 0.0;
        }
        self.flux_exceedances.iter().map(|&e| e as u64).sum::<u64>() as f64 / total as f64
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            seed: self.seed,
            config_digest: self.config_digest.clone(),
            policy: self.policy.clone(),
            steps: self.steps(),
            initial_hellinger: self.initial_hellinger(),
            final_hellinger: self.final_hellinger(),
            cumulative_expense: self.cumulative_expense(),
            threshold_times: HELLINGER_THRESHOLDS
                .iter()
                .map(|&t| ThresholdTime {
                    threshold: t,
                    step: self.time_to(t),
                })
                .collect(),
            max_prob_flux: self.samples.iter().map(|s| s.max_prob_flux).fold(0.0, f64::max),
            max_path_flux: self.samples.iter().map(|s| s.max_path_flux).max().unwrap_or(0),
            exceedance_rate: self.exceedance_rate(),
            async_windows: self.async_windows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTime {
    pub threshold: f64,
    pub step: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config_digest: String,
    pub policy: String,
    pub steps: u64,
    pub initial_hellinger: f64,
    pub final_hellinger: f64,
    pub cumulative_expense: f64,
    pub threshold_times: Vec<ThresholdTime>,
    pub max_prob_flux: f64,
    pub max_path_flux: u64,
    pub exceedance_rate: f64,
    pub async_windows: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Quantiles {
            q25: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q75: quantile_sorted(&v, 0.75),
        })
    }
}

/// Linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    Quantiles::of(values).map_or(f64::NAN, |q| q.median)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStat {
    pub threshold: f64,
    pub reached: usize,
    pub steps: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n_runs: usize,
    pub policy: String,
    pub config_digest: String,
    pub thresholds: Vec<ThresholdStat>,
    pub final_hellinger: Quantiles,
    pub cumulative_expense: Quantiles,
    pub runs: Vec<RunSummary>,
}

impl BatchSummary {
    pub fn from_runs(runs: Vec<RunSummary>) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| GuidanceError::Scenario("no runs to summarise".into()))?;
        let thresholds = HELLINGER_THRESHOLDS
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let steps: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r.threshold_times.get(k).and_then(|tt| tt.step))
                    .map(|s| s as f64)
                    .collect();
                ThresholdStat {
                    threshold: t,
                    reached: steps.len(),
                    steps: Quantiles::of(&steps),
                }
            })
            .collect();
        let finals: Vec<f64> = runs.iter().map(|r| r.final_hellinger).collect();
        let expenses: Vec<f64> = runs.iter().map(|r| r.cumulative_expense).collect();
        Ok(BatchSummary {
            n_runs: runs.len(),
            policy: first.policy.clone(),
            config_digest: first.config_digest.clone(),
            thresholds,
            final_hellinger: Quantiles::of(&finals).expect("non-empty"),
            cumulative_expense: Quantiles::of(&expenses).expect("non-empty"),
            runs,
        })
    }
}
