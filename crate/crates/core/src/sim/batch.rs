use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{median, BatchSummary, RunTrace};
use super::{run, Scenario};
use crate::error::Result;

pub struct MonteCarloResult {
    pub traces: Vec<RunTrace>,
    pub summary: BatchSummary,
}

/// Runs `n_runs` independent replicates in parallel with seeds
/// `base_seed, base_seed + 1, …`. Results are ordered by seed.
pub fn monte_carlo(scenario: &Scenario, n_runs: usize, base_seed: u64) -> Result<MonteCarloResult> {
    scenario.validate()?;
    let traces = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| run(scenario, base_seed.wrapping_add(r)))
        .collect::<Result<Vec<_>>>()?;
    let summary = BatchSummary::from_runs(traces.iter().map(RunTrace::summary).collect())?;
    Ok(MonteCarloResult { traces, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpenseComparison {
    pub seeds: Vec<u64>,
    pub expense_a: Vec<f64>,
    pub expense_b: Vec<f64>,
    /// Per seed `expense_a / expense_b`.
    pub ratios: Vec<f64>,
    pub median_ratio: f64,
}

/// Cumulative expense of two scenarios under common seeds (so both see the
/// same Θ when it is drawn from the seed).
pub fn compare_expenses(a: &Scenario, b: &Scenario, n_runs: usize, base_seed: u64) -> Result<ExpenseComparison> {
    let pairs = (0..n_runs as u64)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed.wrapping_add(r);
            Ok((seed, run(a, seed)?.cumulative_expense(), run(b, seed)?.cumulative_expense()))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = pairs.iter().map(|&(_, ea, eb)| ea / eb).collect();
    Ok(ExpenseComparison {
        seeds: pairs.iter().map(|p| p.0).collect(),
        expense_a: pairs.iter().map(|p| p.1).collect(),
        expense_b: pairs.iter().map(|p| p.2).collect(),
        median_ratio: median(&ratios),
        ratios,
    })
}
