//! Checks of the five requirements on a primary guidance matrix.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::topology::{BinTopology, DesiredDistribution};

/// Tolerance for row sums and detailed balance.
pub const REQUIREMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub passed: bool,
    /// First offending entry, if any.
    pub detail: Option<String>,
}

impl Check {
    fn pass() -> Self {
        Check {
            passed: true,
            detail: None,
        }
    }

    fn fail(detail: String) -> Self {
        Check {
            passed: false,
            detail: Some(detail),
        }
    }

    fn first_failure<I: IntoIterator<Item = Option<String>>>(items: I) -> Self {
        items
            .into_iter()
            .flatten()
            .next()
            .map_or_else(Check::pass, Check::fail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequirementReport {
    /// Row sums equal one and entries are non-negative.
    pub r1_stochastic: Check,
    /// Positive diagonal.
    pub r2_positive_diagonal: Check,
    /// Detailed balance with respect to Θ.
    pub r3_reversible: Check,
    /// Positive exactly on the off-diagonal communication edges.
    pub r4_irreducible: Check,
    /// `1 − P[i,i] ≤ ξ̄[i]` for every bin.
    pub r5_strict: Check,
    /// `1 − P[i,i] ≤ max_{l ∈ N(i)} ξ̄[l]`: the outflow vanishes once every
    /// gain in the neighbourhood does.
    pub r5_neighborhood: Check,
}

impl RequirementReport {
    pub fn r1_to_r4(&self) -> bool {
        self.r1_stochastic.passed
            && self.r2_positive_diagonal.passed
            && self.r3_reversible.passed
            && self.r4_irreducible.passed
    }

    pub fn all_strict(&self) -> bool {
        self.r1_to_r4() && self.r5_strict.passed
    }
}

// Negated comparisons make NaN entries fail.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate_requirements(
    p: &DMatrix<f64>,
    theta: &DesiredDistribution,
    topo: &BinTopology,
    xi: &[f64],
) -> RequirementReport {
    let n = topo.n_bins();
    if p.nrows() != n || p.ncols() != n || theta.len() != n || xi.len() != n {
        let msg = format!(
            "dimension mismatch: P {}x{}, theta {}, xi {}, topology {n}",
            p.nrows(),
            p.ncols(),
            theta.len(),
            xi.len()
        );
        let f = Check::fail(msg);
        return RequirementReport {
            r1_stochastic: f.clone(),
            r2_positive_diagonal: f.clone(),
            r3_reversible: f.clone(),
            r4_irreducible: f.clone(),
            r5_strict: f.clone(),
            r5_neighborhood: f,
        };
    }

    let r1 = Check::first_failure((0..n).map(|i| {
        let row = p.row(i);
        if let Some(l) = (0..n).find(|&l| !(row[l] >= 0.0)) {
            return Some(format!("P[{i},{l}] = {} is negative", row[l]));
        }
        let s: f64 = row.iter().sum();
        ((s - 1.0).abs() > REQUIREMENT_TOL).then(|| format!("row {i} sums to {s}"))
    }));

    let r2 = Check::first_failure(
        (0..n).map(|i| (!(p[(i, i)] > 0.0)).then(|| format!("P[{i},{i}] = {}", p[(i, i)]))),
    );

    let r3 = Check::first_failure((0..n).flat_map(|i| (i + 1..n).map(move |l| (i, l))).map(
        |(i, l)| {
            let gap = (theta[i] * p[(i, l)] - theta[l] * p[(l, i)]).abs();
            (gap > REQUIREMENT_TOL).then(|| format!("detailed balance gap {gap:e} at ({i},{l})"))
        },
    ));

    let r4 = Check::first_failure((0..n).flat_map(|i| (0..n).map(move |l| (i, l))).map(
        |(i, l)| {
            if i == l {
                return None;
            }
            let v = p[(i, l)];
            match topo.comm(i, l) {
                true if !(v > 0.0) => Some(format!("P[{i},{l}] = {v} on a communication edge")),
                false if v != 0.0 => Some(format!("P[{i},{l}] = {v} off the communication graph")),
                _ => None,
            }
        },
    ));

    let r5 = Check::first_failure((0..n).map(|i| {
        let out = 1.0 - p[(i, i)];
        (out > xi[i] + REQUIREMENT_TOL).then(|| format!("bin {i}: outflow {out:e} exceeds gain {:e}", xi[i]))
    }));

    let r5n = Check::first_failure((0..n).map(|i| {
        let out = 1.0 - p[(i, i)];
        let bound = topo
            .neighbors(i)
            .iter()
            .map(|&l| xi[l])
            .fold(0.0_f64, f64::max);
        (out > bound + REQUIREMENT_TOL).then(|| format!("bin {i}: outflow {out:e} exceeds neighbourhood gain {bound:e}"))
    }));

    RequirementReport {
        r1_stochastic: r1,
        r2_positive_diagonal: r2,
        r3_reversible: r3,
        r4_irreducible: r4,
        r5_strict: r5,
        r5_neighborhood: r5n,
    }
}
