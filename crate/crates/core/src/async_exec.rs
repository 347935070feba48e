//! Asynchronous construction of the primary matrix when some bins cannot
//! use their local information at a time instant.
//!
//! A bin that is not ready keeps every agent in place. A ready bin keeps its
//! usual transition probabilities towards ready neighbours, drops those
//! towards unready ones, and folds the dropped mass onto its diagonal. Flow
//! across the ready/unready boundary is therefore zero in both directions,
//! which preserves detailed balance and hence stationarity of Θ.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::guidance::REQUIREMENT_TOL;
use crate::topology::{BinTopology, DesiredDistribution};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadinessMask {
    ready: Vec<bool>,
}

impl ReadinessMask {
    pub fn new(ready: Vec<bool>) -> Self {
        ReadinessMask { ready }
    }

    pub fn all_ready(n_bins: usize) -> Self {
        ReadinessMask {
            ready: vec![true; n_bins],
        }
    }

    pub fn none_ready(n_bins: usize) -> Self {
        ReadinessMask {
            ready: vec![false; n_bins],
        }
    }

    /// Blocks `round(fraction · n_bins)` bins chosen uniformly at random.
    pub fn random_blocked<R: Rng + ?Sized>(n_bins: usize, fraction: f64, rng: &mut R) -> Self {
        let n_blocked = ((fraction * n_bins as f64).round() as usize).min(n_bins);
        let mut ready = vec![true; n_bins];
        for b in sample(rng, n_bins, n_blocked) {
            ready[b] = false;
        }
        ReadinessMask { ready }
    }

    pub fn is_ready(&self, i: usize) -> bool {
        self.ready[i]
    }

    pub fn len(&self) -> usize {
        self.ready.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ready.is_empty()
    }

    pub fn n_blocked(&self) -> usize {
        self.ready.iter().filter(|r| !**r).count()
    }

    fn has_ready_neighbor(&self, topo: &BinTopology, i: usize) -> bool {
        topo.neighbors(i).iter().any(|&l| l != i && self.ready[l])
    }
}

/// Asynchronous primary row of bin `i`. `base` computes the synchronous row
/// and is only invoked when bin `i` is ready with at least one ready
/// neighbour.
pub fn async_primary_row<F>(base: F, mask: &ReadinessMask, i: usize, topo: &BinTopology) -> Vec<f64>
where
    F: FnOnce() -> Vec<f64>,
{
    let n = topo.n_bins();
    let mut row = vec![0.0; n];
    if !mask.is_ready(i) || !mask.has_ready_neighbor(topo, i) {
        row[i] = 1.0;
        return row;
    }
    let full = base();
    let mut off = 0.0;
    for &l in topo.neighbors(i) {
        if l != i && mask.is_ready(l) {
            row[l] = full[l];
            off += full[l];
        }
    }
    row[i] = 1.0 - off;
    row
}

pub fn async_primary_matrix(p: &DMatrix<f64>, mask: &ReadinessMask, topo: &BinTopology) -> DMatrix<f64> {
    let n = topo.n_bins();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let row = async_primary_row(|| p.row(i).iter().copied().collect(), mask, i, topo);
        for (l, v) in row.into_iter().enumerate() {
            out[(i, l)] = v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsyncReport {
    pub row_stochastic: bool,
    /// Positive diagonal, non-negative elsewhere.
    pub nonnegative_positive_diagonal: bool,
    /// Θ·P̄ = Θ within tolerance.
    pub stationary: bool,
    pub max_stationarity_gap: f64,
}

impl AsyncReport {
    pub fn all_passed(&self) -> bool {
        self.row_stochastic && self.nonnegative_positive_diagonal && self.stationary
    }
}

pub fn verify_async_properties(p: &DMatrix<f64>, theta: &DesiredDistribution) -> AsyncReport {
    let n = p.nrows();
    if p.ncols() != n || theta.len() != n {
        return AsyncReport {
            row_stochastic: false,
            nonnegative_positive_diagonal: false,
            stationary: false,
            max_stationarity_gap: f64::INFINITY,
        };
    }
    let row_stochastic =
        (0..n).all(|i| (p.row(i).iter().sum::<f64>() - 1.0).abs() <= REQUIREMENT_TOL);
    let nonneg = (0..n).all(|i| {
        (0..n).all(|l| if i == l { p[(i, l)] > 0.0 } else { p[(i, l)] >= 0.0 })
    });
    let gap = (0..n)
        .map(|l| {
            let s: f64 = (0..n).map(|i| theta[i] * p[(i, l)]).sum();
            (s - theta[l]).abs()
        })
        .fold(0.0, f64::max);
    AsyncReport {
        row_stochastic,
        nonnegative_positive_diagonal: nonneg,
        stationary: gap <= REQUIREMENT_TOL,
        max_stationarity_gap: gap,
    }
}

/// Tracks whether the union of ready-induced communication graphs over
/// consecutive fixed-length windows connects every bin.
#[derive(Debug, Clone)]
pub struct WindowMonitor {
    window: usize,
    n_bins: usize,
    union: Vec<bool>,
    filled: usize,
    pub windows_total: usize,
    pub windows_connected: usize,
}

impl WindowMonitor {
    pub fn new(n_bins: usize, window: usize) -> Self {
        WindowMonitor {
            window: window.max(1),
            n_bins,
            union: vec![false; n_bins * n_bins],
            filled: 0,
            windows_total: 0,
            windows_connected: 0,
        }
    }

    pub fn record(&mut self, mask: &ReadinessMask, topo: &BinTopology) {
        for (i, l) in topo.directed_edges() {
            if mask.is_ready(i) && mask.is_ready(l) {
                self.union[i * self.n_bins + l] = true;
            }
        }
        self.filled += 1;
        if self.filled == self.window {
            self.windows_total += 1;
            if self.union_connected() {
                self.windows_connected += 1;
            }
            self.union.iter_mut().for_each(|e| *e = false);
            self.filled = 0;
        }
    }

    fn union_connected(&self) -> bool {
        let n = self.n_bins;
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (v, edge) in self.union[u * n..(u + 1) * n].iter().enumerate() {
                if *edge && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
