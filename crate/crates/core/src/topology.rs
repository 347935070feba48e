//! Bin environment: motion and communication constraints, neighbour sets,
//! path distances, and the rank diagnostic of the local-equilibrium matrix.
//!
//! Bins are indexed row-major over the grid. The communication matrix is
//! identical to the motion matrix: two bins are communicationally connected
//! exactly when agents may move between them within one time instant.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{GuidanceError, Result};

/// Tolerance on the sum of a desired distribution.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-12;

/// Relative singular-value cutoff used by [`b_matrix_rank`].
pub const RANK_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BinTopology {
    n_bins: usize,
    /// Motion constraint matrix A, row-major.
    motion: Vec<bool>,
    /// Minimum number of base-graph paths between bins; `u32::MAX` if unreachable.
    hop_dist: Vec<u32>,
    /// Ascending neighbour lists of C (always containing the bin itself).
    neighbors: Vec<Vec<usize>>,
    grid: Option<(usize, usize)>,
}

impl BinTopology {
    /// Rectangular grid with 4-neighbour paths. Agents may move to any bin
    /// at most `max_hops` paths away.
    pub fn grid(rows: usize, cols: usize, max_hops: u32) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols < 2 {
            return Err(GuidanceError::InvalidTopology(format!(
                "a {rows}x{cols} grid has fewer than two bins"
            )));
        }
        if max_hops == 0 {
            return Err(GuidanceError::param("max_hops", max_hops, "a positive integer"));
        }
        let n = rows * cols;
        let mut adjacency = vec![Vec::new(); n];
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    adjacency[i].push(i + 1);
                    adjacency[i + 1].push(i);
                }
                if r + 1 < rows {
                    adjacency[i].push(i + cols);
                    adjacency[i + cols].push(i);
                }
            }
        }
        let mut topo = Self::from_base_graph(n, &adjacency, max_hops)?;
        topo.grid = Some((rows, cols));
        Ok(topo)
    }

    /// Arbitrary undirected base graph given as an edge list. Motion is
    /// restricted to single edges.
    pub fn from_edges(n_bins: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_bins < 2 {
            return Err(GuidanceError::InvalidTopology(format!(
                "{n_bins} bins: at least two are required"
            )));
        }
        let mut adjacency = vec![Vec::new(); n_bins];
        for &(a, b) in edges {
            for idx in [a, b] {
                if idx >= n_bins {
                    return Err(GuidanceError::BinOutOfRange { index: idx, n_bins });
                }
            }
            if a == b {
                continue;
            }
            if !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        Self::from_base_graph(n_bins, &adjacency, 1)
    }

    fn from_base_graph(n: usize, adjacency: &[Vec<usize>], max_hops: u32) -> Result<Self> {
        let mut hop_dist = vec![u32::MAX; n * n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            let row = &mut hop_dist[src * n..(src + 1) * n];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(u) = queue.pop_front() {
                let du = row[u];
                for &v in &adjacency[u] {
                    if row[v] == u32::MAX {
                        row[v] = du + 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        if hop_dist.contains(&u32::MAX) {
            return Err(GuidanceError::InvalidTopology(
                "bins are not strongly connected".into(),
            ));
        }
        let motion: Vec<bool> = hop_dist.iter().map(|&d| d <= max_hops).collect();
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&l| motion[i * n + l]).collect())
            .collect();
        Ok(BinTopology {
            n_bins: n,
            motion,
            hop_dist,
            neighbors,
            grid: None,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// A[i,l].
    pub fn motion(&self, i: usize, l: usize) -> bool {
        self.motion[i * self.n_bins + l]
    }

    /// C[i,l]; equal to A[i,l].
    pub fn comm(&self, i: usize, l: usize) -> bool {
        self.motion(i, l)
    }

    /// Minimum number of base-graph paths from `i` to `l`.
    pub fn hop_dist(&self, i: usize, l: usize) -> u32 {
        self.hop_dist[i * self.n_bins + l]
    }

    /// Neighbour bins of `i` (including `i`), ascending.
    pub fn neighbor_set(&self, i: usize) -> Result<&[usize]> {
        self.check_bin(i)?;
        Ok(&self.neighbors[i])
    }

    /// Unchecked variant of [`neighbor_set`](Self::neighbor_set) for hot loops.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn check_bin(&self, i: usize) -> Result<()> {
        if i >= self.n_bins {
            return Err(GuidanceError::BinOutOfRange {
                index: i,
                n_bins: self.n_bins,
            });
        }
        Ok(())
    }

    /// Ordered off-diagonal C edges `(i, l)`, `i != l`.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_bins).flat_map(move |i| {
            self.neighbors[i]
                .iter()
                .copied()
                .filter(move |&l| l != i)
                .map(move |l| (i, l))
        })
    }

    /// Symmetric, unit-diagonal and strongly connected, checked from scratch.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_bins;
        for i in 0..n {
            if !self.motion(i, i) {
                return Err(GuidanceError::InvalidTopology(format!("A[{i},{i}] is zero")));
            }
            for l in 0..n {
                if self.motion(i, l) != self.motion(l, i) {
                    return Err(GuidanceError::InvalidTopology(format!(
                        "A is not symmetric at ({i},{l})"
                    )));
                }
                if self.hop_dist(i, l) != self.hop_dist(l, i) {
                    return Err(GuidanceError::InvalidTopology(format!(
                        "path distances are not symmetric at ({i},{l})"
                    )));
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(GuidanceError::InvalidTopology(
                "communication graph is not strongly connected".into(),
            ));
        }
        Ok(())
    }

    /// One `i l` pair per line for every undirected communication edge.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        for (i, l) in self.directed_edges().filter(|(i, l)| i < l) {
            let _ = writeln!(out, "{i} {l}");
        }
        out
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.edge_list())?;
        Ok(())
    }
}

/// Desired swarm distribution Θ: strictly positive and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredDistribution(Vec<f64>);

impl DesiredDistribution {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(GuidanceError::InvalidDistribution("empty vector".into()));
        }
        if let Some((i, v)) = theta
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0 && **v <= 1.0))
        {
            return Err(GuidanceError::InvalidDistribution(format!(
                "entry {i} = {v} is not in (0, 1]"
            )));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOL {
            return Err(GuidanceError::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(DesiredDistribution(theta))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    /// Normalises `n` i.i.d. uniform draws on (0, 1].
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let raw: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        Self::new(raw.into_iter().map(|v| v / sum).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_len(&self, n_bins: usize) -> Result<()> {
        if self.0.len() != n_bins {
            return Err(GuidanceError::DimensionMismatch {
                expected: n_bins,
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for DesiredDistribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Θ normalised over each bin's neighbourhood: Θ[i] / Σ_{l ∈ N(i)} Θ[l].
pub fn local_targets(topo: &BinTopology, theta: &DesiredDistribution) -> Vec<f64> {
    (0..topo.n_bins())
        .map(|i| {
            let denom: f64 = topo.neighbors(i).iter().map(|&l| theta[l]).sum();
            theta[i] / denom
        })
        .collect()
}

/// B = C − X with diag(X) = 1/Θ̄. Every bin count vector `n` with `n·B = 0`
/// has all local densities at their local targets.
pub fn b_matrix(topo: &BinTopology, theta: &DesiredDistribution) -> Result<DMatrix<f64>> {
    let n = topo.n_bins();
    theta.check_len(n)?;
    let targets = local_targets(topo, theta);
    Ok(DMatrix::from_fn(n, n, |i, l| {
        let c = if topo.comm(i, l) { 1.0 } else { 0.0 };
        if i == l {
            c - 1.0 / targets[i]
        } else {
            c
        }
    }))
}

/// Numerical rank of [`b_matrix`]: singular values above
/// `RANK_REL_TOL` times the largest one.
pub fn b_matrix_rank(topo: &BinTopology, theta: &DesiredDistribution) -> Result<usize> {
    let b = b_matrix(topo, theta)?;
    Ok(numerical_rank(&b, RANK_REL_TOL))
}

pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}
