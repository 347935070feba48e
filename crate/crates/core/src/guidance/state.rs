use crate::error::{GuidanceError, Result};
use crate::topology::{local_targets, BinTopology, DesiredDistribution};

/// Bin occupancy of every agent at one time instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwarmState {
    assignment: Vec<usize>,
    counts: Vec<usize>,
    step: u64,
}

impl SwarmState {
    pub fn new(n_bins: usize, assignment: Vec<usize>) -> Result<Self> {
        let mut counts = vec![0; n_bins];
        for &b in &assignment {
            if b >= n_bins {
                return Err(GuidanceError::BinOutOfRange { index: b, n_bins });
            }
            counts[b] += 1;
        }
        Ok(SwarmState {
            assignment,
            counts,
            step: 0,
        })
    }

    /// Every agent in `bin`.
    pub fn all_in(n_bins: usize, n_agents: usize, bin: usize) -> Result<Self> {
        Self::new(n_bins, vec![bin; n_agents])
    }

    /// Agents laid out bin by bin so that bin `i` holds `counts[i]` of them.
    pub fn from_counts(counts: &[usize]) -> Self {
        let assignment = counts
            .iter()
            .enumerate()
            .flat_map(|(b, &c)| std::iter::repeat_n(b, c))
            .collect();
        SwarmState {
            assignment,
            counts: counts.to_vec(),
            step: 0,
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn n_agents(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Global swarm distribution μ*.
    pub fn distribution(&self) -> Vec<f64> {
        let n = self.n_agents().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Replaces the assignment and advances the time instant.
    pub(crate) fn advance(&mut self, assignment: Vec<usize>) {
        debug_assert_eq!(assignment.len(), self.assignment.len());
        self.counts.iter_mut().for_each(|c| *c = 0);
        for &b in &assignment {
            self.counts[b] += 1;
        }
        self.assignment = assignment;
        self.step += 1;
    }
}

/// What agents in one bin know: their own and their neighbours' local
/// densities and local targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub bin: usize,
    pub local_density: f64,
    pub local_target: f64,
    /// No agent is present anywhere in the neighbourhood; `local_density` is 0.
    pub empty_neighborhood: bool,
    pub neighbors: Vec<usize>,
    pub neighbor_densities: Vec<f64>,
    pub neighbor_targets: Vec<f64>,
}

/// Local densities and targets of every bin for one count snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalField {
    pub density: Vec<f64>,
    pub target: Vec<f64>,
    pub empty: Vec<bool>,
}

impl LocalField {
    pub fn compute(counts: &[usize], topo: &BinTopology, targets: &[f64]) -> Self {
        let n = topo.n_bins();
        let mut density = vec![0.0; n];
        let mut empty = vec![false; n];
        for i in 0..n {
            let total: usize = topo.neighbors(i).iter().map(|&l| counts[l]).sum();
            if total == 0 {
                empty[i] = true;
            } else {
                density[i] = counts[i] as f64 / total as f64;
            }
        }
        LocalField {
            density,
            target: targets.to_vec(),
            empty,
        }
    }

    pub fn view(&self, topo: &BinTopology, i: usize) -> LocalView {
        let neighbors = topo.neighbors(i).to_vec();
        LocalView {
            bin: i,
            local_density: self.density[i],
            local_target: self.target[i],
            empty_neighborhood: self.empty[i],
            neighbor_densities: neighbors.iter().map(|&l| self.density[l]).collect(),
            neighbor_targets: neighbors.iter().map(|&l| self.target[l]).collect(),
            neighbors,
        }
    }
}

pub fn local_view(
    state: &SwarmState,
    topo: &BinTopology,
    theta: &DesiredDistribution,
    i: usize,
) -> Result<LocalView> {
    topo.check_bin(i)?;
    theta.check_len(topo.n_bins())?;
    if state.n_bins() != topo.n_bins() {
        return Err(GuidanceError::DimensionMismatch {
            expected: topo.n_bins(),
            got: state.n_bins(),
        });
    }
    let field = LocalField::compute(state.counts(), topo, &local_targets(topo, theta));
    Ok(field.view(topo, i))
}
