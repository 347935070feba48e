//! Agent-based execution of the decision loop: every agent reads the frozen
//! pre-step snapshot, composes its bin's decision row, and samples its next
//! bin from a private random stream.

mod batch;
mod io;
mod metrics;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::async_exec::{ReadinessMask, WindowMonitor};
use crate::config::GuidanceConfig;
use crate::error::{GuidanceError, Result};
use crate::guidance::{sample_weighted, secondary_weight, SwarmState};
use crate::policies::{PolicyContext, PolicyKind, Secondary, StepPolicy};
use crate::topology::{BinTopology, DesiredDistribution};

pub use batch::{compare_expenses, monte_carlo, ExpenseComparison, MonteCarloResult};
pub use io::{read_trace_csv, write_json, write_run_outputs, write_trace_csv, TRACE_CSV_HEADER};
pub use metrics::{
    hellinger, median, quantile_sorted, BatchSummary, Quantiles, RunSummary, RunTrace,
    StepMetrics, ThresholdStat, ThresholdTime, HELLINGER_THRESHOLDS,
};

const THETA_STREAM: u64 = u64::MAX;
const MASK_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaSource {
    /// Drawn from the run seed (or `theta_seed` when given).
    Random { theta_seed: Option<u64> },
    Fixed(DesiredDistribution),
}

/// Fully built description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topo: BinTopology,
    pub theta: ThetaSource,
    pub cfg: GuidanceConfig,
    pub policy: PolicyKind,
    pub n_agents: usize,
    pub start_bin: usize,
    /// Fraction of bins blocked at every time instant.
    pub blocking_fraction: f64,
    /// Window length of the readiness connectivity monitor.
    pub window: usize,
    pub n_steps: u64,
    /// Stop early once D_H falls to this value.
    pub stop_hellinger: Option<f64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.topo.check_bin(self.start_bin)?;
        if self.n_agents == 0 {
            return Err(GuidanceError::param("n_agents", 0, "at least one agent"));
        }
        if !(0.0..1.0).contains(&self.blocking_fraction) {
            return Err(GuidanceError::param(
                "blocking_fraction",
                self.blocking_fraction,
                "a fraction in [0, 1)",
            ));
        }
        if self.cfg.tau == 0.0 && !matches!(self.policy, PolicyKind::P2) {
            // k ≥ 1 and τ > 0 keep ω = exp(−τk)·G strictly below one.
            return Err(GuidanceError::param(
                "tau",
                0.0,
                "tau > 0 for policies with a secondary gain",
            ));
        }
        if let ThetaSource::Fixed(theta) = &self.theta {
            theta.check_len(self.topo.n_bins())?;
        }
        Ok(())
    }

    pub fn theta_for(&self, seed: u64) -> Result<DesiredDistribution> {
        match &self.theta {
            ThetaSource::Fixed(t) => Ok(t.clone()),
            ThetaSource::Random { theta_seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(theta_seed.unwrap_or(seed));
                rng.set_stream(THETA_STREAM);
                DesiredDistribution::random(self.topo.n_bins(), &mut rng)
            }
        }
    }

    /// SHA-256 over a canonical rendering of every parameter.
    pub fn digest(&self) -> String {
        let canonical = format!(
            "{:?}|{:?}|{:?}|{}|{}|{}|{}|{}|{:?}|{:?}",
            self.topo.edge_list(),
            self.theta,
            self.cfg,
            self.policy,
            self.n_agents,
            self.start_bin,
            self.blocking_fraction,
            self.window,
            self.n_steps,
            self.stop_hellinger
        );
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Random stream of one agent: the run seed with the agent id as stream.
pub fn agent_rng(seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64);
    rng
}

pub struct Simulation {
    ctx: PolicyContext,
    policy: PolicyKind,
    state: SwarmState,
    agent_rngs: Vec<ChaCha8Rng>,
    mask_rng: ChaCha8Rng,
    blocking_fraction: f64,
    monitor: Option<WindowMonitor>,
    trace: RunTrace,
    /// Realised per-path counts of the current step, indexed `i * n + l`.
    flux: Vec<u32>,
    touched: Vec<usize>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let theta = scenario.theta_for(seed)?;
        let ctx = PolicyContext::new(scenario.topo.clone(), theta, scenario.cfg.clone())?;
        let state = SwarmState::all_in(scenario.topo.n_bins(), scenario.n_agents, scenario.start_bin)?;
        let mut sim = Self::from_state(ctx, scenario.policy, state, seed, scenario.blocking_fraction)?;
        if scenario.blocking_fraction > 0.0 {
            sim.monitor = Some(WindowMonitor::new(scenario.topo.n_bins(), scenario.window));
        }
        sim.trace.config_digest = scenario.digest();
        Ok(sim)
    }

    pub fn from_state(
        ctx: PolicyContext,
        policy: PolicyKind,
        state: SwarmState,
        seed: u64,
        blocking_fraction: f64,
    ) -> Result<Self> {
        let n = ctx.n_bins();
        if state.n_bins() != n {
            return Err(GuidanceError::DimensionMismatch {
                expected: n,
                got: state.n_bins(),
            });
        }
        let agent_rngs = (0..state.n_agents()).map(|j| agent_rng(seed, j)).collect();
        let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
        mask_rng.set_stream(MASK_STREAM);
        let h0 = hellinger(ctx.theta.as_slice(), &state.distribution())?;
        let trace = RunTrace {
            seed,
            config_digest: String::new(),
            policy: policy.name().to_string(),
            n_agents: state.n_agents(),
            n_bins: n,
            theta: ctx.theta.as_slice().to_vec(),
            samples: vec![StepMetrics {
                step: state.step(),
                hellinger: h0,
                transitioning_fraction: 0.0,
                cumulative_expense: 0.0,
                max_path_flux: 0,
                max_prob_flux: 0.0,
            }],
            flux_exceedances: Vec::new(),
            n_paths: ctx.topo.directed_edges().count(),
            async_windows: None,
        };
        Ok(Simulation {
            ctx,
            policy,
            state,
            agent_rngs,
            mask_rng,
            blocking_fraction,
            monitor: None,
            trace,
            flux: vec![0; n * n],
            touched: Vec::new(),
        })
    }

    pub fn state(&self) -> &SwarmState {
        &self.state
    }

    pub fn context(&self) -> &PolicyContext {
        &self.ctx
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn into_trace(mut self) -> RunTrace {
        if let Some(m) = &self.monitor {
            self.trace.async_windows = Some((m.windows_connected, m.windows_total));
        }
        self.trace
    }

    /// Time instant entering `exp(−τk)` for the next decision; instants are
    /// counted from 1.
    fn time_instant(&self) -> u64 {
        self.state.step() + 1
    }

    fn decision_rows(&self, sp: &StepPolicy, only_occupied: bool) -> Result<Vec<Vec<(usize, f64)>>> {
        let n = self.ctx.n_bins();
        let k = self.time_instant();
        let counts = self.state.counts();
        (0..n)
            .map(|i| {
                if only_occupied && counts[i] == 0 {
                    return Ok(Vec::new());
                }
                let omega = secondary_weight(sp.secondary_gain[i], k, self.ctx.cfg.tau)?;
                let nbrs = self.ctx.topo.neighbors(i);
                let share = 1.0 / nbrs.len() as f64;
                Ok(nbrs
                    .iter()
                    .map(|&l| {
                        let s = match sp.secondary {
                            Secondary::Identity => (l == i) as u8 as f64,
                            Secondary::UniformNeighbors => share,
                        };
                        (l, (1.0 - omega) * sp.primary[(i, l)] + omega * s)
                    })
                    .collect())
            })
            .collect()
    }

    /// Full decision matrix M for the current snapshot, built without
    /// advancing the run.
    pub fn decision_matrix(&self, mask: Option<&ReadinessMask>) -> Result<DMatrix<f64>> {
        let sp = self.ctx.step_policy(self.policy, self.state.counts(), mask);
        let rows = self.decision_rows(&sp, false)?;
        let n = self.ctx.n_bins();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.into_iter().enumerate() {
            for (l, v) in row {
                m[(i, l)] = v;
            }
        }
        Ok(m)
    }

    pub fn step(&mut self) -> Result<StepMetrics> {
        let order: Vec<usize> = (0..self.state.n_agents()).collect();
        self.step_in_order(&order)
    }

    /// One time instant with agents visited in `order`. Every agent decides
    /// against the same snapshot, so the result does not depend on `order`.
    pub fn step_in_order(&mut self, order: &[usize]) -> Result<StepMetrics> {
        let n = self.ctx.n_bins();
        if order.len() != self.state.n_agents() {
            return Err(GuidanceError::DimensionMismatch {
                expected: self.state.n_agents(),
                got: order.len(),
            });
        }
        let mask = (self.blocking_fraction > 0.0)
            .then(|| ReadinessMask::random_blocked(n, self.blocking_fraction, &mut self.mask_rng));
        if let (Some(mask), Some(monitor)) = (&mask, &mut self.monitor) {
            monitor.record(mask, &self.ctx.topo);
        }
        let sp = self.ctx.step_policy(self.policy, self.state.counts(), mask.as_ref());
        let rows = self.decision_rows(&sp, true)?;

        let prev = self.state.assignment();
        let mut next = prev.to_vec();
        let mut moved = 0usize;
        let mut expense = 0.0;
        for &j in order {
            let from = prev[j];
            let u: f64 = self.agent_rngs[j].random();
            let to = sample_weighted(rows[from].iter().copied(), u);
            next[j] = to;
            if to != from {
                moved += 1;
                expense += self.ctx.expense.expense(from, to);
                let idx = from * n + to;
                if self.flux[idx] == 0 {
                    self.touched.push(idx);
                }
                self.flux[idx] += 1;
            }
        }

        let counts = self.state.counts();
        let mut max_prob_flux = 0.0_f64;
        for (i, l) in self.ctx.topo.directed_edges() {
            max_prob_flux = max_prob_flux.max(counts[i] as f64 * sp.primary[(i, l)]);
        }
        let mut max_path_flux = 0u32;
        let mut exceed = 0u32;
        for &idx in &self.touched {
            let f = self.flux[idx];
            max_path_flux = max_path_flux.max(f);
            if f as f64 > self.ctx.cfg.flux_caps.cap(idx / n, idx % n) {
                exceed += 1;
            }
            self.flux[idx] = 0;
        }
        self.touched.clear();

        let n_agents = self.state.n_agents();
        self.state.advance(next);
        let prev_expense = self.trace.samples.last().map_or(0.0, |s| s.cumulative_expense);
        let metrics = StepMetrics {
            step: self.state.step(),
            hellinger: hellinger(self.ctx.theta.as_slice(), &self.state.distribution())?,
            transitioning_fraction: if n_agents == 0 { 0.0 } else { moved as f64 / n_agents as f64 },
            cumulative_expense: prev_expense + expense,
            max_path_flux: max_path_flux as u64,
            max_prob_flux,
        };
        self.trace.samples.push(metrics);
        self.trace.flux_exceedances.push(exceed);
        Ok(metrics)
    }
}

/// Runs one scenario for `n_steps` instants (or until the stop threshold).
pub fn run(scenario: &Scenario, seed: u64) -> Result<RunTrace> {
    let mut sim = Simulation::new(scenario, seed)?;
    let already = |sim: &Simulation| {
        scenario
            .stop_hellinger
            .is_some_and(|t| sim.trace.final_hellinger() <= t)
    };
    while sim.state.step() < scenario.n_steps && !already(&sim) {
        sim.step()?;
    }
    Ok(sim.into_trace())
}
