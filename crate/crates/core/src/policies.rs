//! Primary and secondary guidance constructors.
//!
//! * `P1` minimises travel expense: off-diagonal mass proportional to the
//!   target density of the destination, scaled by the larger of the two
//!   endpoint gains and discounted by the path expense. Agents in
//!   underpopulated bins are anchored by a steep secondary gain with S = I.
//! * `P2` maximises the contraction rate under per-path flux caps by
//!   building a symmetric kernel Q, lowering it twice so each row's outflow
//!   stays within its gain, and setting P[i,l] = Θ[l]·Q[i,l]. G ≡ 0.
//! * `P2Quorum` stacks a logistic quorum gain with a uniform-neighbour
//!   secondary matrix on top of `P2`.
//! * `GicaBaseline` uses the `P1` kernel with gains computed from the
//!   global distribution instead of local densities.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::async_exec::{async_primary_matrix, ReadinessMask};
use crate::config::GuidanceConfig;
use crate::error::{GuidanceError, Result};
use crate::guidance::{gain_from_deviation, LocalField, LocalView};
use crate::topology::{local_targets, BinTopology, DesiredDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "p1")]
    P1,
    #[serde(rename = "p1-boosted")]
    P1Boosted,
    #[serde(rename = "p2")]
    P2,
    #[serde(rename = "p2+quorum")]
    P2Quorum,
    #[serde(rename = "gica-baseline")]
    GicaBaseline,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::P1,
        PolicyKind::P1Boosted,
        PolicyKind::P2,
        PolicyKind::P2Quorum,
        PolicyKind::GicaBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::P1 => "p1",
            PolicyKind::P1Boosted => "p1-boosted",
            PolicyKind::P2 => "p2",
            PolicyKind::P2Quorum => "p2+quorum",
            PolicyKind::GicaBaseline => "gica-baseline",
        }
    }

    pub fn uses_flux_caps(self) -> bool {
        matches!(self, PolicyKind::P2 | PolicyKind::P2Quorum)
    }

    /// Whether the primary matrix bounds each row's outflow by the bin's
    /// own gain (the strict form of the settling requirement). The P1-style
    /// kernels couple endpoints through `max(ξ̄[i], ξ̄[l])` and only bound it
    /// by the largest gain in the neighbourhood.
    pub fn strict_settling(self) -> bool {
        self.uses_flux_caps()
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = GuidanceError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                GuidanceError::param(
                    "policy",
                    s,
                    "one of p1, p1-boosted, p2, p2+quorum, gica-baseline",
                )
            })
    }
}

/// Travel expense of every allowed transition, `E1·Δs + E0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpenseModel {
    pub matrix: DMatrix<f64>,
    pub e_max: f64,
    pub eps_e: f64,
}

impl ExpenseModel {
    pub fn new(topo: &BinTopology, cfg: &GuidanceConfig) -> Self {
        let n = topo.n_bins();
        let matrix = DMatrix::from_fn(n, n, |i, l| {
            if i != l && topo.comm(i, l) {
                cfg.expense_slope * topo.hop_dist(i, l) as f64 + cfg.expense_offset
            } else {
                0.0
            }
        });
        let e_max = matrix.max();
        ExpenseModel {
            matrix,
            e_max,
            eps_e: cfg.eps_e,
        }
    }

    pub fn expense(&self, i: usize, l: usize) -> f64 {
        self.matrix[(i, l)]
    }

    /// Discount `1 − E[i,l] / (E_max + ε_E)` ∈ (0, 1].
    pub fn discount(&self, i: usize, l: usize) -> f64 {
        1.0 - self.matrix[(i, l)] / (self.e_max + self.eps_e)
    }
}

/// Anchoring secondary gain: 1 when the bin is at or below its local target,
/// `exp(−2β(μ̄ − Θ̄))` above it.
pub fn p1_secondary_gain(view: &LocalView, cfg: &GuidanceConfig) -> f64 {
    anchoring_gain(view.local_density, view.local_target, cfg.beta)
}

pub fn anchoring_gain(density: f64, target: f64, beta: f64) -> f64 {
    let d = target - density;
    // exp(βd) / exp(β|d|), folded into one exponent so large β cannot overflow.
    (beta * d - beta * d.abs()).exp()
}

/// Uniform spread over the neighbourhood together with the logistic quorum
/// gain `(1 + exp(γ(q − μ̄/Θ̄)))⁻¹`.
pub fn quorum_secondary(
    view: &LocalView,
    topo: &BinTopology,
    cfg: &GuidanceConfig,
) -> (Vec<f64>, f64) {
    let mut row = vec![0.0; topo.n_bins()];
    let nbrs = topo.neighbors(view.bin);
    let share = 1.0 / nbrs.len() as f64;
    for &l in nbrs {
        row[l] = share;
    }
    (row, quorum_gain(view.local_density, view.local_target, cfg))
}

pub fn quorum_gain(density: f64, target: f64, cfg: &GuidanceConfig) -> f64 {
    1.0 / (1.0 + (cfg.gamma * (cfg.quorum - density / target)).exp())
}

/// Primary gains computed from the global distribution.
pub fn global_gains(mu: &[f64], theta: &DesiredDistribution, cfg: &GuidanceConfig) -> Vec<f64> {
    mu.iter()
        .zip(theta.as_slice())
        .map(|(&m, &t)| gain_from_deviation(m, t, cfg.alpha, cfg.eps_xi))
        .collect()
}

/// Secondary matrix of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Secondary {
    Identity,
    UniformNeighbors,
}

/// Everything agents need to build their rows at one time instant.
#[derive(Debug, Clone)]
pub struct StepPolicy {
    /// Primary guidance matrix (asynchronous variant when a mask is given).
    pub primary: DMatrix<f64>,
    /// Per-bin primary gains the matrix was built from.
    pub xi: Vec<f64>,
    pub secondary: Secondary,
    /// Per-bin secondary gains G.
    pub secondary_gain: Vec<f64>,
}

impl StepPolicy {
    pub fn secondary_row(&self, topo: &BinTopology, i: usize) -> Vec<f64> {
        let mut row = vec![0.0; topo.n_bins()];
        match self.secondary {
            Secondary::Identity => row[i] = 1.0,
            Secondary::UniformNeighbors => {
                let nbrs = topo.neighbors(i);
                for &l in nbrs {
                    row[l] = 1.0 / nbrs.len() as f64;
                }
            }
        }
        row
    }
}

/// Static data shared by all time instants of a scenario.
#[derive(Debug, Clone)]
pub struct PolicyContext {
    pub topo: BinTopology,
    pub theta: DesiredDistribution,
    pub cfg: GuidanceConfig,
    pub expense: ExpenseModel,
    /// Locally-desired densities Θ̄.
    pub targets: Vec<f64>,
    /// 1 / Σ_{s ∈ N(i) \ i} Θ[s] per bin.
    boost: Vec<f64>,
}

impl PolicyContext {
    pub fn new(topo: BinTopology, theta: DesiredDistribution, cfg: GuidanceConfig) -> Result<Self> {
        theta.check_len(topo.n_bins())?;
        cfg.validate()?;
        let expense = ExpenseModel::new(&topo, &cfg);
        let targets = local_targets(&topo, &theta);
        let boost = (0..topo.n_bins())
            .map(|i| {
                let s: f64 = topo
                    .neighbors(i)
                    .iter()
                    .filter(|&&l| l != i)
                    .map(|&l| theta[l])
                    .sum();
                1.0 / s
            })
            .collect();
        Ok(PolicyContext {
            topo,
            theta,
            cfg,
            expense,
            targets,
            boost,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.topo.n_bins()
    }

    pub fn local_field(&self, counts: &[usize]) -> LocalField {
        LocalField::compute(counts, &self.topo, &self.targets)
    }

    /// Primary gains of every bin from local information.
    pub fn local_gains(&self, field: &LocalField) -> Vec<f64> {
        (0..self.n_bins())
            .map(|i| gain_from_deviation(field.density[i], field.target[i], self.cfg.alpha, self.cfg.eps_xi))
            .collect()
    }

    /// Pairwise boost factor min(b[i], b[l]), or 1 when boosting is off.
    pub fn theta_boost(&self, i: usize, l: usize, boosted: bool) -> f64 {
        if boosted {
            self.boost[i].min(self.boost[l])
        } else {
            1.0
        }
    }

    /// Expense-minimising primary row of bin `i` given every bin's gain.
    pub fn p1_row(&self, i: usize, xi: &[f64], boosted: bool) -> Vec<f64> {
        let mut row = vec![0.0; self.n_bins()];
        let mut off = 0.0;
        for &l in self.topo.neighbors(i) {
            if l == i {
                continue;
            }
            let v = self.theta_boost(i, l, boosted)
                * self.cfg.eps_m
                * self.theta[l]
                * xi[i].max(xi[l])
                * self.expense.discount(i, l);
            row[l] = v;
            off += v;
        }
        row[i] = 1.0 - off;
        row
    }

    pub fn p1_matrix(&self, xi: &[f64], boosted: bool) -> DMatrix<f64> {
        rows_to_matrix((0..self.n_bins()).map(|i| self.p1_row(i, xi, boosted)), self.n_bins())
    }

    /// Global-feedback baseline row: the `P1` kernel driven by gains of the
    /// global distribution `mu`.
    pub fn gica_row(&self, i: usize, mu: &[f64]) -> Vec<f64> {
        let xi = global_gains(mu, &self.theta, &self.cfg);
        self.p1_row(i, &xi, self.cfg.use_theta_boost)
    }

    /// Flux-capped primary matrix built from bin counts and local gains.
    pub fn p2_matrix(&self, counts: &[usize], xi: &[f64]) -> DMatrix<f64> {
        let n = self.n_bins();
        let theta = self.theta.as_slice();
        let caps = &self.cfg.flux_caps;
        let mut q = DMatrix::<f64>::zeros(n, n);

        for (i, l) in self.topo.directed_edges().filter(|(i, l)| i < l) {
            let (ni, nl) = (counts[i] as f64, counts[l] as f64);
            let (cil, cli) = (caps.cap(i, l), caps.cap(l, i));
            let bound = |c: f64, count: f64, th: f64| {
                if count == 0.0 {
                    f64::INFINITY
                } else {
                    c / (count * th)
                }
            };
            let mut v = bound(cil, ni, theta[l]).min(bound(cli, nl, theta[i]));
            if v.is_infinite() {
                v = (xi[i] / theta[l]).min(xi[l] / theta[i]);
            }
            // Keep the flux bound exact under the same rounding used for n·P.
            while ni * (theta[l] * v) > cil || nl * (theta[i] * v) > cli {
                v = v.next_down();
            }
            q[(i, l)] = v;
            q[(l, i)] = v;
        }

        // Row budget: the gain, kept below one so the diagonal stays positive.
        let budget: Vec<f64> = xi.iter().map(|&x| x.min(1.0 - self.cfg.eps_xi)).collect();
        let lowering = |q: &DMatrix<f64>| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let out: f64 = self
                        .topo
                        .neighbors(i)
                        .iter()
                        .filter(|&&l| l != i)
                        .map(|&l| theta[l] * q[(i, l)])
                        .sum();
                    if out > 0.0 {
                        (budget[i] / out).min(1.0)
                    } else {
                        1.0
                    }
                })
                .collect()
        };

        let first = lowering(&q);
        for (i, l) in self.topo.directed_edges() {
            q[(i, l)] *= first[i].max(first[l]);
        }
        let second = lowering(&q);
        for (i, l) in self.topo.directed_edges() {
            q[(i, l)] *= second[i].min(second[l]);
        }
        // Rounding in the products can leave a row a few ulps above its
        // budget; shave the symmetric pair until every row fits.
        for i in 0..n {
            loop {
                let out: f64 = self
                    .topo
                    .neighbors(i)
                    .iter()
                    .filter(|&&l| l != i)
                    .map(|&l| theta[l] * q[(i, l)])
                    .sum();
                if out <= budget[i] {
                    break;
                }
                let factor = (budget[i] / out).next_down();
                for &l in self.topo.neighbors(i) {
                    if l != i {
                        q[(i, l)] *= factor;
                        q[(l, i)] = q[(i, l)];
                    }
                }
            }
        }

        let mut p = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut off = 0.0;
            for &l in self.topo.neighbors(i) {
                if l != i {
                    let v = theta[l] * q[(i, l)];
                    p[(i, l)] = v;
                    off += v;
                }
            }
            p[(i, i)] = 1.0 - off;
        }
        p
    }

    pub fn p2_row(&self, i: usize, counts: &[usize], xi: &[f64]) -> Vec<f64> {
        self.p2_matrix(counts, xi).row(i).iter().copied().collect()
    }

    /// Builds the primary matrix, gains and secondary data of one time
    /// instant. With a readiness mask the primary matrix is replaced by its
    /// asynchronous variant, and bins that are not ready carry no secondary
    /// weight.
    pub fn step_policy(
        &self,
        kind: PolicyKind,
        counts: &[usize],
        mask: Option<&ReadinessMask>,
    ) -> StepPolicy {
        let field = self.local_field(counts);
        let n = self.n_bins();
        let (primary, xi, secondary, secondary_gain) = match kind {
            PolicyKind::P1 | PolicyKind::P1Boosted => {
                let xi = self.local_gains(&field);
                let p = self.p1_matrix(&xi, kind == PolicyKind::P1Boosted);
                let g = (0..n)
                    .map(|i| anchoring_gain(field.density[i], field.target[i], self.cfg.beta))
                    .collect();
                (p, xi, Secondary::Identity, g)
            }
            PolicyKind::GicaBaseline => {
                let total: usize = counts.iter().sum();
                let mu: Vec<f64> = counts
                    .iter()
                    .map(|&c| c as f64 / total.max(1) as f64)
                    .collect();
                let xi = global_gains(&mu, &self.theta, &self.cfg);
                let p = self.p1_matrix(&xi, self.cfg.use_theta_boost);
                let g = (0..n)
                    .map(|i| anchoring_gain(mu[i], self.theta[i], self.cfg.beta))
                    .collect();
                (p, xi, Secondary::Identity, g)
            }
            PolicyKind::P2 => {
                let xi = self.local_gains(&field);
                let p = self.p2_matrix(counts, &xi);
                (p, xi, Secondary::Identity, vec![0.0; n])
            }
            PolicyKind::P2Quorum => {
                let xi = self.local_gains(&field);
                let p = self.p2_matrix(counts, &xi);
                let g = (0..n)
                    .map(|i| quorum_gain(field.density[i], field.target[i], &self.cfg))
                    .collect();
                (p, xi, Secondary::UniformNeighbors, g)
            }
        };
        match mask {
            None => StepPolicy {
                primary,
                xi,
                secondary,
                secondary_gain,
            },
            Some(mask) => {
                let primary = async_primary_matrix(&primary, mask, &self.topo);
                let secondary_gain = secondary_gain
                    .into_iter()
                    .enumerate()
                    .map(|(i, g)| if mask.is_ready(i) { g } else { 0.0 })
                    .collect();
                StepPolicy {
                    primary,
                    xi,
                    secondary,
                    secondary_gain,
                }
            }
        }
    }
}

fn rows_to_matrix<I: Iterator<Item = Vec<f64>>>(rows: I, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.enumerate() {
        for (l, v) in row.into_iter().enumerate() {
            m[(i, l)] = v;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guidance::{validate_requirements, SwarmState};

    fn two_bin_ctx() -> PolicyContext {
        let topo = BinTopology::grid(1, 2, 1).unwrap();
        let theta = DesiredDistribution::uniform(2).unwrap();
        let cfg = GuidanceConfig {
            flux_caps: crate::config::FluxCaps::uniform(20.0),
            ..Default::default()
        };
        PolicyContext::new(topo, theta, cfg).unwrap()
    }

    #[test]
    fn policy_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("p3".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn expense_model_shape() {
        let topo = BinTopology::grid(3, 3, 2).unwrap();
        let e = ExpenseModel::new(&topo, &GuidanceConfig::default());
        assert_eq!(e.expense(0, 0), 0.0);
        assert_eq!(e.expense(0, 1), 1.5);
        assert_eq!(e.expense(0, 4), 2.5);
        assert_eq!(e.expense(0, 8), 0.0); // four paths away: not allowed
        assert_eq!(e.e_max, 2.5);
        assert_eq!(e.matrix, e.matrix.transpose());
        assert!((e.discount(0, 1) - (1.0 - 1.5 / 2.6)).abs() < 1e-15);
    }

    #[test]
    fn p1_two_bin_full_gain() {
        // f(E) = 1 requires a zero expense; emulate with a zero-slope model
        // and huge eps_e so the discount is 1 up to rounding.
        let topo = BinTopology::grid(1, 2, 1).unwrap();
        let theta = DesiredDistribution::uniform(2).unwrap();
        let cfg = GuidanceConfig {
            expense_slope: 0.0,
            expense_offset: 1e-300,
            eps_m: 1.0,
            ..Default::default()
        };
        let ctx = PolicyContext::new(topo, theta, cfg).unwrap();
        let p = ctx.p1_matrix(&[1.0, 1.0], false);
        for v in p.iter() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn p1_settled_swarm_is_near_identity() {
        let topo = BinTopology::grid(4, 4, 2).unwrap();
        let theta = DesiredDistribution::uniform(16).unwrap();
        let ctx = PolicyContext::new(topo, theta, GuidanceConfig::default()).unwrap();
        let xi = vec![1e-9; 16];
        let p = ctx.p1_matrix(&xi, true);
        for i in 0..16 {
            for l in 0..16 {
                if i != l {
                    assert!(p[(i, l)] <= 1e-9);
                }
            }
            assert!(p[(i, i)] >= 1.0 - 15.0 * 1e-9);
        }
    }

    #[test]
    fn anchoring_gain_values() {
        assert_eq!(anchoring_gain(0.2, 0.2, 1.8e5), 1.0);
        assert_eq!(anchoring_gain(0.1, 0.2, 1.8e5), 1.0);
        let g = anchoring_gain(0.2 + 1e-5, 0.2, 1.8e5);
        assert!((g - (-3.6f64).exp()).abs() < 1e-9, "{g}");
        assert_eq!(anchoring_gain(0.9, 0.1, 1.8e5), 0.0);
    }

    #[test]
    fn quorum_values() {
        let cfg = GuidanceConfig::default();
        assert!((quorum_gain(0.26, 0.2, &cfg) - 0.5).abs() < 1e-12);
        assert!(quorum_gain(1.0, 0.1, &cfg) > 1.0 - 1e-12);
        let topo = BinTopology::grid(10, 10, 1).unwrap();
        let state = SwarmState::all_in(100, 10, 23).unwrap();
        let theta = DesiredDistribution::uniform(100).unwrap();
        let view = crate::guidance::local_view(&state, &topo, &theta, 23).unwrap();
        let (row, _) = quorum_secondary(&view, &topo, &cfg);
        for l in [13, 22, 23, 24, 33] {
            assert_eq!(row[l], 0.2);
        }
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p2_two_bin_hand_execution() {
        let ctx = two_bin_ctx();
        let p = ctx.p2_matrix(&[100, 100], &[1.0, 1.0]);
        assert!((p[(0, 1)] - 0.2).abs() < 1e-15);
        assert!((p[(0, 0)] - 0.8).abs() < 1e-15);
        assert!((p[(1, 0)] - 0.2).abs() < 1e-15);
        assert!(100.0 * p[(0, 1)] <= 20.0);
    }

    #[test]
    fn p2_gain_floor_caps_outflow() {
        let topo = BinTopology::grid(3, 3, 1).unwrap();
        let theta = DesiredDistribution::uniform(9).unwrap();
        let ctx = PolicyContext::new(topo, theta, GuidanceConfig::default()).unwrap();
        let xi = vec![1e-9; 9];
        let p = ctx.p2_matrix(&[50; 9], &xi);
        for i in 0..9 {
            assert!(1.0 - p[(i, i)] <= 1e-9 + 1e-15);
        }
    }

    #[test]
    fn p2_keeps_positive_diagonal_at_full_gain() {
        let topo = BinTopology::grid(1, 3, 1).unwrap();
        let theta = DesiredDistribution::uniform(3).unwrap();
        let ctx = PolicyContext::new(topo.clone(), theta.clone(), GuidanceConfig::default()).unwrap();
        let counts = [3, 0, 0];
        let xi = [1.0, 1.0, 1.0];
        let p = ctx.p2_matrix(&counts, &xi);
        let r = validate_requirements(&p, &theta, &topo, &xi);
        assert!(r.all_strict(), "{r:?}");
    }

    #[test]
    fn gica_elevates_only_touching_rows() {
        let topo = BinTopology::grid(1, 4, 1).unwrap();
        let theta = DesiredDistribution::uniform(4).unwrap();
        let ctx = PolicyContext::new(topo, theta, GuidanceConfig::default()).unwrap();
        let mu = [0.25, 0.25, 0.25, 0.25];
        let settled = ctx.gica_row(0, &mu);
        assert!(settled[1] < 1e-9);
        let mu = [0.25, 0.25, 0.35, 0.15];
        let xi = global_gains(&mu, &ctx.theta, &ctx.cfg);
        assert_eq!(xi[0], 1e-9);
        assert!(xi[2] > 0.1 && xi[3] > 0.1);
        assert!(ctx.gica_row(0, &mu)[1] < 1e-9);
        assert!(ctx.gica_row(1, &mu)[2] > 1e-3);
        assert!(ctx.gica_row(3, &mu)[2] > 1e-3);
    }
}
