use std::collections::BTreeMap;

use crate::error::{GuidanceError, Result};

/// Upper bound on the expected one-way agent flow per path and time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxCaps {
    pub uniform: f64,
    /// Overrides for specific ordered pairs `(from, to)`.
    pub per_edge: BTreeMap<(usize, usize), f64>,
}

impl FluxCaps {
    pub fn uniform(cap: f64) -> Self {
        FluxCaps {
            uniform: cap,
            per_edge: BTreeMap::new(),
        }
    }

    pub fn cap(&self, from: usize, to: usize) -> f64 {
        self.per_edge
            .get(&(from, to))
            .copied()
            .unwrap_or(self.uniform)
    }
}

/// Design parameters shared by the policy constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceConfig {
    /// Exponent of the primary gain.
    pub alpha: f64,
    /// Floor of the primary gain.
    pub eps_xi: f64,
    /// Scale of the off-diagonal lower bound in the expense-minimising policy.
    pub eps_m: f64,
    /// Steepness of the anchoring secondary gain.
    pub beta: f64,
    /// Decay rate of the secondary weight, `exp(-tau * k)`.
    pub tau: f64,
    /// Steepness of the quorum gain.
    pub gamma: f64,
    /// Quorum threshold on μ̄/Θ̄, applied to every bin.
    pub quorum: f64,
    pub flux_caps: FluxCaps,
    pub expense_slope: f64,
    pub expense_offset: f64,
    pub eps_e: f64,
    /// Multiply off-diagonal entries by the neighbourhood boost factor.
    pub use_theta_boost: bool,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            alpha: 0.6,
            eps_xi: 1e-9,
            eps_m: 1.0,
            beta: 1.8e5,
            tau: 1e-6,
            gamma: 30.0,
            quorum: 1.3,
            flux_caps: FluxCaps::uniform(20.0),
            expense_slope: 1.0,
            expense_offset: 0.5,
            eps_e: 0.1,
            use_theta_boost: true,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, name: &'static str, v: f64, expected: &'static str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(GuidanceError::param(name, v, expected))
            }
        }
        let a = self.alpha;
        check(a.is_finite() && a > 0.0, "alpha", a, "alpha > 0")?;
        let e = self.eps_xi;
        check(e > 0.0 && e <= 1.0, "eps_xi", e, "0 < eps_xi <= 1")?;
        let m = self.eps_m;
        check(m > 0.0 && m <= 1.0, "eps_m", m, "0 < eps_m <= 1")?;
        let b = self.beta;
        check(b.is_finite() && b >= 0.0, "beta", b, "beta >= 0")?;
        let t = self.tau;
        check(t.is_finite() && t >= 0.0, "tau", t, "tau >= 0")?;
        let g = self.gamma;
        check(g.is_finite() && g > 0.0, "gamma", g, "gamma > 0")?;
        let q = self.quorum;
        check(q.is_finite() && q > 1.0, "quorum", q, "quorum > 1")?;
        let c = self.flux_caps.uniform;
        check(c.is_finite() && c > 0.0, "flux_cap", c, "flux_cap > 0")?;
        for &cap in self.flux_caps.per_edge.values() {
            check(cap.is_finite() && cap > 0.0, "flux_cap", cap, "flux_cap > 0")?;
        }
        let s = self.expense_slope;
        check(s.is_finite() && s >= 0.0, "expense_slope", s, "expense_slope >= 0")?;
        let o = self.expense_offset;
        check(o.is_finite() && o >= 0.0, "expense_offset", o, "expense_offset >= 0")?;
        check(
            s + o > 0.0,
            "expense_offset",
            o,
            "expense_slope + expense_offset > 0",
        )?;
        let ee = self.eps_e;
        check(ee.is_finite() && ee > 0.0, "eps_e", ee, "eps_e > 0")?;
        Ok(())
    }
}
