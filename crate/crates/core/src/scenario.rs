//! Flat key-value scenario files and the built-in presets.
//!
//! Every key is optional in a file; missing keys take the default of the
//! `p1-fig4` preset. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{FluxCaps, GuidanceConfig};
use crate::error::{GuidanceError, Result};
use crate::policies::PolicyKind;
use crate::sim::{Scenario, ThetaSource};
use crate::topology::{BinTopology, DesiredDistribution};

pub const PRESETS: [&str; 6] = [
    "p1-fig4",
    "gica-fig4",
    "p1-async",
    "p2-fig7",
    "quorum-fig7",
    "p2-fig7-large",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub rows: usize,
    pub cols: usize,
    pub max_hops: u32,
    pub n_agents: usize,
    pub start_bin: usize,
    /// Explicit Θ; when absent Θ is drawn from `theta_seed` or the run seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_seed: Option<u64>,
    pub policy: PolicyKind,
    pub blocking_fraction: f64,
    pub window: usize,
    pub steps: u64,
    pub runs: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_hellinger: Option<f64>,
    pub out_dir: String,

    pub alpha: f64,
    pub eps_xi: f64,
    pub eps_m: f64,
    pub beta: f64,
    pub tau: f64,
    pub gamma: f64,
    pub quorum: f64,
    pub flux_cap: f64,
    pub expense_slope: f64,
    pub expense_offset: f64,
    pub eps_e: f64,
    pub use_theta_boost: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        let cfg = GuidanceConfig::default();
        ScenarioSpec {
            rows: 10,
            cols: 10,
            max_hops: 3,
            n_agents: 2000,
            start_bin: 0,
            theta: None,
            theta_seed: None,
            policy: PolicyKind::P1Boosted,
            blocking_fraction: 0.0,
            window: 50,
            steps: 5000,
            runs: 1,
            seed: 0,
            stop_hellinger: None,
            out_dir: "out".into(),
            alpha: cfg.alpha,
            eps_xi: cfg.eps_xi,
            eps_m: cfg.eps_m,
            beta: cfg.beta,
            tau: cfg.tau,
            gamma: cfg.gamma,
            quorum: cfg.quorum,
            flux_cap: cfg.flux_caps.uniform,
            expense_slope: cfg.expense_slope,
            expense_offset: cfg.expense_offset,
            eps_e: cfg.eps_e,
            use_theta_boost: cfg.use_theta_boost,
        }
    }
}

impl ScenarioSpec {
    pub fn preset(name: &str) -> Result<Self> {
        let base = ScenarioSpec::default();
        let spec = match name {
            "p1-fig4" => base,
            "gica-fig4" => ScenarioSpec {
                policy: PolicyKind::GicaBaseline,
                ..base
            },
            "p1-async" => ScenarioSpec {
                blocking_fraction: 0.3,
                steps: 8000,
                ..base
            },
            "p2-fig7" => ScenarioSpec {
                max_hops: 1,
                n_agents: 10_000,
                policy: PolicyKind::P2,
                alpha: 1.0,
                flux_cap: 20.0,
                steps: 1000,
                ..base
            },
            "quorum-fig7" => ScenarioSpec {
                policy: PolicyKind::P2Quorum,
                quorum: 1.3,
                gamma: 30.0,
                ..ScenarioSpec::preset("p2-fig7")?
            },
            "p2-fig7-large" => ScenarioSpec {
                n_agents: 100_000,
                flux_cap: 200.0,
                ..ScenarioSpec::preset("p2-fig7")?
            },
            other => {
                return Err(GuidanceError::Scenario(format!(
                    "unknown preset `{other}` (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(spec)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| GuidanceError::Scenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat scenario serialises")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }

    /// Applies `key=value` overrides. Values use the file syntax, except that
    /// bare words are accepted as strings (`policy=p2`).
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut table: toml::Table = toml::from_str(&self.to_toml())
            .map_err(|e| GuidanceError::Scenario(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| GuidanceError::Scenario(format!("override `{o}` is not key=value")))?;
            let key = key.trim();
            let raw = raw.trim();
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            table.insert(key.to_string(), value);
        }
        let text = toml::to_string(&table).map_err(|e| GuidanceError::Scenario(e.to_string()))?;
        *self = ScenarioSpec::from_toml(&text)?;
        Ok(())
    }

    pub fn guidance_config(&self) -> GuidanceConfig {
        GuidanceConfig {
            alpha: self.alpha,
            eps_xi: self.eps_xi,
            eps_m: self.eps_m,
            beta: self.beta,
            tau: self.tau,
            gamma: self.gamma,
            quorum: self.quorum,
            flux_caps: FluxCaps::uniform(self.flux_cap),
            expense_slope: self.expense_slope,
            expense_offset: self.expense_offset,
            eps_e: self.eps_e,
            use_theta_boost: match self.policy {
                PolicyKind::P1 => false,
                PolicyKind::P1Boosted => true,
                _ => self.use_theta_boost,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols < 2 {
            return Err(GuidanceError::param(
                "rows",
                format!("{}x{}", self.rows, self.cols),
                "a grid with at least two bins",
            ));
        }
        if self.max_hops == 0 {
            return Err(GuidanceError::param("max_hops", 0, "an integer >= 1"));
        }
        if self.start_bin >= self.rows * self.cols {
            return Err(GuidanceError::param("start_bin", self.start_bin, "a bin index below rows*cols"));
        }
        if self.n_agents == 0 {
            return Err(GuidanceError::param("n_agents", 0, "an integer >= 1"));
        }
        if self.runs == 0 {
            return Err(GuidanceError::param("runs", 0, "an integer >= 1"));
        }
        if self.window == 0 {
            return Err(GuidanceError::param("window", 0, "an integer >= 1"));
        }
        if !(0.0..1.0).contains(&self.blocking_fraction) {
            return Err(GuidanceError::param(
                "blocking_fraction",
                self.blocking_fraction,
                "a fraction in [0, 1)",
            ));
        }
        if let Some(t) = self.stop_hellinger {
            if !(0.0..=1.0).contains(&t) {
                return Err(GuidanceError::param("stop_hellinger", t, "a value in [0, 1]"));
            }
        }
        if let Some(theta) = &self.theta {
            if theta.len() != self.rows * self.cols {
                return Err(GuidanceError::param(
                    "theta",
                    format!("{} entries", theta.len()),
                    "one entry per bin (rows*cols)",
                ));
            }
            DesiredDistribution::new(theta.clone())?;
        }
        if self.policy.uses_flux_caps() && !self.flux_cap.is_finite() {
            return Err(GuidanceError::param("flux_cap", self.flux_cap, "a finite cap for p2 policies"));
        }
        if self.policy.uses_flux_caps() && self.max_hops != 1 {
            return Err(GuidanceError::param(
                "max_hops",
                self.max_hops,
                "1 for p2 policies (flux caps are per one-hop path)",
            ));
        }
        self.guidance_config().validate()?;
        self.to_scenario()?.validate()
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let topo = BinTopology::grid(self.rows, self.cols, self.max_hops)?;
        let theta = match &self.theta {
            Some(t) => ThetaSource::Fixed(DesiredDistribution::new(t.clone())?),
            None => ThetaSource::Random {
                theta_seed: self.theta_seed,
            },
        };
        Ok(Scenario {
            topo,
            theta,
            cfg: self.guidance_config(),
            policy: self.policy,
            n_agents: self.n_agents,
            start_bin: self.start_bin,
            blocking_fraction: self.blocking_fraction,
            window: self.window,
            n_steps: self.steps,
            stop_hellinger: self.stop_hellinger,
        })
    }
}

/// Loads a scenario from a file path, or from a preset name when no such
/// file exists.
pub fn load_scenario(path_or_preset: &str) -> Result<ScenarioSpec> {
    let path = Path::new(path_or_preset);
    if path.is_file() {
        ScenarioSpec::from_toml(&fs::read_to_string(path)?)
    } else if PRESETS.contains(&path_or_preset) {
        ScenarioSpec::preset(path_or_preset)
    } else {
        Err(GuidanceError::Scenario(format!(
            "`{path_or_preset}` is neither a scenario file nor a preset (known: {})",
            PRESETS.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            ScenarioSpec::preset(p).unwrap().validate().unwrap();
        }
        let p1 = ScenarioSpec::preset("p1-fig4").unwrap();
        assert_eq!((p1.rows, p1.cols, p1.max_hops, p1.n_agents), (10, 10, 3, 2000));
        assert_eq!((p1.alpha, p1.beta, p1.tau), (0.6, 1.8e5, 1e-6));
        let p2 = ScenarioSpec::preset("p2-fig7").unwrap();
        assert_eq!((p2.max_hops, p2.n_agents, p2.flux_cap), (1, 10_000, 20.0));
        let q = ScenarioSpec::preset("quorum-fig7").unwrap();
        assert_eq!(q.policy, PolicyKind::P2Quorum);
        assert_eq!((q.quorum, q.gamma, q.alpha), (1.3, 30.0, 1.0));
    }

    #[test]
    fn toml_round_trip() {
        for p in PRESETS {
            let mut spec = ScenarioSpec::preset(p).unwrap();
            spec.theta_seed = Some(4);
            assert_eq!(ScenarioSpec::from_toml(&spec.to_toml()).unwrap(), spec);
        }
        let mut spec = ScenarioSpec::preset("p1-fig4").unwrap();
        spec.rows = 1;
        spec.cols = 2;
        spec.max_hops = 1;
        spec.theta = Some(vec![0.25, 0.75]);
        spec.stop_hellinger = Some(0.1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.toml");
        spec.write(&path).unwrap();
        assert_eq!(load_scenario(path.to_str().unwrap()).unwrap(), spec);
    }

    #[test]
    fn missing_keys_take_defaults() {
        let spec = ScenarioSpec::from_toml("policy = \"p2\"\nmax_hops = 1\nn_agents = 50\n").unwrap();
        assert_eq!(spec.rows, 10);
        assert_eq!(spec.n_agents, 50);
        assert_eq!(spec.policy, PolicyKind::P2);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ScenarioSpec::from_toml("alhpa = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("alhpa"), "{err}");
    }

    #[test]
    fn domain_errors_name_key() {
        let err = ScenarioSpec::from_toml("alpha = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
        let err = ScenarioSpec::from_toml("blocking_fraction = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("blocking_fraction"), "{err}");
        let err = ScenarioSpec::from_toml("policy = \"p2\"\n").unwrap_err();
        assert!(err.to_string().contains("max_hops"), "{err}");
        let err = ScenarioSpec::from_toml("policy = \"p3\"\n").unwrap_err();
        assert!(err.to_string().contains("p3"), "{err}");
        let err = ScenarioSpec::from_toml("theta = [0.5, 0.5]\n").unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn overrides_apply_and_validate() {
        let mut spec = ScenarioSpec::preset("p1-fig4").unwrap();
        spec.apply_overrides(&["alpha=1.2", "policy=gica-baseline", "steps = 10"]).unwrap();
        assert_eq!(spec.alpha, 1.2);
        assert_eq!(spec.policy, PolicyKind::GicaBaseline);
        assert_eq!(spec.steps, 10);
        assert!(spec.apply_overrides(&["nope=1"]).is_err());
        assert!(spec.apply_overrides(&["alpha"]).is_err());
    }

    #[test]
    fn boost_flag_follows_policy_name() {
        let mut spec = ScenarioSpec::preset("p1-fig4").unwrap();
        spec.policy = PolicyKind::P1;
        assert!(!spec.guidance_config().use_theta_boost);
        spec.policy = PolicyKind::P1Boosted;
        spec.use_theta_boost = false;
        assert!(spec.guidance_config().use_theta_boost);
    }

    #[test]
    fn unknown_preset_lists_known() {
        let err = load_scenario("no-such").unwrap_err().to_string();
        assert!(err.contains("p2-fig7"));
    }
}
