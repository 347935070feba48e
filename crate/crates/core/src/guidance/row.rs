use crate::config::GuidanceConfig;
use crate::error::{GuidanceError, Result};

/// Row-sum tolerance for stochastic vectors.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// One bin's decision row together with its constituents.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    pub bin: usize,
    pub primary: Vec<f64>,
    pub secondary: Vec<f64>,
    pub omega: f64,
    pub composed: Vec<f64>,
}

pub fn is_stochastic(row: &[f64], tol: f64) -> bool {
    row.iter().all(|&v| v >= 0.0 && v.is_finite()) && (row.iter().sum::<f64>() - 1.0).abs() <= tol
}

/// ω = exp(−τk)·G, rejected unless it lies in [0, 1).
pub fn secondary_weight(gain: f64, time_instant: u64, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gain) {
        return Err(GuidanceError::param("secondary gain", gain, "a value in [0, 1]"));
    }
    let omega = (-tau * time_instant as f64).exp() * gain;
    if !(0.0..1.0).contains(&omega) {
        return Err(GuidanceError::WeightOutOfRange(omega));
    }
    Ok(omega)
}

/// M[i,·] = (1 − ω)·P[i,·] + ω·S[i,·].
pub fn compose_row(
    bin: usize,
    primary: &[f64],
    secondary: &[f64],
    gain: f64,
    time_instant: u64,
    cfg: &GuidanceConfig,
) -> Result<PolicyRow> {
    if primary.len() != secondary.len() {
        return Err(GuidanceError::DimensionMismatch {
            expected: primary.len(),
            got: secondary.len(),
        });
    }
    if bin >= primary.len() {
        return Err(GuidanceError::BinOutOfRange {
            index: bin,
            n_bins: primary.len(),
        });
    }
    for (name, row) in [("primary row", primary), ("secondary row", secondary)] {
        if !is_stochastic(row, STOCHASTIC_TOL) {
            return Err(GuidanceError::param(name, format!("{row:?}"), "a row-stochastic vector"));
        }
    }
    let omega = secondary_weight(gain, time_instant, cfg.tau)?;
    let composed = primary
        .iter()
        .zip(secondary)
        .map(|(&p, &s)| (1.0 - omega) * p + omega * s)
        .collect();
    Ok(PolicyRow {
        bin,
        primary: primary.to_vec(),
        secondary: secondary.to_vec(),
        omega,
        composed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tau: f64) -> GuidanceConfig {
        GuidanceConfig {
            tau,
            ..Default::default()
        }
    }

    #[test]
    fn zero_gain_keeps_primary() {
        let row = compose_row(0, &[0.7, 0.3], &[1.0, 0.0], 0.0, 5, &cfg(1e-6)).unwrap();
        assert_eq!(row.composed, vec![0.7, 0.3]);
        assert_eq!(row.omega, 0.0);
    }

    #[test]
    fn large_tau_recovers_primary() {
        let row = compose_row(0, &[0.7, 0.3], &[1.0, 0.0], 1.0, 1, &cfg(1e3)).unwrap();
        assert!((row.composed[0] - 0.7).abs() < 1e-15);
        assert!(row.omega < 1e-300);
    }

    #[test]
    fn full_gain_at_time_zero_rejected() {
        let err = compose_row(0, &[0.9, 0.1], &[1.0, 0.0], 1.0, 0, &cfg(1e-6)).unwrap_err();
        assert!(matches!(err, GuidanceError::WeightOutOfRange(w) if w == 1.0));
    }

    #[test]
    fn half_weight_blend() {
        // exp(-tau k) = 0.5
        let tau = std::f64::consts::LN_2;
        let row = compose_row(0, &[0.9, 0.1], &[1.0, 0.0], 1.0, 1, &cfg(tau)).unwrap();
        assert!((row.omega - 0.5).abs() < 1e-15);
        assert!((row.composed[0] - 0.95).abs() < 1e-15);
        assert!((row.composed[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn affine_in_omega() {
        let p = [0.5, 0.25, 0.25];
        let s = [0.2, 0.6, 0.2];
        for gain in [0.0, 0.5, 1.0 - 1e-12] {
            let row = compose_row(1, &p, &s, gain, 0, &cfg(0.0)).unwrap();
            for l in 0..3 {
                let expected = p[l] + row.omega * (s[l] - p[l]);
                assert!((row.composed[l] - expected).abs() < 1e-15);
            }
            assert!(is_stochastic(&row.composed, STOCHASTIC_TOL));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(compose_row(0, &[0.5, 0.6], &[1.0, 0.0], 0.1, 1, &cfg(1e-6)).is_err());
        assert!(compose_row(0, &[0.5, 0.5], &[1.0], 0.1, 1, &cfg(1e-6)).is_err());
        assert!(compose_row(0, &[0.5, 0.5], &[1.0, 0.0], 1.5, 1, &cfg(1e-6)).is_err());
    }
}
