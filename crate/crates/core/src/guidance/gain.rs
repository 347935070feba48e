use super::LocalView;
use crate::config::GuidanceConfig;

/// Primary local-feedback gain ξ̄ ∈ (0, 1] for one bin.
///
/// The relative deviation `|Θ̄ − μ̄| / Θ̄` raised to `alpha`, floored at
/// `eps_xi`; a deviation larger than the target itself saturates at 1.
pub fn primary_gain(view: &LocalView, cfg: &GuidanceConfig) -> f64 {
    gain_from_deviation(view.local_density, view.local_target, cfg.alpha, cfg.eps_xi)
}

pub fn gain_from_deviation(density: f64, target: f64, alpha: f64, eps_xi: f64) -> f64 {
    let dev = (target - density).abs();
    if dev > target {
        return 1.0;
    }
    let g = (dev / target).powf(alpha);
    if g < eps_xi {
        eps_xi
    } else {
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alpha: f64) -> GuidanceConfig {
        GuidanceConfig {
            alpha,
            ..Default::default()
        }
    }

    #[test]
    fn at_target_hits_floor() {
        assert_eq!(gain_from_deviation(0.3, 0.3, 0.6, 1e-9), 1e-9);
    }

    #[test]
    fn cap_branch() {
        assert_eq!(gain_from_deviation(0.5, 0.2, 0.6, 1e-9), 1.0);
    }

    #[test]
    fn linear_branch() {
        let g = gain_from_deviation(0.1, 0.2, 1.0, 1e-9);
        assert!((g - 0.5).abs() < 1e-15);
    }

    #[test]
    fn monotone_in_deviation() {
        let c = cfg(0.6);
        let target = 0.2;
        let mut prev = 0.0;
        for k in 0..=200 {
            let dev = target * k as f64 / 200.0;
            let g = gain_from_deviation(target - dev, target, c.alpha, c.eps_xi);
            assert!(g >= prev, "gain decreased at dev={dev}");
            assert!(g > 0.0 && g <= 1.0);
            prev = g;
        }
    }
}
