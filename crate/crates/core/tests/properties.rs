use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarm_guidance::async_exec::{async_primary_matrix, verify_async_properties, ReadinessMask};
use swarm_guidance::guidance::{
    dobrushin_coefficient, ergodicity_coefficient, propagate_mean_field, validate_requirements, REQUIREMENT_TOL,
};
use swarm_guidance::policies::{quorum_gain, PolicyContext, PolicyKind};
use swarm_guidance::topology::{b_matrix_rank, BinTopology, DesiredDistribution};
use swarm_guidance::GuidanceConfig;

fn random_tree_plus(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> BinTopology {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a, b));
        }
    }
    BinTopology::from_edges(n, &edges).unwrap()
}

fn context(rows: usize, cols: usize, hops: u32, seed: u64, cfg: GuidanceConfig) -> PolicyContext {
    let topo = BinTopology::grid(rows, cols, hops).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = DesiredDistribution::random(rows * cols, &mut rng).unwrap();
    PolicyContext::new(topo, theta, cfg).unwrap()
}

fn random_counts(n: usize, max: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n)
        .map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(0..=max) })
        .collect()
}

fn random_stochastic(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
    for i in 0..n {
        let s: f64 = m.row(i).sum();
        m.row_mut(i).scale_mut(1.0 / s);
    }
    m
}

fn grid_dims() -> impl Strategy<Value = (usize, usize, u32)> {
    (1usize..6, 2usize..7, 1u32..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighbor_sets_symmetric_and_reflexive((r, c, h) in grid_dims()) {
        let topo = BinTopology::grid(r, c, h).unwrap();
        topo.check_invariants().unwrap();
        for i in 0..topo.n_bins() {
            prop_assert!(topo.neighbors(i).contains(&i));
            for &l in topo.neighbors(i) {
                prop_assert!(topo.neighbors(l).contains(&i));
                prop_assert!(topo.hop_dist(i, l) <= h);
            }
        }
    }

    #[test]
    fn b_matrix_rank_is_n_minus_one(n in 2usize..14, extra in 0usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_tree_plus(n, extra, &mut rng);
        let theta = DesiredDistribution::random(n, &mut rng).unwrap();
        prop_assert_eq!(b_matrix_rank(&topo, &theta).unwrap(), n - 1);
    }

    #[test]
    fn p1_and_gica_meet_r1_to_r4((r, c, h) in grid_dims(), seed in any::<u64>(), alpha in 0.1f64..2.0) {
        let cfg = GuidanceConfig { alpha, ..GuidanceConfig::default() };
        let ctx = context(r, c, h, seed, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let counts = random_counts(ctx.n_bins(), 40, &mut rng);
        for kind in [PolicyKind::P1, PolicyKind::P1Boosted, PolicyKind::GicaBaseline] {
            let sp = ctx.step_policy(kind, &counts, None);
            let rep = validate_requirements(&sp.primary, &ctx.theta, &ctx.topo, &sp.xi);
            prop_assert!(rep.r1_to_r4(), "{kind}: {rep:?}");
            prop_assert!(rep.r5_neighborhood.passed, "{kind}: {rep:?}");
        }
    }

    #[test]
    fn p2_meets_all_requirements_and_caps(
        (r, c) in (1usize..6, 2usize..7),
        seed in any::<u64>(),
        cap in 0.5f64..50.0,
    ) {
        let cfg = GuidanceConfig { alpha: 1.0, flux_caps: swarm_guidance::FluxCaps::uniform(cap), ..GuidanceConfig::default() };
        let ctx = context(r, c, 1, seed, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let counts = random_counts(ctx.n_bins(), 500, &mut rng);
        let sp = ctx.step_policy(PolicyKind::P2, &counts, None);
        let rep = validate_requirements(&sp.primary, &ctx.theta, &ctx.topo, &sp.xi);
        prop_assert!(rep.all_strict(), "{rep:?}");
        for (i, l) in ctx.topo.directed_edges() {
            prop_assert!(counts[i] as f64 * sp.primary[(i, l)] <= cap);
            // Q = P[i,l] / Θ[l] is symmetric.
            let qil = sp.primary[(i, l)] / ctx.theta[l];
            let qli = sp.primary[(l, i)] / ctx.theta[i];
            prop_assert!((qil - qli).abs() <= 1e-9 * qil.abs().max(1.0));
        }
    }

    #[test]
    fn constructed_matrices_keep_theta_stationary((r, c, h) in grid_dims(), seed in any::<u64>()) {
        let ctx = context(r, c, h, seed, GuidanceConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let counts = random_counts(ctx.n_bins(), 30, &mut rng);
        for kind in PolicyKind::ALL {
            let p = ctx.step_policy(kind, &counts, None).primary;
            let next = propagate_mean_field(ctx.theta.as_slice(), &p).unwrap();
            for (a, b) in next.iter().zip(ctx.theta.as_slice()) {
                prop_assert!((a - b).abs() <= REQUIREMENT_TOL);
            }
        }
    }

    #[test]
    fn async_masks_keep_stationarity_properties((r, c, h) in grid_dims(), seed in any::<u64>(), frac in 0.0f64..0.9) {
        let ctx = context(r, c, h, seed, GuidanceConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let counts = random_counts(ctx.n_bins(), 30, &mut rng);
        let mask = ReadinessMask::random_blocked(ctx.n_bins(), frac, &mut rng);
        for kind in PolicyKind::ALL {
            let p = ctx.step_policy(kind, &counts, None).primary;
            let pb = async_primary_matrix(&p, &mask, &ctx.topo);
            let rep = verify_async_properties(&pb, &ctx.theta);
            prop_assert!(rep.all_passed(), "{kind}: {rep:?}");
            // Masked step policy uses the same construction.
            let sp = ctx.step_policy(kind, &counts, Some(&mask));
            prop_assert_eq!(&sp.primary, &pb);
            for i in 0..ctx.n_bins() {
                if !mask.is_ready(i) {
                    prop_assert_eq!(sp.secondary_gain[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn quorum_gain_monotone(t in 0.01f64..0.5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let cfg = GuidanceConfig::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let g_lo = quorum_gain(lo, t, &cfg);
        let g_hi = quorum_gain(hi, t, &cfg);
        prop_assert!(g_lo <= g_hi);
        prop_assert!((0.0..=1.0).contains(&g_lo) && (0.0..=1.0).contains(&g_hi));
    }

    #[test]
    fn dobrushin_bounds_and_submultiplicative(n in 2usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_stochastic(n, &mut rng);
        let b = random_stochastic(n, &mut rng);
        let ab = &a * &b;
        prop_assert!(dobrushin_coefficient(&ab) <= dobrushin_coefficient(&a) * dobrushin_coefficient(&b) + 1e-12);
        prop_assert!(ergodicity_coefficient(&ab) <= dobrushin_coefficient(&a) * dobrushin_coefficient(&b) + 1e-12);
        prop_assert!(ergodicity_coefficient(&a) <= dobrushin_coefficient(&a) + 1e-12);
    }
}

#[test]
fn quorum_gain_half_at_quorum() {
    let cfg = GuidanceConfig::default();
    let g = quorum_gain(cfg.quorum * 0.2, 0.2, &cfg);
    assert!((g - 0.5).abs() < 1e-12);
}

#[test]
fn star_tree_and_tree_plus_edge_have_rank_three() {
    let theta = DesiredDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let star = BinTopology::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    assert_eq!(b_matrix_rank(&star, &theta).unwrap(), 3);
    let plus = BinTopology::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 3)]).unwrap();
    assert_eq!(b_matrix_rank(&plus, &theta).unwrap(), 3);
}

#[test]
fn ergodicity_proper() {
    let same = DMatrix::from_row_slice(2, 3, &[0.2, 0.3, 0.5, 0.2, 0.3, 0.5]);
    assert_eq!(ergodicity_coefficient(&same), 0.0);
    let m = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.2, 0.8]);
    assert!((ergodicity_coefficient(&m) - 0.4).abs() < 1e-15);
}

#[test]
fn column_spread_is_not_submultiplicative() {
    let a = DMatrix::from_row_slice(4, 4, &[
        0.5, 0.5, 0.0, 0.0,
        0.0, 0.0, 0.5, 0.5,
        0.5, 0.5, 0.0, 0.0,
        0.0, 0.0, 0.5, 0.5,
    ]);
    let b = DMatrix::from_row_slice(4, 4, &[
        1.0, 0.0, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
    ]);
    assert_eq!(ergodicity_coefficient(&a), 0.5);
    assert_eq!(ergodicity_coefficient(&b), 1.0);
    assert_eq!(ergodicity_coefficient(&(&a * &b)), 1.0);
    assert_eq!(dobrushin_coefficient(&a), 1.0);
}
