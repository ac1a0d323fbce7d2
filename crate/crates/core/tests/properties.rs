use flowlab::chaining::{
    adjacent_max, brownian_field, chaining_series, ChainingConfig, DyadicSpatialGrid, Euclidean, GridField,
    LevelTable, Scaled,
};
use flowlab::drift::{DriftSpec, Exponent, ExponentBundle};
use flowlab::flow::{composition_defect, residual, solve, solve_endpoint, StartSet};
use flowlab::moments::pair_moment;
use flowlab::stats;
use flowlab::{DyadicBrownianPath, DyadicTime};
use proptest::prelude::*;

fn drifts() -> Vec<DriftSpec> {
    vec![
        DriftSpec::zero(1),
        DriftSpec::sign(1, None),
        DriftSpec::lipschitz(1, -1.5),
        DriftSpec::checkerboard(1, 3, None),
        DriftSpec::holder(1, 0.5, 0.1, 1.0, 4.0, Exponent::Finite(6.0), Exponent::Finite(3.0)).unwrap(),
    ]
}

/// Three ordered dyadic times on the level-`m` grid.
fn ordered_times(m: u32) -> impl Strategy<Value = (DyadicTime, DyadicTime, DyadicTime)> {
    let top = 1u64 << m;
    (0..=top, 0..=top, 0..=top).prop_map(move |(a, b, c)| {
        let mut v = [a, b, c];
        v.sort_unstable();
        (DyadicTime::new(v[0], m), DyadicTime::new(v[1], m), DyadicTime::new(v[2], m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn window_matches_full_path(seed in any::<u64>(), level in 1u32..12, a in 0u64..64, len in 1u64..64) {
        let full = DyadicBrownianPath::generate(seed, 2, 1.5, level).unwrap();
        let top = 1u64 << level;
        let a = a % top;
        let b = (a + len).min(top);
        let w = DyadicBrownianPath::generate_window(
            seed, 2, 1.5, level, DyadicTime::new(a, level), DyadicTime::new(b, level),
        ).unwrap();
        for j in a..=b {
            prop_assert_eq!(w.point(level, j), full.point(level, j));
        }
    }

    #[test]
    fn refinement_keeps_coarse_values(seed in any::<u64>(), level in 0u32..10, extra in 1u32..4) {
        let coarse = DyadicBrownianPath::generate(seed, 1, 1.0, level).unwrap();
        let fine = coarse.refined_to(level + extra).unwrap();
        let direct = DyadicBrownianPath::generate(seed, 1, 1.0, level + extra).unwrap();
        prop_assert_eq!(fine.values(), direct.values());
        for j in 0..=(1u64 << level) {
            prop_assert_eq!(fine.point(level, j), coarse.point(level, j));
        }
    }

    #[test]
    fn composition_defect_is_zero(seed in any::<u64>(), which in 0usize..5, x in -2.0f64..2.0,
                                  (s, u, t) in ordered_times(8)) {
        let drift = &drifts()[which];
        let path = DyadicBrownianPath::generate(seed, 1, 1.0, 8).unwrap();
        prop_assert_eq!(composition_defect(drift, &path, s, u, t, &[x], 8).unwrap(), 0.0);
    }

    #[test]
    fn solver_output_has_zero_residual(seed in any::<u64>(), which in 0usize..5, x in -2.0f64..2.0,
                                       (s, _u, t) in ordered_times(7)) {
        let drift = &drifts()[which];
        let path = DyadicBrownianPath::generate(seed, 1, 1.0, 7).unwrap();
        let traj = solve(drift, &path, s, t, &[x], 7).unwrap();
        prop_assert_eq!(residual(drift, &path, &traj).unwrap(), 0.0);
        prop_assert_eq!(traj.endpoint(), &solve_endpoint(drift, &path, s, t, &[x], 7).unwrap()[..]);
    }

    #[test]
    fn lipschitz_flow_is_order_preserving(seed in any::<u64>(), x in -1.0f64..1.0, dx in 0.0f64..0.5) {
        // the Euler map is increasing once rate * Δ < 1
        let drift = DriftSpec::lipschitz(1, 2.0);
        let path = DyadicBrownianPath::generate(seed, 1, 1.0, 6).unwrap();
        let a = solve(&drift, &path, DyadicTime::ZERO, DyadicTime::ONE, &[x], 6).unwrap();
        let b = solve(&drift, &path, DyadicTime::ZERO, DyadicTime::ONE, &[x + dx], 6).unwrap();
        for ((_, p), (_, q)) in a.iter().zip(b.iter()) {
            prop_assert!(p[0] <= q[0]);
        }
    }

    #[test]
    fn adjacent_max_is_monotone_in_the_metric(seed in any::<u64>(), n in 1u32..8, c in 1.0f64..5.0) {
        let path = DyadicBrownianPath::generate(seed, 1, 1.0, n).unwrap();
        let field = brownian_field(&path, n).unwrap();
        let y = adjacent_max(&field, &Euclidean);
        prop_assert!(adjacent_max(&field, &Scaled(Euclidean, c)) >= y);
        prop_assert!(y >= 0.0);
    }

    #[test]
    fn chaining_series_invariants(values in prop::collection::vec(prop::collection::vec(0.0f64..3.0, 1..8), 1..7),
                                  alpha in 0.05f64..1.0, a in 1.0f64..10.0) {
        // nested start sets {0, 1/8, 2/8, ...}
        let mut values = values;
        values.sort_by_key(Vec::len);
        let tables: Vec<LevelTable> = values
            .iter()
            .enumerate()
            .map(|(i, v)| LevelTable {
                n: i as u32 + 3,
                starts: (0..v.len() as u64).map(|k| DyadicTime::new(k, 3)).collect(),
                values: v.clone(),
            })
            .collect();
        let rep = chaining_series(&tables, &ChainingConfig::new(alpha, a, 1.0)).unwrap();
        for w in rep.partial_sums.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        for t in &tables {
            for y in &t.values {
                prop_assert!(rep.holder_constant >= (alpha * t.n as f64).exp2() * y);
            }
        }
    }

    #[test]
    fn grid_field_roundtrip(n in 1u32..4, d in 1usize..3) {
        let grid = DyadicSpatialGrid::unit(n, d);
        prop_assert_eq!(grid.len(), 1usize << (n as usize * d));
        let field = GridField::from_fn(grid.clone(), d, |p, out| out.copy_from_slice(p));
        prop_assert_eq!(adjacent_max(&field, &Euclidean), (-(n as f64)).exp2());
    }

    #[test]
    fn dyadic_time_roundtrip(num in 0u64..(1 << 20), level in 0u32..20) {
        let t = DyadicTime::new(num, level);
        prop_assert_eq!(DyadicTime::from_f64(t.to_f64()).unwrap(), t);
        let u = DyadicTime::new(num + 1, level);
        prop_assert!(t < u);
    }

    #[test]
    fn exponent_bundle_relations(beta in 0.05f64..1.0, q2 in 2.05f64..40.0, extra in 0.0f64..40.0) {
        let q1 = q2 + extra;
        match ExponentBundle::derive(beta, Exponent::Finite(q1), Exponent::Finite(q2), None) {
            Ok(b) => {
                let lhs = beta * (1.0 - 1.0 / q1) + (1.0 - 1.0 / q2);
                prop_assert!(lhs > 1.0);
                prop_assert!((b.gamma - (lhs - 1.0)).abs() < 1e-12);
                prop_assert!(b.delta > 0.0 && b.delta < b.gamma);
                prop_assert!(b.alpha > 0.0 && b.alpha < 1.0);
                prop_assert!((b.alpha - (1.0 + b.delta) / (1.0 + b.gamma)).abs() < 1e-15);
            }
            Err(flowlab::Error::HypothesisViolation { inequality, .. }) => {
                prop_assert_eq!(inequality, "β/p₁ + 1/p₂ > 1");
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn quantiles_stay_in_range(xs in prop::collection::vec(-1e3f64..1e3, 1..50), q in 0.0f64..=1.0) {
        let v = stats::quantile(&xs, q);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo && v <= hi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn moment_estimates_ignore_seed_order(base in any::<u32>(), rot in 1usize..39) {
        let drift = DriftSpec::sign(1, None);
        let seeds: Vec<u64> = (0..40).map(|i| base as u64 + i).collect();
        let mut rotated = seeds.clone();
        rotated.rotate_left(rot);
        let starts = StartSet::dyadic(1.0).unwrap().level(1).unwrap();
        let ys = vec![vec![0.1], vec![0.3]];
        let a = pair_moment(&drift, 3.0, &[-0.05], &ys, &starts, 6, 1.0, &seeds).unwrap();
        let b = pair_moment(&drift, 3.0, &[-0.05], &ys, &starts, 6, 1.0, &rotated).unwrap();
        prop_assert_eq!(a, b);
    }
}
