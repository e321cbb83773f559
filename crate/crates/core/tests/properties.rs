mod common;

use machlimit::compressible;
use machlimit::fields::WallRule;
use machlimit::harness::fit_rate;
use machlimit::operators;
use machlimit::{AxisBc, Field, GridSpec, Location};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = GridSpec> {
    let bc = prop_oneof![Just(AxisBc::Periodic), Just(AxisBc::SlipWalls)];
    (2usize..=3, prop::collection::vec((4usize..10, 0.5f64..2.0, bc), 3)).prop_map(|(dim, axes)| {
        let axes = &axes[..dim];
        GridSpec {
            dim,
            cells: axes.iter().map(|a| a.0).collect(),
            lengths: axes.iter().map(|a| a.1).collect(),
            axis_bc: axes.iter().map(|a| a.2).collect(),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn div_and_grad_are_negative_adjoints(spec in shape(), seed in any::<u64>(), alpha in 0.0f64..2.0) {
        let g = common::grid(&spec, alpha);
        let mut r = common::rng(seed);
        let u = common::random_velocity(&g, &mut r, 1.0, alpha);
        let s = common::random_scalar(&g, &mut r, 1.0);
        let (du, gs) = (operators::div_h(&u), operators::grad_h(&s));
        let scale = du.norm_l2() * s.norm_l2() + u.norm_l2() * gs.norm_l2();
        prop_assert!((du.dot(&s).unwrap() + u.dot(&gs).unwrap()).abs() <= 1e-13 * scale);
    }

    #[test]
    fn sobolev_norms_are_ordered(spec in shape(), seed in any::<u64>()) {
        let g = common::grid(&spec, 0.0);
        let mut r = common::rng(seed);
        let s = common::random_scalar(&g, &mut r, 1.0);
        let n = operators::norms(&s, 2).unwrap();
        prop_assert!(n.l2 <= n.h1 && n.h1 <= n.h2);
        let u = common::random_velocity(&g, &mut r, 1.0, 0.0);
        let n = operators::norms(&u, 2).unwrap();
        prop_assert!(n.l2 <= n.h1 && n.h1 <= n.h2 && n.boundary_l2 >= 0.0);
    }

    #[test]
    fn robin_ghosts_satisfy_the_mirror_relation(n in 4usize..12, seed in any::<u64>(), alpha in 0.0f64..5.0) {
        let g = common::grid(&GridSpec::channel(2, n), alpha);
        let mut r = common::rng(seed);
        let mut f = Field::zeros(&g, Location::face(0));
        common::noise(&mut f, &mut r, 1.0);
        f.fill_ghosts(|_| WallRule::Robin(alpha));
        let h = g.spacing()[1];
        let top = n as isize;
        for i in 0..n as isize {
            for k in 1..=2isize {
                let d = (2 * k - 1) as f64 * h;
                for (ghost, inner) in [(-k, k - 1), (top - 1 + k, top - k)] {
                    let (ug, ui) = (f.get([i, ghost, 0]), f.get([i, inner, 0]));
                    prop_assert!(((ug - ui) / d + alpha * (ug + ui)).abs() <= 1e-12 * (1.0 + ui.abs() / d));
                }
            }
        }
    }

    #[test]
    fn helmholtz_preserves_the_mean(seed in any::<u64>(), kappa in 1e-4f64..0.1, closed in any::<bool>()) {
        let spec = if closed { GridSpec::closed_box(2, 12) } else { GridSpec::channel(2, 12) };
        let g = common::grid(&spec, 0.0);
        let mut r = common::rng(seed);
        let rhs = common::random_scalar(&g, &mut r, 1.0);
        let mut coeff = common::random_scalar(&g, &mut r, 0.5);
        coeff.add_constant(1.0);
        let (s, _) = compressible::helmholtz_solve(&rhs, &coeff, kappa).unwrap();
        prop_assert!((s.mean() - rhs.mean()).abs() <= 1e-10);
        let back = compressible::helmholtz_apply(&s, &coeff, kappa);
        prop_assert!(common::max_diff(&back, &rhs) <= 1e-7);
    }

    #[test]
    fn fit_rate_is_scale_invariant(rate in 0.2f64..3.0, c in 1e-6f64..1e3) {
        let eps = [0.2f64, 0.1, 0.05, 0.025];
        let errs: Vec<f64> = eps.iter().map(|e| c * e.powf(rate)).collect();
        prop_assert!((fit_rate(&errs, &eps).unwrap() - rate).abs() <= 1e-10);
    }
}
