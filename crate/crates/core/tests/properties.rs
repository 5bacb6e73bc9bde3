use nnl_core::analysis;
use nnl_core::kernel::distance;
use nnl_core::solve::{self, SolverOptions};
use nnl_core::{build_grid, Discretization, Domain, Kernel};
use proptest::prelude::*;

fn disc(kernel: Kernel, cells: usize, radius: f64) -> Discretization {
    let h = 1.0 / cells as f64;
    let grid = build_grid(&Domain::interval(0.0, 1.0).unwrap(), &kernel, h, radius, None).unwrap();
    Discretization::new(grid, kernel).unwrap()
}

fn truncated(delta: f64, cells: usize) -> Discretization {
    disc(Kernel::truncated(1, delta, 1.0).unwrap(), cells, delta)
}

fn skewed(eps: f64, cells: usize) -> Discretization {
    let k = Kernel::custom(1, false, Some(0.5), None, "skewed", move |y, x| {
        if distance(x, y) < 0.5 {
            1.0 + eps * (y[0] - x[0]).signum()
        } else {
            0.0
        }
    })
    .unwrap();
    disc(k, cells, 0.5)
}

fn values(n: usize, seed: &[f64]) -> Vec<f64> {
    (0..n).map(|i| seed[i % seed.len()] * (1.0 + 0.1 * i as f64).sin()).collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

prop_compose! {
    fn setup()(delta in 0.15f64..0.9, cells in prop::sample::select(vec![8usize, 16, 24]),
               seed in prop::collection::vec(-1.0f64..1.0, 7)) -> (f64, usize, Vec<f64>) {
        (delta, cells, seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetric_kernels_give_symmetric_tables((delta, cells, _) in setup()) {
        let d = truncated(delta, cells);
        prop_assert_eq!(d.table().as_operator().max_asymmetry(), 0.0);
        let k = d.stiffness().unwrap();
        prop_assert!(k.max_asymmetry() <= 1e-15);
    }

    #[test]
    fn stiffness_kills_constants_and_is_nonnegative((delta, cells, seed) in setup()) {
        let d = truncated(delta, cells);
        let k = d.stiffness().unwrap();
        let u = values(d.n(), &seed);
        let ones = vec![1.0; d.n()];
        let scale = k.form(&u, &u).abs().max(k.diagonal().iter().sum::<f64>());
        prop_assert!(k.form(&u, &ones).abs() <= 1e-13 * scale);
        prop_assert!(k.form(&u, &u) >= -1e-14 * scale);
        let m: f64 = d.omega_mass().iter().zip(&u).map(|(m, x)| m * x * x).sum();
        prop_assert!(m >= 0.0);
    }

    #[test]
    fn divergence_and_green_identities(eps in 0.0f64..0.3, cells in prop::sample::select(vec![8usize, 16, 32]),
                                       seed in prop::collection::vec(-1.0f64..1.0, 5)) {
        let d = skewed(eps, cells);
        let u = values(d.n(), &seed);
        let v: Vec<f64> = u.iter().map(|x| x * x - 0.3).collect();
        prop_assert!(analysis::divergence_residual(&d, &u).unwrap().abs() <= 1e-13 * sup(&u).max(1e-300) * d.n() as f64);
        let g = analysis::verify_green_identity(&d, &u, &v).unwrap();
        prop_assert!(g.full <= 1e-12 * g.scale);
    }

    #[test]
    fn symmetric_form_green_identity((delta, cells, seed) in setup()) {
        let d = truncated(delta, cells);
        let u = values(d.n(), &seed);
        let v: Vec<f64> = u.iter().rev().copied().collect();
        let g = analysis::verify_green_identity(&d, &u, &v).unwrap();
        prop_assert!(g.special.unwrap() <= 1e-12 * g.scale);
    }

    #[test]
    fn manufactured_solution_is_recovered((delta, cells, seed) in setup()) {
        let d = truncated(delta, cells);
        let mut exact = values(d.n(), &seed);
        let f = d.apply_l(&exact).unwrap();
        let g = d.apply_n(&exact).unwrap();
        solve::mean_center(&d, &mut exact);
        let r = solve::solve_neumann(&d, &f, &g, &SolverOptions::default()).unwrap();
        let err = r.u.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err <= 1e-8 * sup(&exact).max(1e-12));
    }

    #[test]
    fn robin_endpoints_and_identity((delta, cells, seed) in setup(), a in 0.0f64..1.0) {
        let d = truncated(delta, cells);
        let n = d.n();
        let g = values(n, &seed);
        let one = solve::robin_transform(&d, &vec![1.0; n], &g, 1e-12).unwrap();
        for i in d.grid().omega() {
            for (j, w) in d.table().row(i) {
                if d.is_omega(j) && i != j {
                    prop_assert_eq!(one.pair.get(i, j), w);
                }
            }
        }
        let zero = solve::robin_transform(&d, &vec![0.0; n], &g, 1e-12).unwrap();
        prop_assert!(zero.potential.iter().all(|&p| p == 0.0));
        let alpha: Vec<f64> = (0..n).map(|i| (a + 0.37 * i as f64).fract()).collect();
        let set = solve::robin_transform(&d, &alpha, &g, 1e-12).unwrap();
        let u: Vec<f64> = values(d.n_omega(), &seed).iter().map(|x| x + 0.5).collect();
        let r = analysis::verify_robin_identity(&d, &set, &u).unwrap();
        prop_assert!(r.interior <= 1e-10 && r.boundary <= 1e-10);
    }

    #[test]
    fn trace_weight_mass_is_bounded((delta, cells, _) in setup(), c in 0.0f64..3.0) {
        let d = truncated(delta, cells);
        let w = analysis::trace_weight(&d, c).unwrap();
        let mass: f64 = d.grid().gamma().map(|k| w[k] * d.volume(k)).sum();
        prop_assert!(mass <= d.grid().omega_measure() * (1.0 + 1e-12));
        prop_assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn extension_is_bounded((delta, cells, seed) in setup(), c in 0.05f64..3.0) {
        let d = truncated(delta, cells);
        let v = values(d.n(), &seed);
        let (lhs, rhs) = analysis::extension_bound(&d, &v, c).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        let (a, b) = analysis::extension_norm_identity(&d, &v).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn regional_embeddings_hold((delta, cells, seed) in setup()) {
        let d = truncated(delta, cells);
        let u = values(d.n(), &seed);
        let v: Vec<f64> = u.iter().map(|x| 1.0 - x).collect();
        let e = analysis::regional_embeddings(&d, &u, &v).unwrap();
        prop_assert!(e.isometry_residual <= 1e-12 * e.isometry_scale);
        prop_assert!(e.restriction_ratio <= 2.0);
        prop_assert!(e.extension_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn mean_center_is_idempotent((delta, cells, seed) in setup()) {
        let d = truncated(delta, cells);
        let mut u = values(d.n(), &seed);
        solve::mean_center(&d, &mut u);
        let mean: f64 = d.grid().omega().map(|i| u[i] * d.volume(i)).sum();
        prop_assert!(mean.abs() <= 1e-14);
        let mut again = u.clone();
        solve::mean_center(&d, &mut again);
        prop_assert!(u.iter().zip(&again).all(|(a, b)| (a - b).abs() <= 1e-15));
    }
}
