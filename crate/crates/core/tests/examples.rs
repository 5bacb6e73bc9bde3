//! Worked examples with closed-form or independently computed answers.

use nnl_core::analysis::{self, EigenOptions};
use nnl_core::assembly::pair_weight;
use nnl_core::kernel::{self, distance};
use nnl_core::solve::{self, SolverOptions};
use nnl_core::{build_grid, Aabb, CellTag, Discretization, Domain, Kernel, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(kernel: Kernel, h: f64, radius: f64) -> Discretization {
    let grid = build_grid(&Domain::interval(0.0, 1.0).unwrap(), &kernel, h, radius, None).unwrap();
    Discretization::new(grid, kernel).unwrap()
}

fn k1(h: f64) -> Discretization {
    unit(Kernel::truncated(1, 0.5, 1.0).unwrap(), h, 0.5)
}

fn skewed_kernel(eps: f64) -> Kernel {
    Kernel::custom(1, false, Some(0.5), None, "skewed", move |y, x| {
        if distance(x, y) < 0.5 {
            1.0 + eps * (y[0] - x[0]).signum()
        } else {
            0.0
        }
    })
    .unwrap()
}

fn random(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

fn cell_at(d: &Discretization, x: f64) -> usize {
    d.grid().locate([x, 0.0]).expect("point lies in an active cell")
}

#[test]
fn transpose_example() {
    let k = Kernel::custom(1, false, None, None, "table", |x, y| if x[0] < y[0] { 2.0 } else { 5.0 }).unwrap();
    let t = kernel::transpose(&k);
    let (a, b) = ([0.0, 0.0], [1.0, 0.0]);
    assert_eq!(k.eval(a, b), 2.0);
    assert_eq!(t.eval(a, b), 5.0);
    let tt = kernel::transpose(&t);
    assert_eq!(tt.eval(a, b), k.eval(a, b));
    assert_eq!(tt.eval(b, a), k.eval(b, a));
}

#[test]
fn regional_kernel_has_no_boundary_cells() {
    let omega = Domain::interval(0.0, 1.0).unwrap();
    let k = kernel::regional(&Kernel::truncated(1, 0.5, 1.0).unwrap(), &omega).unwrap();
    let g = build_grid(&omega, &k, 0.25, 0.5, None).unwrap();
    assert_eq!(g.n_gamma(), 0);
    assert_eq!(g.n_omega(), 4);
}

#[test]
fn symmetric_kernels_have_no_one_sided_cells() {
    for h in [0.25, 0.125, 1.0 / 64.0] {
        assert_eq!(k1(h).grid().n_gamma_hat_only(), 0);
    }
    let d = unit(Kernel::fractional(1, 0.25, 1.0).unwrap(), 0.5, 2.0);
    assert_eq!(d.grid().n_gamma_hat_only(), 0);
}

#[test]
fn boundary_tags_follow_overlap() {
    let d = k1(0.25);
    let g = d.grid();
    assert_eq!(g.tag(cell_at(&d, -0.125)), CellTag::Gamma);
    assert_eq!(g.tag(cell_at(&d, -0.375)), CellTag::Gamma);
    assert_eq!(g.tag(cell_at(&d, 1.375)), CellTag::Gamma);
}

#[test]
fn omega_gamma_interaction_converges() {
    // ∫_Ω∫_Γ γ = 2·∫_0^{1/2}(1/2 − x) dx = 0.25
    let mut last = f64::INFINITY;
    for m in [8.0, 16.0, 32.0, 64.0] {
        let d = k1(1.0 / m);
        let mut s = 0.0;
        for i in d.grid().omega() {
            s += d.table().row(i).filter(|&(k, _)| d.is_gamma(k)).map(|(_, w)| w).sum::<f64>();
        }
        let err = (s - 0.25).abs();
        assert!(err <= last, "h = 1/{m}: error {err} after {last}");
        assert!(err <= 0.15 / m, "h = 1/{m}: error {err}");
        last = err;
    }
}

/// `ℒu` from pair weights evaluated directly for every pair of active cells.
fn brute_force_l(d: &Discretization, u: &[f64]) -> Vec<f64> {
    let g = d.grid();
    let mut out = vec![0.0; d.n()];
    for i in g.omega() {
        let mut s = 0.0;
        for j in 0..d.n() {
            if i == j {
                continue;
            }
            let forward = pair_weight(d.kernel(), 1, g.h(), g.center(i), g.center(j)).unwrap();
            let backward = pair_weight(d.kernel(), 1, g.h(), g.center(j), g.center(i)).unwrap();
            s += u[i] * forward - u[j] * backward;
        }
        out[i] = s / d.volume(i);
    }
    out
}

#[test]
fn operator_matches_brute_force() {
    for d in [k1(1.0 / 32.0), unit(skewed_kernel(0.1), 1.0 / 32.0, 0.5)] {
        let u = random(11, d.n());
        let lu = d.apply_l(&u).unwrap();
        let oracle = brute_force_l(&d, &u);
        let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup_diff(&lu, &oracle) <= 1e-10 * scale);
    }
}

#[test]
fn operator_annihilates_constants_and_odd_fields() {
    let d = k1(1.0 / 64.0);
    let lu = d.apply_l(&vec![3.0; d.n()]).unwrap();
    assert!(lu.iter().all(|v| v.abs() < 1e-12));
    let nu = d.apply_n(&vec![3.0; d.n()]).unwrap();
    assert!(nu.iter().all(|v| v.abs() < 1e-12));
    let x = d.sample(|p| p[0]);
    let lx = d.apply_l(&x).unwrap();
    // cells adjacent to 0.5 see a full horizon on both sides
    for c in [0.5 - 1.0 / 128.0, 0.5 + 1.0 / 128.0] {
        assert!(lx[cell_at(&d, c)].abs() < 1e-12);
    }
}

#[test]
fn flux_of_lifted_data_returns_data() {
    let d = k1(1.0 / 32.0);
    let g = d.sample(|p| if p[0] < 0.0 { 1.0 + p[0] * p[0] } else { -p[0] });
    let hom = solve::transform_nonhom_to_hom(&d, &vec![0.0; d.n()], &g).unwrap();
    let ext = analysis::zero_extension(&d, &hom.g_tilde).unwrap();
    let nu = d.apply_n(&ext).unwrap();
    for k in d.grid().gamma() {
        assert!((nu[k] - g[k]).abs() <= 1e-13 * g[k].abs().max(1.0));
    }
    let none = solve::transform_nonhom_to_hom(&d, &d.sample(|p| p[0]), &vec![0.0; d.n()]).unwrap();
    assert!(none.g_tilde.iter().all(|&v| v == 0.0));
    assert_eq!(none.f_new, d.sample(|p| p[0]).iter().enumerate().map(|(i, v)| if d.is_omega(i) { *v } else { 0.0 }).collect::<Vec<_>>());
}

#[test]
fn mass_matrix_is_cell_volume() {
    let d = k1(0.25);
    let m = d.omega_mass();
    assert!(d.grid().omega().all(|i| m[i] == 0.25));
    assert_eq!(m.iter().sum::<f64>(), 1.0);
}

#[test]
fn nonsymmetric_form_reduces_to_stiffness() {
    let d = k1(1.0 / 16.0);
    let k = d.stiffness().unwrap().to_dense();
    let a0 = d.nonsym_form(&vec![0.0; d.n()]).unwrap().to_dense();
    assert!((&a0 - &k).abs().max() <= 1e-12);
    let a1 = d.nonsym_form(&vec![1.0; d.n()]).unwrap().to_dense();
    let mut km = k.clone();
    for i in d.grid().omega() {
        km[(i, i)] += d.volume(i);
    }
    assert!((&a1 - &km).abs().max() <= 1e-12);
}

#[test]
fn nonsymmetric_part_scales_with_kernel() {
    let base = unit(skewed_kernel(0.1), 1.0 / 16.0, 0.5);
    let double = unit(
        Kernel::custom(1, false, Some(0.5), None, "skewed-x2", |y, x| {
            if distance(x, y) < 0.5 {
                2.0 * (1.0 + 0.1 * (y[0] - x[0]).signum())
            } else {
                0.0
            }
        })
        .unwrap(),
        1.0 / 16.0,
        0.5,
    );
    let alpha = vec![0.7; base.n()];
    let a = base.nonsym_form(&alpha).unwrap().to_dense();
    let b = double.nonsym_form(&alpha).unwrap().to_dense();
    let skew_a = 0.5 * (&a - a.transpose());
    let skew_b = 0.5 * (&b - b.transpose());
    assert!(skew_a.abs().max() > 0.0);
    assert!((&skew_b - 2.0 * &skew_a).abs().max() <= 1e-12 * skew_b.abs().max());
}

#[test]
fn trace_weights_match_closed_forms() {
    // y = −0.25 is a cell center when 1/h is an odd multiple of 2
    let err = |m: f64| {
        let d = k1(1.0 / m);
        let y = cell_at(&d, -0.25);
        assert!((d.grid().center(y)[0] + 0.25).abs() < 1e-12);
        (analysis::trace_weight(&d, 1.0).unwrap()[y] - 1.2f64.ln()).abs()
    };
    let (coarse, fine) = (err(50.0), err(250.0));
    assert!(fine < 1e-3 && fine < coarse / 4.0, "{coarse} then {fine}");
    let d = k1(1.0 / 250.0);
    let y = cell_at(&d, -0.25);
    let w = analysis::trace_weight(&d, 1.0).unwrap();
    let full = analysis::trace_weight_full(&d);
    assert!((full[y] - 0.25).abs() < 1e-3, "{}", full[y]);
    let mass: f64 = d.grid().gamma().map(|k| w[k] * d.volume(k)).sum();
    assert!(mass <= 1.0);
}

#[test]
fn w_norm_of_constants_and_zero() {
    let d = k1(1.0 / 32.0);
    let w = analysis::trace_weight(&d, 1.0).unwrap();
    let weighted: f64 = d.grid().gamma().map(|k| w[k] * d.volume(k)).sum();
    let v = vec![1.5; d.n()];
    let got = analysis::w_norm_sq(&d, &v, 1.0).unwrap();
    assert!((got - 2.25 * weighted).abs() <= 1e-14 * got);
    assert_eq!(analysis::w_norm_sq(&d, &vec![0.0; d.n()], 1.0).unwrap(), 0.0);
}

#[test]
fn w_norm_of_left_indicator_matches_direct_sum() {
    let d = k1(1.0 / 32.0);
    let g = d.grid();
    let v = d.sample(|p| if p[0] < 0.0 { 1.0 } else { 0.0 });
    let kern = d.kernel();
    let h = g.h();
    // point-sampled triple sum with the same cell resolution
    let gamma: Vec<usize> = g.gamma().collect();
    let density = |x: [f64; 2]| gamma.iter().map(|&k| kern.eval(g.center(k), x) * h).sum::<f64>();
    let mut direct = 0.0;
    for &k in &gamma {
        let wk: f64 = g.omega().map(|i| kern.eval(g.center(k), g.center(i)) * h / (density(g.center(i)) + 1.0)).sum();
        direct += v[k] * v[k] * wk * h;
    }
    for i in g.omega() {
        let x = g.center(i);
        let denom = density(x) + 1.0;
        for &k in &gamma {
            for &l in &gamma {
                let a = kern.eval(g.center(k), x);
                let b = kern.eval(g.center(l), x);
                direct += (v[k] - v[l]).powi(2) * a * b * h * h * h / denom;
            }
        }
    }
    let got = analysis::w_norm_sq(&d, &v, 1.0).unwrap();
    // the pair table averages straddling pairs, the direct sum samples centers
    assert!((got - direct).abs() <= 0.05 * direct, "{got} vs {direct}");
}

#[test]
fn compatibility_defects() {
    let d = k1(1.0 / 64.0);
    let zero = vec![0.0; d.n()];
    let odd = d.sample(|p| p[0] - 0.5);
    assert!(d.load(&odd, &zero).unwrap().iter().sum::<f64>().abs() <= 1e-15);
    let r = solve::solve_neumann(&d, &odd, &zero, &SolverOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    let one = vec![1.0; d.n()];
    assert!((d.load(&one, &zero).unwrap().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    let u = random(5, d.n());
    let f = d.apply_l(&u).unwrap();
    let g = d.apply_n(&u).unwrap();
    assert!(d.load(&f, &g).unwrap().iter().sum::<f64>().abs() <= 1e-12);
}

#[test]
fn incompatible_solution_is_the_projected_solution() {
    let d = k1(1.0 / 32.0);
    let one = vec![1.0; d.n()];
    let zero = vec![0.0; d.n()];
    let r = solve::solve_neumann(&d, &one, &zero, &SolverOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Incompatible);
    // f − f_Ω vanishes, so uᵀKv = 0 for every v
    let k = d.stiffness().unwrap();
    let ku = k.matvec(&r.u);
    assert!(ku.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn large_regularization_tends_to_scaled_source() {
    let d = k1(1.0 / 32.0);
    let kappa = vec![1e6; d.n()];
    let f = d.sample(|p| 1e6 * (2.0 + p[0]));
    let r = solve::solve_regularized(&d, &f, &kappa, &SolverOptions::default()).unwrap();
    let target = (0..d.n_omega()).map(|i| f[i] / 1e6).fold(0.0f64, f64::max);
    let got = r.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((got - target).abs() <= 0.01 * target);
}

#[test]
fn regularized_form_is_bounded_below() {
    // 𝔅(u,u) + ∫κu² ≥ min{½, κ} (∫_Ω u² + seminorm)
    let d = k1(1.0 / 32.0);
    for kappa in [0.1, 0.5, 2.0] {
        let mut a = d.stiffness().unwrap().to_dense();
        for i in d.grid().omega() {
            a[(i, i)] += kappa * d.volume(i);
        }
        let b = d.v_gram().to_dense();
        let mu = nnl_core::linalg::generalized_eigenvalues(&a, &b).unwrap();
        assert!(mu[0] >= 0.5f64.min(kappa) * (1.0 - 1e-10), "kappa = {kappa}: {}", mu[0]);
    }
}

#[test]
fn nonsymmetric_solution_is_continuous_in_asymmetry() {
    let opts = SolverOptions::default();
    let solve = |eps: f64| {
        let d = unit(skewed_kernel(eps), 1.0 / 32.0, 0.5);
        let f = d.sample(|p| 1.0 + p[0]);
        solve::solve_nonsymmetric(&d, &f, &vec![1.0; d.n()], &opts).unwrap().u
    };
    let base = solve(0.0);
    let small = sup_diff(&solve(1e-3), &base);
    let large = sup_diff(&solve(1e-2), &base);
    assert!(small > 0.0);
    let ratio = large / small;
    assert!((5.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn zero_data_give_zero_solutions() {
    let d = k1(1.0 / 32.0);
    let zero = vec![0.0; d.n()];
    let opts = SolverOptions::default();
    let ns = solve::solve_nonsymmetric(&d, &zero, &vec![1.0; d.n()], &opts).unwrap();
    assert!(ns.u.iter().all(|&v| v == 0.0));
    let dir = solve::solve_dirichlet(&d, &zero, None, &opts).unwrap();
    assert!(dir.u.iter().all(|&v| v == 0.0));
}

#[test]
fn dirichlet_operator_is_positive_definite_for_fractional_kernel() {
    let d = unit(Kernel::fractional(1, 0.25, 1.0).unwrap(), 1.0 / 32.0, 2.0);
    let omega: Vec<usize> = d.grid().omega().collect();
    let k0 = d.stiffness().unwrap().submatrix(&omega).to_dense();
    assert!(nnl_core::linalg::sym_eigenvalues(&k0)[0] > 0.0);
    let f = d.sample(|p| p[0]);
    let r = solve::solve_dirichlet(&d, &f, None, &SolverOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
}

#[test]
fn pinned_robin_data_fix_boundary_values() {
    let d = k1(1.0 / 32.0);
    let g = d.sample(|p| p[0].sin());
    let set = solve::robin_transform(&d, &vec![1.0; d.n()], &g, 1e-12).unwrap();
    let f = d.sample(|p| 1.0 - p[0]);
    let r = solve::solve_robin(&d, &set, &f, &SolverOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    for k in d.grid().gamma() {
        assert!((r.u[k] - g[k]).abs() <= 1e-14);
    }
    let lu = d.apply_l(&r.u).unwrap();
    for i in d.grid().omega() {
        assert!((lu[i] - f[i]).abs() <= 1e-10);
    }
    let dir = solve::solve_dirichlet(&d, &f, Some(&g), &SolverOptions::default()).unwrap();
    assert!(sup_diff(&dir.u, &r.u) <= 1e-10);
}

#[test]
fn robin_identity_for_constant_state() {
    let d = k1(1.0 / 32.0);
    let alpha = d.sample(|p| 0.25 + 0.5 * p[0].abs().min(1.0));
    let g: Vec<f64> = alpha.iter().map(|a| 2.0 * a).collect();
    let set = solve::robin_transform(&d, &alpha, &g, 1e-12).unwrap();
    let r = analysis::verify_robin_identity(&d, &set, &vec![2.0; d.n_omega()]).unwrap();
    assert!(r.interior <= 1e-12 && r.boundary <= 1e-12);
}

#[test]
fn mean_center_properties() {
    let d = k1(1.0 / 32.0);
    let mut c = vec![4.0; d.n()];
    solve::mean_center(&d, &mut c);
    assert!(c.iter().all(|v| v.abs() < 1e-14));
    let mut u = random(9, d.n());
    solve::mean_center(&d, &mut u);
    let mean: f64 = d.grid().omega().map(|i| u[i] * d.volume(i)).sum();
    assert!(mean.abs() <= 1e-14);
    let again = {
        let mut v = u.clone();
        solve::mean_center(&d, &mut v);
        v
    };
    assert!(sup_diff(&u, &again) <= 1e-15);
}

#[test]
fn disconnected_regional_poincare_is_infinite() {
    let omega = Domain::new(1, vec![Aabb { lo: [0.0, 0.0], hi: [1.0, 0.0] }, Aabb { lo: [2.0, 0.0], hi: [3.0, 0.0] }]).unwrap();
    let k = kernel::regional(&Kernel::truncated(1, 0.5, 1.0).unwrap(), &omega).unwrap();
    let d = Discretization::new(build_grid(&omega, &k, 0.125, 0.5, None).unwrap(), k).unwrap();
    let p = analysis::estimate_poincare(&d, &EigenOptions::default()).unwrap();
    assert!(p.value.is_infinite());
}

#[test]
fn regional_friedrichs_is_infinite() {
    let omega = Domain::interval(0.0, 1.0).unwrap();
    let k = kernel::regional(&Kernel::truncated(1, 0.5, 1.0).unwrap(), &omega).unwrap();
    let d = Discretization::new(build_grid(&omega, &k, 0.125, 0.5, None).unwrap(), k).unwrap();
    let f = analysis::estimate_friedrichs(&d, &EigenOptions::default()).unwrap();
    assert!(f.value.is_infinite());
}

#[test]
fn constants_are_mesh_stable() {
    let eig = EigenOptions::default();
    let p32 = analysis::estimate_poincare(&k1(1.0 / 32.0), &eig).unwrap().value;
    let p64 = analysis::estimate_poincare(&k1(1.0 / 64.0), &eig).unwrap().value;
    assert!((p32 - p64).abs() <= 0.05 * p64, "{p32} vs {p64}");
    let f32 = analysis::estimate_friedrichs(&k1(1.0 / 32.0), &eig).unwrap().value;
    let f64_ = analysis::estimate_friedrichs(&k1(1.0 / 64.0), &eig).unwrap().value;
    assert!(f64_.is_finite() && f64_ >= 0.9 * f32, "{f32} vs {f64_}");
}

#[test]
fn sufficient_conditions() {
    let wide = unit(Kernel::truncated(1, 2.0, 1.0).unwrap(), 1.0 / 32.0, 2.0);
    assert!((analysis::poincare_condition_a(&wide) - 3.0).abs() <= 1e-12);
    let d = k1(1.0 / 32.0);
    assert_eq!(analysis::poincare_condition_a(&d), 0.0);
    assert!(analysis::poincare_condition_b(&d, 0.25) >= 0.75 - 1e-12);
    let zero = unit(Kernel::constant(1, 0.0).unwrap(), 0.125, 0.5);
    assert_eq!(analysis::poincare_condition_a(&zero), 0.0);
    assert_eq!(analysis::poincare_condition_b(&zero, 0.25), 0.0);
}

#[test]
fn trace_norm_bounds_sampled_ratios() {
    let d = k1(1.0 / 32.0);
    let t = analysis::trace_operator_norm(&d, 1.0, &EigenOptions::default()).unwrap();
    assert_eq!(t.bound, Some(2.0));
    assert!(t.value <= 2.0);
    let w = analysis::trace_weight(&d, 1.0).unwrap();
    let gram = d.v_gram();
    for seed in 0..20 {
        let u = random(100 + seed, d.n());
        let trace: f64 = d.grid().gamma().map(|k| u[k] * u[k] * w[k] * d.volume(k)).sum();
        assert!(trace / gram.form(&u, &u) <= t.value + 1e-10);
    }
    let mut inner = random(7, d.n());
    for k in d.grid().gamma() {
        inner[k] = 0.0;
    }
    assert_eq!(d.grid().gamma().map(|k| inner[k] * inner[k] * w[k]).sum::<f64>(), 0.0);
}

#[test]
fn zero_boundary_data_extend_to_zero() {
    let d = k1(1.0 / 32.0);
    let zero = vec![0.0; d.n()];
    let (a, b) = analysis::extension_norm_identity(&d, &zero).unwrap();
    assert_eq!((a, b), (0.0, 0.0));
    assert!(analysis::extension(&d, &zero, 1.0).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn extension_of_constants() {
    let d = k1(1.0 / 32.0);
    let e = analysis::extension(&d, &vec![2.5; d.n()], 0.0).unwrap();
    for i in d.grid().omega() {
        if d.gamma_density(i) > 0.0 {
            assert!((e[i] - 2.5).abs() <= 1e-14);
        }
    }
}

#[test]
fn surjectivity_quantities() {
    let (x, y) = analysis::trace_surjectivity(&k1(1.0 / 32.0), 1.0).unwrap();
    assert!(x.is_finite() && y.is_finite() && x > 0.0);
    let flat = unit(Kernel::constant(1, 1.0).unwrap(), 1.0 / 16.0, 0.5);
    let (x, y) = analysis::trace_surjectivity(&flat, 1.0).unwrap();
    assert!(x.abs() < 1e-14 && y.abs() < 1e-14);
    let (x, y) = analysis::trace_surjectivity(&unit(Kernel::fractional(1, 0.25, 1.0).unwrap(), 1.0 / 16.0, 2.0), 1.0).unwrap();
    assert!(x.is_finite() && y.is_finite());
}

#[test]
fn coercivity_margins() {
    let d = k1(1.0 / 32.0);
    let one = analysis::coercivity_margin(&d, &vec![1.0; d.n()]).unwrap();
    assert_eq!(one.ratio_bound, 1.0);
    assert!(one.margins.iter().all(|&m| (m - 1.0).abs() < 1e-12));
    let none = analysis::coercivity_margin(&d, &vec![0.0; d.n()]).unwrap();
    assert!(none.min_margin.abs() < 1e-12);
    let s = unit(skewed_kernel(0.1), 1.0 / 32.0, 0.5);
    let ones = vec![1.0; s.n()];
    assert!(analysis::coercivity_margin(&s, &ones).unwrap().min_margin > 0.0);
    assert!(analysis::coercivity_eigen_check(&s, &ones).unwrap() > 0.0);
}

#[test]
fn robin_kernel_at_alpha_zero_matches_fine_quadrature() {
    // γ_0(x,z) = γ(x,z) + ∫_Γ γ(x,y)γ(y,z)/∫_Ω γ(y,v) dv dy at x = 0.1, z = 0.2
    let h = 1.0 / 80.0;
    let d = k1(h);
    let zero = vec![0.0; d.n()];
    let set = solve::robin_transform(&d, &zero, &zero, 1e-12).unwrap();
    let (i, j) = (cell_at(&d, 0.1 + 1e-9), cell_at(&d, 0.2 + 1e-9));
    let got = set.pair.get(i, j) / (d.volume(i) * d.volume(j));
    // left Γ only: y ∈ (x − 0.5, 0) ∩ (z − 0.5, 0) = (−0.3, 0), ∫_Ω γ(y,·) = 0.5 + y
    let m = 20000;
    let dy = 0.3 / m as f64;
    let tail: f64 = (0..m).map(|k| -0.3 + (k as f64 + 0.5) * dy).map(|y| dy / (0.5 + y)).sum();
    assert!((tail - 2.5f64.ln()).abs() < 1e-6);
    assert!((got - (1.0 + tail)).abs() < 0.05, "{got} vs {}", 1.0 + tail);
}
