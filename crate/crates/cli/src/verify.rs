//! Seeded self-check suites behind `nnl verify`.

use anyhow::Result;
use nnl_core::analysis::{self, EigenOptions};
use nnl_core::kernel::distance;
use nnl_core::solve::{self, SolverOptions};
use nnl_core::{build_grid, Discretization, Domain, Kernel, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub const SUITES: [&str; 5] = ["identities", "solvers", "robin", "trace", "constants"];

struct Ctx {
    seed: u64,
    fault: bool,
    checks: Vec<Check>,
    suite: &'static str,
}

impl Ctx {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt))
    }

    fn disc(&self, kernel: Kernel, h: f64, radius: f64) -> Result<Discretization> {
        let omega = Domain::interval(0.0, 1.0)?;
        let grid = build_grid(&omega, &kernel, h, radius, None)?;
        let mut d = Discretization::new(grid, kernel)?;
        if self.fault {
            d.tamper(0, 1, 1.5);
        }
        Ok(d)
    }

    /// Records `value ≤ threshold`.
    fn at_most(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.checks.push(Check { suite: self.suite, name: name.into(), value, threshold, pass: value <= threshold });
    }

    /// Records `value ≥ threshold`.
    fn at_least(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.checks.push(Check { suite: self.suite, name: name.into(), value, threshold, pass: value >= threshold });
    }
}

fn k1() -> Kernel {
    Kernel::truncated(1, 0.5, 1.0).expect("valid kernel")
}

fn skewed() -> Kernel {
    Kernel::custom(1, false, Some(0.5), None, "skewed-indicator", |y, x| {
        if distance(x, y) < 0.5 {
            1.0 + 0.1 * (y[0] - x[0]).signum()
        } else {
            0.0
        }
    })
    .expect("valid kernel")
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

fn identities(ctx: &mut Ctx) -> Result<()> {
    let d = ctx.disc(k1(), 1.0 / 64.0, 0.5)?;
    let table = d.table().as_operator();
    let largest = (0..table.n_rows()).flat_map(|i| table.row(i).map(|e| e.1).collect::<Vec<_>>()).fold(0.0, f64::max);
    ctx.at_most("table_symmetry", table.max_asymmetry() / largest, 1e-12);
    let mut rng = ctx.rng(1);
    let mut worst_div: f64 = 0.0;
    let mut worst_green: f64 = 0.0;
    let mut worst_special: f64 = 0.0;
    for _ in 0..50 {
        let u = random_field(&mut rng, d.n());
        let v = random_field(&mut rng, d.n());
        worst_div = worst_div.max(analysis::divergence_residual(&d, &u)?.abs() / max_abs(&u));
        let g = analysis::verify_green_identity(&d, &u, &v)?;
        worst_green = worst_green.max(g.full / g.scale);
        worst_special = worst_special.max(g.special.unwrap_or(0.0) / g.scale);
    }
    ctx.at_most("divergence", worst_div, 1e-12);
    ctx.at_most("green_full", worst_green, 1e-10);
    ctx.at_most("green_symmetric_form", worst_special, 1e-10);
    let s = ctx.disc(skewed(), 1.0 / 64.0, 0.5)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let u = random_field(&mut rng, s.n());
        let v = random_field(&mut rng, s.n());
        let g = analysis::verify_green_identity(&s, &u, &v)?;
        worst = worst.max(g.full / g.scale);
    }
    ctx.at_most("green_full_asymmetric", worst, 1e-10);
    Ok(())
}

fn manufactured(ctx: &mut Ctx, label: &str, d: &Discretization, salt: u64) -> Result<()> {
    let mut rng = ctx.rng(salt);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let mut u = random_field(&mut rng, d.n());
        solve::mean_center(d, &mut u);
        let f = d.apply_l(&u)?;
        let g = d.apply_n(&u)?;
        let r = solve::solve_neumann(d, &f, &g, &SolverOptions::default())?;
        if r.status != SolveStatus::Converged {
            worst = f64::INFINITY;
            continue;
        }
        worst = worst.max(max_diff(&r.u, &u) / max_abs(&u));
    }
    ctx.at_most(format!("manufactured_{label}"), worst, 1e-8);
    Ok(())
}

fn solvers(ctx: &mut Ctx) -> Result<()> {
    let d = ctx.disc(k1(), 1.0 / 64.0, 0.5)?;
    manufactured(ctx, "truncated", &d, 2)?;
    let fr = ctx.disc(Kernel::fractional(1, 0.25, 1.0)?, 1.0 / 64.0, 2.0)?;
    manufactured(ctx, "fractional", &fr, 3)?;

    let opts = SolverOptions::default();
    let f = d.sample(|p| (3.0 * p[0]).cos());
    let g = d.sample(|p| if p[0] < 0.0 { 1.0 + p[0] } else { -0.5 });
    let m = d.omega_mass();
    let defect: f64 = d.load(&f, &g)?.iter().sum();
    let lam: f64 = m.iter().sum();
    let f: Vec<f64> = f.iter().map(|v| v - defect / lam).collect();
    let direct = solve::solve_neumann(&d, &f, &g, &opts)?;
    let hom = solve::transform_nonhom_to_hom(&d, &f, &g)?;
    let zero = vec![0.0; d.n()];
    let lifted = solve::solve_neumann(&d, &hom.f_new, &zero, &opts)?;
    let mut u: Vec<f64> = lifted.u.iter().zip(&hom.g_tilde).map(|(a, b)| a + b).collect();
    solve::mean_center(&d, &mut u);
    ctx.at_most("homogeneous_lift", max_diff(&u, &direct.u) / max_abs(&direct.u), 1e-8);

    let ones = vec![1.0; d.n()];
    let rhs = d.sample(|p| 1.0 + p[0]);
    let reg = solve::solve_regularized(&d, &rhs, &ones, &opts)?;
    let ns = solve::solve_nonsymmetric(&d, &rhs, &ones, &opts)?;
    ctx.at_most("nonsymmetric_residual", ns.residual, 1e-10);
    ctx.at_most("nonsymmetric_matches_regularized", max_diff(&ns.u, &reg.u) / max_abs(&reg.u), 1e-10);

    let s = ctx.disc(skewed(), 1.0 / 64.0, 0.5)?;
    let margin = analysis::coercivity_margin(&s, &ones)?;
    ctx.at_least("skewed_coercivity_margin", margin.min_margin, f64::MIN_POSITIVE);
    let r = solve::solve_nonsymmetric(&s, &rhs, &ones, &opts)?;
    ctx.at_most("skewed_nonsymmetric_residual", r.residual, 1e-10);

    let inc = solve::solve_neumann(&d, &ones, &zero, &opts)?;
    ctx.at_least("incompatible_flagged", (inc.status == SolveStatus::Incompatible) as u8 as f64, 1.0);
    Ok(())
}

fn robin(ctx: &mut Ctx) -> Result<()> {
    let d = ctx.disc(k1(), 1.0 / 64.0, 0.5)?;
    let n = d.n();
    let mut rng = ctx.rng(4);
    let mut worst: f64 = 0.0;
    let mut worst_b: f64 = 0.0;
    for _ in 0..5 {
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let g = random_field(&mut rng, n);
        let set = solve::robin_transform(&d, &alpha, &g, 1e-12)?;
        let u = random_field(&mut rng, d.n_omega());
        let res = analysis::verify_robin_identity(&d, &set, &u)?;
        worst = worst.max(res.interior);
        worst_b = worst_b.max(res.boundary);
    }
    ctx.at_most("robin_identity", worst, 1e-8);
    ctx.at_most("robin_boundary_relation", worst_b, 1e-8);
    for a in [0.0, 0.5, 1.0] {
        let g = random_field(&mut rng, n);
        let set = solve::robin_transform(&d, &vec![a; n], &g, 1e-12)?;
        let u = random_field(&mut rng, d.n_omega());
        let res = analysis::verify_robin_identity(&d, &set, &u)?;
        ctx.at_most(format!("robin_identity_alpha_{a}"), res.interior.max(res.boundary), 1e-8);
    }

    let zero = vec![0.0; n];
    let one = solve::robin_transform(&d, &vec![1.0; n], &zero, 1e-12)?;
    let mut diff: f64 = 0.0;
    for i in 0..d.n_omega() {
        for j in 0..d.n_omega() {
            if i != j {
                diff = diff.max((one.pair.get(i, j) - d.table().weight(i, j)).abs());
            }
        }
    }
    ctx.at_most("robin_alpha_one_kernel", diff, 0.0);
    let none = solve::robin_transform(&d, &zero, &zero, 1e-12)?;
    ctx.at_most("robin_alpha_zero_potential", max_abs(&none.potential), 0.0);

    let f = d.sample(|p| (4.0 * p[0]).sin());
    let m = d.omega_mass();
    let mean = f.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>() / m.iter().sum::<f64>();
    let f: Vec<f64> = f.iter().map(|v| v - mean).collect();
    let opts = SolverOptions::default();
    let neu = solve::solve_neumann(&d, &f, &zero, &opts)?;
    let rob = solve::solve_robin(&d, &none, &f, &opts)?;
    ctx.at_most("robin_alpha_zero_matches_neumann", max_diff(&rob.u, &neu.u) / max_abs(&neu.u), 1e-8);
    Ok(())
}

fn trace(ctx: &mut Ctx) -> Result<()> {
    let d = ctx.disc(k1(), 1.0 / 64.0, 0.5)?;
    let eig = EigenOptions::default();
    let w = analysis::trace_weight(&d, 1.0)?;
    let mass: f64 = d.grid().gamma().map(|k| w[k] * d.volume(k)).sum();
    ctx.at_most("trace_weight_mass", mass, d.grid().omega_measure());
    let t = analysis::trace_operator_norm(&d, 1.0, &eig)?;
    ctx.at_most("trace_norm_squared", t.value, t.bound.unwrap_or(f64::NAN));
    let mut rng = ctx.rng(5);
    let mut worst_iso: f64 = 0.0;
    let mut worst_ext: f64 = 0.0;
    let mut worst_restrict: f64 = 0.0;
    let mut worst_lift: f64 = 0.0;
    let mut worst_bound: f64 = 0.0;
    for _ in 0..20 {
        let c = random_field(&mut rng, d.n());
        let (lhs, rhs) = analysis::extension_norm_identity(&d, &c)?;
        worst_ext = worst_ext.max((lhs - rhs).abs() / rhs);
        let (a, b) = analysis::extension_bound(&d, &c, 1.0)?;
        worst_bound = worst_bound.max(a / b);
        let u = random_field(&mut rng, d.n());
        let v = random_field(&mut rng, d.n());
        let e = analysis::regional_embeddings(&d, &u, &v)?;
        worst_iso = worst_iso.max(e.isometry_residual / e.isometry_scale);
        worst_restrict = worst_restrict.max(e.restriction_ratio);
        worst_lift = worst_lift.max(e.extension_ratio);
    }
    ctx.at_most("extension_norm_identity", worst_ext, 1e-12);
    ctx.at_most("extension_bound_ratio", worst_bound, 1.0);
    ctx.at_most("regional_isometry", worst_iso, 1e-12);
    ctx.at_most("regional_extension_ratio", worst_lift, 1.0 + 1e-12);
    ctx.at_most("regional_restriction_ratio", worst_restrict, 2.0);
    Ok(())
}

fn constants(ctx: &mut Ctx) -> Result<()> {
    let eig = EigenOptions::default();
    let d = ctx.disc(Kernel::truncated(1, 2.0, 1.0)?, 1.0 / 128.0, 2.0)?;
    let p = analysis::estimate_poincare(&d, &eig)?;
    ctx.at_most("poincare_wide_kernel", p.value, 2.0 / 3.0 * (1.0 + 1e-3));
    let mut rng = ctx.rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let u = random_field(&mut rng, d.n());
        let [a, b, c] = analysis::poincare_chain(&d, &u)?;
        worst = worst.max((a - b).abs().max((a - c).abs()) / a);
    }
    ctx.at_most("poincare_chain", worst, 1e-12);
    let k = ctx.disc(k1(), 1.0 / 64.0, 0.5)?;
    ctx.at_least("poincare_condition_b", analysis::poincare_condition_b(&k, 0.25), 0.75 - 1e-12);
    let fr = ctx.disc(Kernel::fractional(1, 0.25, 1.0)?, 1.0 / 32.0, 2.0)?;
    let f = analysis::estimate_friedrichs(&fr, &eig)?;
    let smallest = f.diagnostics[0].1;
    ctx.at_least("friedrichs_smallest_eigenvalue", smallest, f64::MIN_POSITIVE);
    Ok(())
}

/// Runs the named suite (or `all`) and returns every check.
pub fn run(suite: &str, seed: u64, fault: bool) -> Result<Vec<Check>> {
    let names: Vec<&'static str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        match SUITES.iter().find(|s| **s == suite) {
            Some(s) => vec![*s],
            None => anyhow::bail!("unknown suite {suite:?}; expected one of {:?} or \"all\"", SUITES),
        }
    };
    let mut ctx = Ctx { seed, fault, checks: Vec::new(), suite: "" };
    for name in names {
        ctx.suite = name;
        match name {
            "identities" => identities(&mut ctx)?,
            "solvers" => solvers(&mut ctx)?,
            "robin" => robin(&mut ctx)?,
            "trace" => trace(&mut ctx)?,
            "constants" => constants(&mut ctx)?,
            _ => unreachable!(),
        }
    }
    Ok(ctx.checks)
}
