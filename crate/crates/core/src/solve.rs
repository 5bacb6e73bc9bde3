//! Discrete weak solves and the data transforms that reduce one problem class
//! to another.

use nalgebra::DMatrix;

use crate::analysis::coercivity_margin;
use crate::assembly::{Builder, Discretization, SparseOperator};
use crate::error::{check_len, Error, Result};
use crate::geometry::CellTag;
use crate::linalg::{bicgstab, cg, dense_solve, norm2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual tolerance.
    pub tol: f64,
    /// Systems up to this many unknowns are factorized densely.
    pub dense_limit: usize,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, dense_limit: 3000, max_iter: 50_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Incompatible,
    Singular,
    Unsupported,
    NotConverged,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Incompatible => "incompatible",
            SolveStatus::Singular => "singular",
            SolveStatus::Unsupported => "unsupported",
            SolveStatus::NotConverged => "not-converged",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Dense,
    ConjugateGradient,
    BiCgStab,
    None,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dense => "dense-lu",
            Method::ConjugateGradient => "cg-jacobi",
            Method::BiCgStab => "bicgstab-jacobi",
            Method::None => "none",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Solution on all active cells.
    pub u: Vec<f64>,
    pub status: SolveStatus,
    /// Relative residual of the system actually solved.
    pub residual: f64,
    /// `Σ f·vol + Σ g·vol` for problems with a compatibility condition.
    pub compatibility_defect: Option<f64>,
    /// Multiplier of the mean-zero constraint.
    pub multiplier: Option<f64>,
    pub method: Method,
    pub iterations: usize,
    pub message: Option<String>,
}

impl SolveResult {
    fn failed(n: usize, status: SolveStatus, message: String) -> Self {
        SolveResult {
            u: vec![0.0; n],
            status,
            residual: f64::NAN,
            compatibility_defect: None,
            multiplier: None,
            method: Method::None,
            iterations: 0,
            message: Some(message),
        }
    }
}

/// Number of connected components of the coupling graph of `op` restricted
/// to `0..n`, and whether every component contains an anchored node.
fn components(op: &SparseOperator, anchored: &[bool]) -> (usize, bool) {
    let n = anchored.len();
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    let mut all_anchored = true;
    let mut stack = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut has_anchor = false;
        comp[s] = count;
        stack.push(s);
        while let Some(i) = stack.pop() {
            has_anchor |= anchored[i];
            for (j, v) in op.row(i) {
                if j < n && j != i && v != 0.0 && comp[j] == usize::MAX {
                    comp[j] = count;
                    stack.push(j);
                }
            }
        }
        all_anchored &= has_anchor;
        count += 1;
    }
    (count, all_anchored)
}

struct Linear {
    x: Vec<f64>,
    residual: f64,
    method: Method,
    iterations: usize,
}

fn relative_residual(op: &SparseOperator, x: &[f64], b: &[f64]) -> f64 {
    let ax = op.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let bn = norm2(b);
    if bn == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / bn
    }
}

fn solve_linear(op: &SparseOperator, b: &[f64], symmetric: bool, opts: &SolverOptions) -> Option<Linear> {
    let n = op.n_rows();
    if n <= opts.dense_limit {
        let x = dense_solve(&op.to_dense(), b)?;
        let residual = relative_residual(op, &x, b);
        return Some(Linear { x, residual, method: Method::Dense, iterations: 1 });
    }
    let diag = op.diagonal();
    let out = if symmetric {
        cg(|v| op.matvec(v), &diag, b, opts.tol * 1e-2, opts.max_iter)
    } else {
        bicgstab(|v| op.matvec(v), &diag, b, opts.tol * 1e-2, opts.max_iter)
    };
    let method = if symmetric { Method::ConjugateGradient } else { Method::BiCgStab };
    let residual = relative_residual(op, &out.x, b);
    Some(Linear { x: out.x, residual, method, iterations: out.iterations })
}

/// Solves `K u + m μ = rhs`, `mᵀu = 0` for symmetric positive semidefinite `k`
/// whose kernel is spanned by the constants, with `m` the mass vector.
fn solve_mean_constrained(k: &SparseOperator, m: &[f64], rhs: &[f64], opts: &SolverOptions) -> Option<(Linear, f64)> {
    let n = k.n_rows();
    let total: f64 = m.iter().sum();
    let mu = rhs.iter().sum::<f64>() / total;
    let projected: Vec<f64> = rhs.iter().zip(m).map(|(r, w)| r - mu * w).collect();
    if n < opts.dense_limit {
        let mut a = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for (j, v) in k.row(i) {
                a[(i, j)] += v;
            }
            a[(i, n)] = m[i];
            a[(n, i)] = m[i];
        }
        let mut b = rhs.to_vec();
        b.push(0.0);
        let sol = dense_solve(&a, &b)?;
        let x = sol[..n].to_vec();
        let residual = relative_residual(k, &x, &projected);
        return Some((Linear { x, residual, method: Method::Dense, iterations: 1 }, sol[n]));
    }
    // K + ρ m mᵀ is definite and agrees with K on mean-zero vectors
    let diag_k = k.diagonal();
    let mm: f64 = m.iter().map(|w| w * w).sum();
    let rho = diag_k.iter().sum::<f64>() / mm.max(f64::MIN_POSITIVE);
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = k.matvec(v);
        let mv: f64 = m.iter().zip(v).map(|(a, b)| a * b).sum();
        for (o, w) in out.iter_mut().zip(m) {
            *o += rho * w * mv;
        }
        out
    };
    let diag: Vec<f64> = diag_k.iter().zip(m).map(|(d, w)| d + rho * w * w).collect();
    let out = cg(apply, &diag, &projected, opts.tol * 1e-2, opts.max_iter);
    let residual = relative_residual(k, &out.x, &projected);
    Some((Linear { x: out.x, residual, method: Method::ConjugateGradient, iterations: out.iterations }, mu))
}

fn center_on(u: &mut [f64], m: &[f64]) {
    let total: f64 = m.iter().sum();
    let mean = u.iter().zip(m).map(|(a, b)| a * b).sum::<f64>() / total;
    for v in u.iter_mut() {
        *v -= mean;
    }
}

fn check_symmetric(disc: &Discretization, what: &str) -> Result<()> {
    if disc.kernel().is_symmetric() {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} requires a symmetric kernel")))
    }
}

/// Neumann problem `ℒu = f` on Ω, `𝒩u = g` on Γ, with `∫_Ω u = 0`.
///
/// Incompatible data are solved in the projected sense (a constant is removed
/// from `f`) and flagged.
pub fn solve_neumann(disc: &Discretization, f: &[f64], g: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    check_symmetric(disc, "the Neumann solve")?;
    let n = disc.n();
    check_len(n, f.len())?;
    check_len(n, g.len())?;
    let k = disc.stiffness()?;
    let rhs = disc.load(f, g)?;
    let m = disc.omega_mass();
    let (count, _) = components(&k, &vec![true; n]);
    if count > 1 {
        return Ok(SolveResult::failed(
            n,
            SolveStatus::Singular,
            format!("interaction graph has {count} components"),
        ));
    }
    let defect: f64 = rhs.iter().sum();
    let scale: f64 = rhs.iter().map(|v| v.abs()).sum();
    let compatible = defect.abs() <= opts.tol * scale;
    let Some((lin, mu)) = solve_mean_constrained(&k, &m, &rhs, opts) else {
        return Ok(SolveResult::failed(n, SolveStatus::Singular, "factorization failed".into()));
    };
    let mut u = lin.x;
    center_on(&mut u, &m);
    let status = if !compatible {
        SolveStatus::Incompatible
    } else if lin.residual <= opts.tol {
        SolveStatus::Converged
    } else {
        SolveStatus::NotConverged
    };
    Ok(SolveResult {
        u,
        status,
        residual: lin.residual,
        compatibility_defect: Some(defect),
        multiplier: Some(mu),
        method: lin.method,
        iterations: lin.iterations,
        message: None,
    })
}

fn with_potential(k: &SparseOperator, potential: &[f64]) -> SparseOperator {
    let n = k.n_rows();
    let mut b = Builder::new(n, n);
    for i in 0..n {
        for (j, v) in k.row(i) {
            b.add(i, j, v);
        }
        if potential[i] != 0.0 {
            b.add(i, i, potential[i]);
        }
    }
    b.build()
}

/// Regularized problem `ℒu + κu = f` on Ω, `𝒩u = 0` on Γ, with `κ ≥ 0`.
pub fn solve_regularized(disc: &Discretization, f: &[f64], kappa: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    check_symmetric(disc, "the regularized solve")?;
    let n = disc.n();
    check_len(n, f.len())?;
    check_len(n, kappa.len())?;
    if disc.grid().omega().any(|i| !(kappa[i] >= 0.0)) {
        return Err(Error::Contract("regularization coefficient must be nonnegative".into()));
    }
    let k = disc.stiffness()?;
    let pot: Vec<f64> = (0..n).map(|i| if disc.is_omega(i) { kappa[i] * disc.volume(i) } else { 0.0 }).collect();
    let anchored: Vec<bool> = pot.iter().map(|&p| p > 0.0).collect();
    let (_, ok) = components(&k, &anchored);
    if !ok {
        return Ok(SolveResult::failed(
            n,
            SolveStatus::Singular,
            "a component of the interaction graph has no positive regularization".into(),
        ));
    }
    let a = with_potential(&k, &pot);
    let rhs = disc.load(f, &vec![0.0; n])?;
    finish(n, solve_linear(&a, &rhs, true, opts), opts, |x| x)
}

fn finish(n: usize, lin: Option<Linear>, opts: &SolverOptions, map: impl FnOnce(Vec<f64>) -> Vec<f64>) -> Result<SolveResult> {
    let Some(lin) = lin else {
        return Ok(SolveResult::failed(n, SolveStatus::Singular, "factorization failed".into()));
    };
    let status = if lin.residual <= opts.tol { SolveStatus::Converged } else { SolveStatus::NotConverged };
    Ok(SolveResult {
        u: map(lin.x),
        status,
        residual: lin.residual,
        compatibility_defect: None,
        multiplier: None,
        method: lin.method,
        iterations: lin.iterations,
        message: None,
    })
}

/// Nonsymmetric problem `ℒu + αu = f` on Ω, `𝒩u = 0` on Γ.
///
/// Refused with status `Unsupported` unless the coercivity margin is positive
/// on every Ω cell. Values on Γ̂-only cells are fixed to zero.
pub fn solve_nonsymmetric(disc: &Discretization, f: &[f64], alpha: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    let n = disc.n();
    check_len(n, f.len())?;
    check_len(n, alpha.len())?;
    let report = coercivity_margin(disc, alpha)?;
    if !(report.min_margin > 0.0) {
        return Ok(SolveResult::failed(
            n,
            SolveStatus::Unsupported,
            format!("coercivity margin {} is not positive", report.min_margin),
        ));
    }
    let a = disc.nonsym_form(alpha)?;
    let keep: Vec<usize> = (0..n).filter(|&i| disc.grid().tag(i) != CellTag::GammaHatOnly).collect();
    let sys = a.transpose().submatrix(&keep);
    let rhs: Vec<f64> = keep.iter().map(|&i| if disc.is_omega(i) { f[i] * disc.volume(i) } else { 0.0 }).collect();
    let lin = solve_linear(&sys, &rhs, false, opts);
    finish(n, lin, opts, |x| {
        let mut u = vec![0.0; n];
        for (k, &i) in keep.iter().enumerate() {
            u[i] = x[k];
        }
        u
    })
}

/// Problem `ℒu = f` on Ω with `u = g_ext` on Γ (zero when `None`).
pub fn solve_dirichlet(disc: &Discretization, f: &[f64], g_ext: Option<&[f64]>, opts: &SolverOptions) -> Result<SolveResult> {
    check_symmetric(disc, "the Dirichlet solve")?;
    let n = disc.n();
    check_len(n, f.len())?;
    if let Some(g) = g_ext {
        check_len(n, g.len())?;
    }
    let k = disc.stiffness()?;
    let omega: Vec<usize> = disc.grid().omega().collect();
    let kk = k.submatrix(&omega);
    let anchored: Vec<bool> = omega.iter().map(|&i| disc.gamma_density(i) > 0.0).collect();
    let (_, ok) = components(&kk, &anchored);
    if !ok {
        return Ok(SolveResult::failed(
            n,
            SolveStatus::Singular,
            "a component of Ω does not interact with the exterior".into(),
        ));
    }
    let rhs: Vec<f64> = omega
        .iter()
        .map(|&i| {
            let mut r = f[i] * disc.volume(i);
            if let Some(g) = g_ext {
                for (j, v) in k.row(i) {
                    if !disc.is_omega(j) {
                        r -= v * g[j];
                    }
                }
            }
            r
        })
        .collect();
    let lin = solve_linear(&kk, &rhs, true, opts);
    finish(n, lin, opts, |x| {
        let mut u = vec![0.0; n];
        u[..x.len()].copy_from_slice(&x);
        if let Some(g) = g_ext {
            for i in disc.grid().gamma() {
                u[i] = g[i];
            }
        }
        u
    })
}

/// Data of the equivalent homogeneous problem.
#[derive(Clone, Debug)]
pub struct HomogeneousData {
    /// Right-hand side on Ω.
    pub f_new: Vec<f64>,
    /// Exterior lift `g / ∫_Ω γ(y, z) dz` on Γ.
    pub g_tilde: Vec<f64>,
}

/// Rewrites Neumann data `(f, g)` as `(f_new, 0)`: `u` solves the original
/// problem iff `u − g̃·χ_Γ` solves the homogeneous one.
pub fn transform_nonhom_to_hom(disc: &Discretization, f: &[f64], g: &[f64]) -> Result<HomogeneousData> {
    let n = disc.n();
    check_len(n, f.len())?;
    check_len(n, g.len())?;
    let infinite = 1.0 / disc.grid().eps_gamma();
    let mut g_tilde = vec![0.0; n];
    for k in disc.grid().gamma() {
        let a = disc.out_density(k);
        if a > infinite {
            if g[k] != 0.0 {
                return Err(Error::Contract(format!(
                    "boundary data must vanish where the interaction with Ω is unbounded (cell {k})"
                )));
            }
        } else {
            g_tilde[k] = g[k] / a;
        }
    }
    let mut f_new = vec![0.0; n];
    for i in disc.grid().omega() {
        let lift: f64 = disc
            .table()
            .row(i)
            .filter(|&(k, _)| disc.is_gamma(k))
            .map(|(k, w)| g_tilde[k] * w)
            .sum();
        f_new[i] = f[i] + lift / disc.volume(i);
    }
    Ok(HomogeneousData { f_new, g_tilde })
}

/// Regional data equivalent to the Robin problem with exterior condition
/// `αu + (1−α)𝒩u = g` on Γ.
#[derive(Clone, Debug)]
pub struct RobinSet {
    pub alpha: Vec<f64>,
    pub g: Vec<f64>,
    /// `1 / ((1−α)∫_Ω γ(y,v) dv + α)` on Γ cells.
    pub c: Vec<f64>,
    /// Pair weights of the transformed kernel on Ω×Ω (off-diagonal).
    pub pair: SparseOperator,
    /// Cell averages of the transformed potential on Ω.
    pub potential: Vec<f64>,
    /// Cell averages of the transformed load on Ω.
    pub load: Vec<f64>,
}

/// Builds the regional kernel, potential and load of the Robin problem with
/// coefficient `alpha ∈ [0,1]` and data `g` on Γ. Denominators below
/// `c_threshold` are rejected.
pub fn robin_transform(disc: &Discretization, alpha: &[f64], g: &[f64], c_threshold: f64) -> Result<RobinSet> {
    let n = disc.n();
    check_len(n, alpha.len())?;
    check_len(n, g.len())?;
    let grid = disc.grid();
    let n_omega = disc.n_omega();
    let mut c = vec![0.0; n];
    for y in grid.gamma() {
        let a = alpha[y];
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Contract(format!("Robin coefficient {a} at cell {y} is outside [0,1]")));
        }
        let denom = (1.0 - a) * disc.out_density(y) + a;
        if !(denom >= c_threshold) {
            return Err(Error::Division(format!("Robin denominator {denom} at cell {y} is below {c_threshold}")));
        }
        c[y] = 1.0 / denom;
    }
    let table = disc.table();
    let mut b = Builder::new(n_omega, n_omega);
    let mut potential = vec![0.0; n_omega];
    let mut load = vec![0.0; n_omega];
    let mut buf = vec![0.0; n_omega];
    let mut touched = Vec::new();
    for i in grid.omega() {
        for (j, w) in table.row(i) {
            if j < n_omega {
                b.add(i, j, w);
            }
        }
        let mut pot = 0.0;
        for (y, w) in table.row(i) {
            match grid.tag(y) {
                CellTag::Gamma => {
                    pot += alpha[y] * c[y] * w;
                    let s = (1.0 - alpha[y]) * c[y] * w / disc.volume(y);
                    if s != 0.0 {
                        for (z, v) in table.row(y) {
                            if buf[z] == 0.0 {
                                touched.push(z);
                            }
                            buf[z] += s * v;
                        }
                    }
                }
                CellTag::GammaHatOnly => pot += w,
                _ => {}
            }
        }
        touched.sort_unstable();
        for &z in &touched {
            if z != i {
                b.add(i, z, buf[z]);
            }
            buf[z] = 0.0;
        }
        touched.clear();
        potential[i] = pot / disc.volume(i);
        let l: f64 = table
            .col(i)
            .filter(|&(y, _)| grid.tag(y) == CellTag::Gamma)
            .map(|(y, w)| g[y] * c[y] * w)
            .sum();
        load[i] = l / disc.volume(i);
    }
    Ok(RobinSet { alpha: alpha.to_vec(), g: g.to_vec(), c, pair: b.build(), potential, load })
}

impl RobinSet {
    /// Regional stiffness `½ΣΣ (u_i − u_j)(v_i − v_j) P_α(i, j)` on Ω.
    pub fn stiffness(&self) -> SparseOperator {
        let n = self.pair.n_rows();
        let mut b = Builder::new(n, n);
        for i in 0..n {
            for (j, w) in self.pair.row(i) {
                let w = 0.5 * w;
                b.add(i, i, w);
                b.add(j, j, w);
                b.add(i, j, -w);
                b.add(j, i, -w);
            }
        }
        b.build()
    }

    /// Extends Ω values to Γ through `u(y) = c(y)(g(y) + (1−α)∫_Ω u(z)γ(z,y) dz)`.
    pub fn reconstruct(&self, disc: &Discretization, u_omega: &[f64]) -> Result<Vec<f64>> {
        let n_omega = disc.n_omega();
        check_len(n_omega, u_omega.len())?;
        let mut u = vec![0.0; disc.n()];
        u[..n_omega].copy_from_slice(u_omega);
        for y in disc.grid().gamma() {
            let s: f64 = disc.table().col(y).filter(|&(z, _)| z < n_omega).map(|(z, w)| u_omega[z] * w).sum();
            u[y] = self.c[y] * (self.g[y] + (1.0 - self.alpha[y]) * s / disc.volume(y));
        }
        Ok(u)
    }
}

/// Solves the regional form of the Robin problem on Ω and reconstructs the
/// exterior values.
pub fn solve_robin(disc: &Discretization, robin: &RobinSet, f: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    check_symmetric(disc, "the Robin solve")?;
    let n = disc.n();
    let n_omega = disc.n_omega();
    check_len(n, f.len())?;
    let k = robin.stiffness();
    let pot: Vec<f64> = (0..n_omega).map(|i| robin.potential[i] * disc.volume(i)).collect();
    let rhs: Vec<f64> = (0..n_omega).map(|i| (f[i] + robin.load[i]) * disc.volume(i)).collect();
    let anchored: Vec<bool> = pot.iter().map(|&p| p > 0.0).collect();
    let (count, ok) = components(&k, &anchored);
    if !ok {
        if count > 1 || anchored.iter().any(|&a| a) {
            return Ok(SolveResult::failed(
                n,
                SolveStatus::Singular,
                "a component of the regional interaction graph has no potential".into(),
            ));
        }
        // pure Neumann case: fix the mean on Ω
        let m: Vec<f64> = (0..n_omega).map(|i| disc.volume(i)).collect();
        let defect: f64 = rhs.iter().sum();
        let scale: f64 = rhs.iter().map(|v| v.abs()).sum();
        let Some((lin, mu)) = solve_mean_constrained(&k, &m, &rhs, opts) else {
            return Ok(SolveResult::failed(n, SolveStatus::Singular, "factorization failed".into()));
        };
        let mut x = lin.x;
        center_on(&mut x, &m);
        let status = if defect.abs() > opts.tol * scale {
            SolveStatus::Incompatible
        } else if lin.residual <= opts.tol {
            SolveStatus::Converged
        } else {
            SolveStatus::NotConverged
        };
        return Ok(SolveResult {
            u: robin.reconstruct(disc, &x)?,
            status,
            residual: lin.residual,
            compatibility_defect: Some(defect),
            multiplier: Some(mu),
            method: lin.method,
            iterations: lin.iterations,
            message: None,
        });
    }
    let a = with_potential(&k, &pot);
    let lin = solve_linear(&a, &rhs, true, opts);
    let Some(lin) = lin else {
        return Ok(SolveResult::failed(n, SolveStatus::Singular, "factorization failed".into()));
    };
    let status = if lin.residual <= opts.tol { SolveStatus::Converged } else { SolveStatus::NotConverged };
    Ok(SolveResult {
        u: robin.reconstruct(disc, &lin.x)?,
        status,
        residual: lin.residual,
        compatibility_defect: None,
        multiplier: None,
        method: lin.method,
        iterations: lin.iterations,
        message: None,
    })
}

/// Shifts `u` by a constant so that its Ω-weighted mean vanishes.
pub fn mean_center(disc: &Discretization, u: &mut [f64]) {
    center_on(u, &disc.omega_mass());
}
