//! Identity residuals, coercivity margins, Poincaré/Friedrichs/trace
//! constants and the Robin and regional-embedding checks.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{Builder, Discretization, SparseOperator};
use crate::error::{check_len, Error, Result};
use crate::geometry::{build_grid, CellTag};
use crate::kernel::{regional, Kernel};
use crate::linalg::{cg, dot, generalized_eigenvalues, mean_zero_basis, norm_inf, power_largest, sym_eigenvalues};
use crate::solve::RobinSet;

/// Relative eigenvalue size below which a pencil is treated as singular.
pub const SINGULAR_REL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Problems up to this size use a dense eigensolver.
    pub dense_limit: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { dense_limit: 2000, tol: 1e-10, max_iter: 20_000 }
    }
}

/// Estimated constant with an optional theoretical upper bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantReport {
    pub name: String,
    /// `f64::INFINITY` when the defining pencil is singular.
    pub value: f64,
    pub bound: Option<f64>,
    pub bound_source: String,
    pub method: String,
    pub diagnostics: Vec<(String, f64)>,
}

impl ConstantReport {
    pub fn within_bound(&self, rel_tol: f64) -> Option<bool> {
        self.bound.map(|b| self.value <= b * (1.0 + rel_tol))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenResiduals {
    /// `|Σ_Ω ℒu·v + Σ_Γ̂ 𝒩u·v − (pairwise form)|`.
    pub full: f64,
    /// `|Σ_Ω ℒu·v + Σ_Γ 𝒩u·v − 𝔅(u,v)|` for symmetric kernels.
    pub special: Option<f64>,
    /// Magnitude of the summed terms, for relative comparisons.
    pub scale: f64,
}

fn boundary_sum(disc: &Discretization, u: &[f64], v: &[f64]) -> Result<f64> {
    let lu = disc.apply_l(u)?;
    let nu = disc.apply_n(u)?;
    let mut s = 0.0;
    for i in disc.grid().omega() {
        s += lu[i] * v[i] * disc.volume(i);
    }
    for k in disc.grid().gamma_hat() {
        s += nu[k] * v[k] * disc.volume(k);
    }
    Ok(s)
}

/// `Σ_Ω ℒu·vol + Σ_Γ̂ 𝒩u·vol`, which vanishes for every `u`.
pub fn divergence_residual(disc: &Discretization, u: &[f64]) -> Result<f64> {
    boundary_sum(disc, u, &vec![1.0; disc.n()])
}

/// Residuals of the discrete Green identities for the pair `(u, v)`.
pub fn verify_green_identity(disc: &Discretization, u: &[f64], v: &[f64]) -> Result<GreenResiduals> {
    check_len(disc.n(), u.len())?;
    check_len(disc.n(), v.len())?;
    let lhs = boundary_sum(disc, u, v)?;
    let table = disc.table();
    let mut rhs = 0.0;
    let mut scale = 0.0;
    for i in disc.grid().omega() {
        for (j, w) in table.row(i) {
            let back = table.weight(j, i);
            let flux = u[i] * w - u[j] * back;
            let factor = if disc.is_omega(j) { 0.5 } else { 1.0 };
            rhs += factor * flux * (v[i] - v[j]);
            scale += factor * (u[i].abs() * w + u[j].abs() * back) * (v[i].abs() + v[j].abs());
        }
        for (k, w) in table.col(i) {
            if table.weight(i, k) != 0.0 {
                continue;
            }
            // pairs stored only in the incoming direction
            let factor = if disc.is_omega(k) { 0.5 } else { 1.0 };
            rhs += factor * (-u[k] * w) * (v[i] - v[k]);
            scale += factor * u[k].abs() * w * (v[i].abs() + v[k].abs());
        }
    }
    let special = if disc.kernel().is_symmetric() {
        let k = disc.stiffness()?;
        Some((lhs - k.form(v, u)).abs())
    } else {
        None
    };
    Ok(GreenResiduals { full: (lhs - rhs).abs(), special, scale: scale.max(f64::MIN_POSITIVE) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityReport {
    /// Margin on every Ω cell.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    /// Essential supremum of `γ(x,y)/γ(y,x)` over Γ̂×Ω.
    pub ratio_bound: f64,
    /// Pairs where the forward weight is positive but the backward one is zero.
    pub unbounded_pairs: usize,
}

/// Pointwise coercivity margin
/// `α + ½∫_Ω (γ(x,y) − γ(y,x)) dy − (C+1)/2 ∫_Γ̂ |γ(x,y) − γ(y,x)| dy` on Ω.
pub fn coercivity_margin(disc: &Discretization, alpha: &[f64]) -> Result<CoercivityReport> {
    check_len(disc.n(), alpha.len())?;
    let table = disc.table();
    let omega = disc.grid().omega();
    let mut ratio: f64 = 0.0;
    let mut unbounded = 0usize;
    let mut any = false;
    for i in omega.clone() {
        for (k, fwd) in table.row(i) {
            if disc.is_omega(k) {
                continue;
            }
            any = true;
            let back = table.weight(k, i);
            if back > 0.0 {
                ratio = ratio.max(fwd / back);
            } else {
                unbounded += 1;
            }
        }
    }
    let c = if unbounded > 0 {
        f64::INFINITY
    } else if any {
        ratio
    } else {
        1.0
    };
    let mut margins = Vec::with_capacity(disc.n_omega());
    for i in omega {
        let mut inner = 0.0;
        let mut outer = 0.0;
        for (j, w) in table.row(i) {
            if disc.is_omega(j) {
                inner += w;
            } else {
                outer += (w - table.weight(j, i)).abs();
            }
        }
        for (j, w) in table.col(i) {
            if disc.is_omega(j) {
                inner -= w;
            } else if table.weight(i, j) == 0.0 {
                outer += w;
            }
        }
        let penalty = if outer == 0.0 { 0.0 } else { 0.5 * (c + 1.0) * outer };
        margins.push(alpha[i] + (0.5 * inner - penalty) / disc.volume(i));
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CoercivityReport { margins, min_margin, ratio_bound: c, unbounded_pairs: unbounded })
}

/// Smallest eigenvalue of the symmetric part of the nonsymmetric form on
/// Ω ∪ Γ.
pub fn coercivity_eigen_check(disc: &Discretization, alpha: &[f64]) -> Result<f64> {
    let a = disc.nonsym_form(alpha)?;
    let keep: Vec<usize> = (0..disc.n()).filter(|&i| disc.grid().tag(i) != CellTag::GammaHatOnly).collect();
    let d = a.submatrix(&keep).to_dense();
    Ok(sym_eigenvalues(&(0.5 * (&d + d.transpose())))[0])
}

fn omega_vols(disc: &Discretization) -> Vec<f64> {
    disc.grid().omega().map(|i| disc.volume(i)).collect()
}

/// Schur complement of the energy Gram matrix onto Ω, eliminating Γ values.
fn energy_schur(disc: &Discretization) -> DMatrix<f64> {
    let d = disc.energy();
    let n_omega = disc.n_omega();
    let mut s = DMatrix::zeros(n_omega, n_omega);
    for i in 0..n_omega {
        for (j, v) in d.row(i) {
            if j < n_omega {
                s[(i, j)] += v;
            }
        }
    }
    for k in disc.grid().gamma() {
        let dk = d.get(k, k);
        if dk <= 0.0 {
            continue;
        }
        let col: Vec<(usize, f64)> = d.row(k).filter(|&(j, _)| j < n_omega).collect();
        for &(i, a) in &col {
            for &(j, b) in &col {
                s[(i, j)] -= a * b / dk;
            }
        }
    }
    s
}

/// `∫ ess-inf_{x∈Ω} γ(y, x) dy` over all grid cells.
pub fn poincare_condition_a(disc: &Discretization) -> f64 {
    let grid = disc.grid();
    let kernel = disc.kernel();
    let centers: Vec<_> = grid.omega().map(|i| grid.center(i)).collect();
    grid.cells()
        .iter()
        .map(|c| {
            let m = centers.iter().map(|&x| kernel.eval(c.center, x)).fold(f64::INFINITY, f64::min);
            m * c.volume
        })
        .sum()
}

/// `ess-inf_{|x−y|<eps} ∫ min{γ(z,x), γ(z,y)} dz` over pairs of Ω cells.
pub fn poincare_condition_b(disc: &Discretization, eps: f64) -> f64 {
    let grid = disc.grid();
    let kernel = disc.kernel();
    let mut best = f64::INFINITY;
    for i in grid.omega() {
        let x = grid.center(i);
        for j in grid.omega() {
            let y = grid.center(j);
            if crate::kernel::distance(x, y) >= eps {
                continue;
            }
            let s: f64 = grid
                .cells()
                .iter()
                .map(|c| kernel.eval(c.center, x).min(kernel.eval(c.center, y)) * c.volume)
                .sum();
            best = best.min(s);
        }
    }
    best
}

/// Best constant `C` in `∫_Ω (u − u_Ω)² ≤ C ∫_Ω ∫ (u(x) − u(y))² γ(y,x)`.
pub fn estimate_poincare(disc: &Discretization, opts: &EigenOptions) -> Result<ConstantReport> {
    let n_omega = disc.n_omega();
    if n_omega < 2 {
        return Err(Error::InvalidGrid("at least two Ω cells are needed".into()));
    }
    let vols = omega_vols(disc);
    let lambda: f64 = vols.iter().sum();
    let c_a = poincare_condition_a(disc);
    let bound = (c_a > 0.0).then(|| 2.0 * lambda / c_a);
    let (value, method) = if n_omega <= opts.dense_limit {
        let s = energy_schur(disc);
        let mut p = DMatrix::zeros(n_omega, n_omega);
        for i in 0..n_omega {
            p[(i, i)] += 2.0 * lambda * vols[i];
            for j in 0..n_omega {
                p[(i, j)] -= 2.0 * vols[i] * vols[j];
            }
        }
        let q = mean_zero_basis(n_omega);
        let a = q.transpose() * &s * &q;
        let b = q.transpose() * &p * &q;
        let mu = generalized_eigenvalues(&a, &b)
            .ok_or_else(|| Error::InvalidGrid("mean-free L² Gram matrix is not definite".into()))?;
        (reciprocal_of_smallest(&mu), "dense-generalized-eigen")
    } else {
        let d = disc.energy();
        let n = disc.n();
        let keep: Vec<usize> = (0..n).filter(|&i| disc.grid().tag(i) != CellTag::GammaHatOnly).collect();
        let d = d.submatrix(&keep);
        let m: Vec<f64> = keep.iter().map(|&i| if disc.is_omega(i) { disc.volume(i) } else { 0.0 }).collect();
        let apply_p = |x: &[f64]| -> Vec<f64> {
            let mx: f64 = dot(&m, x);
            x.iter().zip(&m).map(|(xi, mi)| 2.0 * (lambda * mi * xi - mi * mx)).collect()
        };
        let value = regularized_power(&d, &m, apply_p, opts);
        (value, "power-iteration")
    };
    Ok(ConstantReport {
        name: "poincare".into(),
        value,
        bound,
        bound_source: "averaging over the set where the kernel is bounded below".into(),
        method: method.into(),
        diagnostics: vec![("inf_kernel_integral".into(), c_a), ("omega_measure".into(), lambda)],
    })
}

fn reciprocal_of_smallest(mu: &[f64]) -> f64 {
    let top = mu.last().copied().unwrap_or(0.0);
    let low = mu[0];
    if !(low > SINGULAR_REL * top.abs()) {
        f64::INFINITY
    } else {
        1.0 / low
    }
}

/// Largest eigenvalue of `(P, D)` where `D` is singular on constants and `P`
/// annihilates them, by power iteration with `D + ρ m mᵀ`.
fn regularized_power<F: Fn(&[f64]) -> Vec<f64>>(d: &SparseOperator, m: &[f64], apply_p: F, opts: &EigenOptions) -> f64 {
    let diag_d = d.diagonal();
    let mm = dot(m, m);
    let rho = diag_d.iter().sum::<f64>() / mm;
    let apply = |v: &[f64]| -> Vec<f64> {
        let mv = dot(m, v);
        let mut out = d.matvec(v);
        for (o, w) in out.iter_mut().zip(m) {
            *o += rho * w * mv;
        }
        out
    };
    let diag: Vec<f64> = diag_d.iter().zip(m).map(|(a, w)| a + rho * w * w).collect();
    let x0: Vec<f64> = (0..d.n_rows()).map(|i| ((i as f64) * 0.7 + 0.3).sin()).collect();
    power_largest(
        apply_p,
        |b| {
            let r = cg(apply, &diag, b, opts.tol * 1e-2, opts.max_iter);
            r.converged.then_some(r.x)
        },
        x0,
        opts.tol,
        opts.max_iter,
    )
}

/// Quantities that agree for every `u`: `∫_Ω∫_Ω (u(x)−u(y))²`,
/// `2·𝔅_χ(u,u)` for the regional indicator kernel, and `2|Ω|·‖u − u_Ω‖²`.
pub fn poincare_chain(disc: &Discretization, u: &[f64]) -> Result<[f64; 3]> {
    check_len(disc.n(), u.len())?;
    let grid = disc.grid();
    let n_omega = disc.n_omega();
    let vols = omega_vols(disc);
    let mut double = 0.0;
    for i in 0..n_omega {
        for j in 0..n_omega {
            let d = u[i] - u[j];
            double += d * d * vols[i] * vols[j];
        }
    }
    let chi = regional(&Kernel::constant(grid.dim(), 1.0)?, grid.domain())?;
    let cgrid = build_grid(grid.domain(), &chi, grid.h(), grid.h(), Some(grid.eps_gamma()))?;
    if cgrid.n_omega() != n_omega {
        return Err(Error::Consistency("indicator grid does not match the Ω cells".into()));
    }
    let cdisc = Discretization::new(cgrid, chi)?;
    let k = cdisc.stiffness()?;
    let mut uc = vec![0.0; cdisc.n()];
    for i in 0..n_omega {
        let j = cdisc
            .grid()
            .find(grid.cell(i).index)
            .ok_or_else(|| Error::Consistency("indicator grid cell missing".into()))?;
        uc[j] = u[i];
    }
    let b_chi = k.form(&uc, &uc);
    let lambda: f64 = vols.iter().sum();
    let mean = (0..n_omega).map(|i| u[i] * vols[i]).sum::<f64>() / lambda;
    let centered: f64 = (0..n_omega).map(|i| (u[i] - mean).powi(2) * vols[i]).sum();
    Ok([double, 2.0 * b_chi, 2.0 * lambda * centered])
}

/// Best constant `C` in `∫_Ω u² ≤ C⟨u,u⟩₀` for `u` vanishing outside Ω.
pub fn estimate_friedrichs(disc: &Discretization, opts: &EigenOptions) -> Result<ConstantReport> {
    let n_omega = disc.n_omega();
    let omega: Vec<usize> = disc.grid().omega().collect();
    let d0 = disc.energy().submatrix(&omega);
    let vols = omega_vols(disc);
    let (value, smallest, method) = if n_omega <= opts.dense_limit {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vols.clone()));
        let mu = generalized_eigenvalues(&d0.to_dense(), &m).expect("mass matrix is positive definite");
        (reciprocal_of_smallest(&mu), mu[0], "dense-generalized-eigen")
    } else {
        let diag = d0.diagonal();
        let x0: Vec<f64> = (0..n_omega).map(|i| 1.0 + 0.1 * ((i as f64) * 0.37).sin()).collect();
        let value = power_largest(
            |x| x.iter().zip(&vols).map(|(a, b)| a * b).collect(),
            |b| {
                let r = cg(|v| d0.matvec(v), &diag, b, opts.tol * 1e-2, opts.max_iter);
                r.converged.then_some(r.x)
            },
            x0,
            opts.tol,
            opts.max_iter,
        );
        (value, 1.0 / value, "power-iteration")
    };
    Ok(ConstantReport {
        name: "friedrichs".into(),
        value,
        bound: None,
        bound_source: String::new(),
        method: method.into(),
        diagnostics: vec![("smallest_generalized_eigenvalue".into(), smallest)],
    })
}

/// Weight `w(y) = ∫_Ω γ(y,x) / (∫_Γ γ(z,x) dz + c) dx` on Γ cells.
pub fn trace_weight(disc: &Discretization, c: f64) -> Result<Vec<f64>> {
    if !(c >= 0.0) {
        return Err(Error::Contract(format!("trace parameter must be nonnegative, got {c}")));
    }
    let mut w = vec![0.0; disc.n()];
    let dens: Vec<f64> = disc.grid().omega().map(|i| disc.gamma_density(i)).collect();
    for k in disc.grid().gamma() {
        let mut s = 0.0;
        for (i, p) in disc.table().row(k) {
            if i < dens.len() {
                let denom = dens[i] + c;
                if denom <= 0.0 {
                    return Err(Error::Division(format!("trace weight denominator vanishes at cell {i}")));
                }
                s += p / denom;
            }
        }
        w[k] = s / disc.volume(k);
    }
    Ok(w)
}

/// Weight `w(y) = ∫_Ω γ(y,x) dx` on Γ cells.
pub fn trace_weight_full(disc: &Discretization) -> Vec<f64> {
    let mut w = vec![0.0; disc.n()];
    for k in disc.grid().gamma() {
        w[k] = disc.out_density(k);
    }
    w
}

/// Operator norm of the trace `V → L²(Γ; w)` with the first weight, and its
/// bound `2·max{1/(ess-inf ∫_Γγ + c), 1}`.
pub fn trace_operator_norm(disc: &Discretization, c: f64, opts: &EigenOptions) -> Result<ConstantReport> {
    let w = trace_weight(disc, c)?;
    let keep: Vec<usize> = (0..disc.n()).filter(|&i| disc.grid().tag(i) != CellTag::GammaHatOnly).collect();
    let g = disc.v_gram().submatrix(&keep);
    let t: Vec<f64> = keep.iter().map(|&i| if disc.is_gamma(i) { w[i] * disc.volume(i) } else { 0.0 }).collect();
    let value = if keep.len() <= opts.dense_limit {
        let ev = generalized_eigenvalues(&DMatrix::from_diagonal(&DVector::from_vec(t)), &g.to_dense())
            .ok_or_else(|| Error::Consistency("V-norm Gram matrix is not definite".into()))?;
        *ev.last().unwrap()
    } else {
        let diag = g.diagonal();
        power_largest(
            |x| x.iter().zip(&t).map(|(a, b)| a * b).collect(),
            |b| {
                let r = cg(|v| g.matvec(v), &diag, b, opts.tol * 1e-2, opts.max_iter);
                r.converged.then_some(r.x)
            },
            vec![1.0; keep.len()],
            opts.tol,
            opts.max_iter,
        )
    };
    let inf_density = disc.grid().omega().map(|i| disc.gamma_density(i)).fold(f64::INFINITY, f64::min);
    let bound = 2.0 * (1.0 / (inf_density + c)).max(1.0);
    Ok(ConstantReport {
        name: "trace_norm_squared".into(),
        value,
        bound: Some(bound),
        bound_source: "splitting u(y) through u(x) and the weighted kernel average".into(),
        method: "dense-generalized-eigen".into(),
        diagnostics: vec![("inf_gamma_density".into(), inf_density), ("c".into(), c)],
    })
}

/// Extension of Γ data by zero on Ω.
pub fn zero_extension(disc: &Discretization, c: &[f64]) -> Result<Vec<f64>> {
    check_len(disc.n(), c.len())?;
    Ok((0..disc.n()).map(|i| if disc.is_gamma(i) { c[i] } else { 0.0 }).collect())
}

/// `(‖Ext c‖²_V, ‖c‖²_{L²(Γ;w)})` with the second trace weight; the two agree.
pub fn extension_norm_identity(disc: &Discretization, c: &[f64]) -> Result<(f64, f64)> {
    let e = zero_extension(disc, c)?;
    let lhs = disc.v_gram().form(&e, &e);
    let w = trace_weight_full(disc);
    let rhs: f64 = disc.grid().gamma().map(|k| c[k] * c[k] * w[k] * disc.volume(k)).sum();
    Ok((lhs, rhs))
}

/// Squared W-norm of Γ data.
pub fn w_norm_sq(disc: &Discretization, v: &[f64], c: f64) -> Result<f64> {
    check_len(disc.n(), v.len())?;
    let w = trace_weight(disc, c)?;
    let mut s: f64 = disc.grid().gamma().map(|k| v[k] * v[k] * w[k] * disc.volume(k)).sum();
    for i in disc.grid().omega() {
        let denom = disc.volume(i) * (disc.gamma_density(i) + c);
        let nb: Vec<(usize, f64)> = disc.table().col(i).filter(|&(k, _)| disc.is_gamma(k)).collect();
        for &(k, a) in &nb {
            for &(l, b) in &nb {
                let d = v[k] - v[l];
                s += d * d * a * b / denom;
            }
        }
    }
    Ok(s)
}

/// Weighted-average extension `E(v)(x) = ∫_Γ v(y)γ(y,x)/(∫_Γγ(s,x) ds + c) dy`
/// on Ω; equal to `v` on Γ.
pub fn extension(disc: &Discretization, v: &[f64], c: f64) -> Result<Vec<f64>> {
    check_len(disc.n(), v.len())?;
    let mut out = vec![0.0; disc.n()];
    for i in disc.grid().omega() {
        let denom = disc.volume(i) * (disc.gamma_density(i) + c);
        let s: f64 = disc.table().col(i).filter(|&(k, _)| disc.is_gamma(k)).map(|(k, w)| v[k] * w).sum();
        out[i] = if s == 0.0 { 0.0 } else { s / denom };
    }
    for k in disc.grid().gamma() {
        out[k] = v[k];
    }
    Ok(out)
}

/// `(‖E v‖²_{L²(Ω)} + ∫_Ω∫_Γ (E v(x) − v(y))² γ(y,x), max{1+2c, 2}·‖v‖²_W)`.
pub fn extension_bound(disc: &Discretization, v: &[f64], c: f64) -> Result<(f64, f64)> {
    let e = extension(disc, v, c)?;
    let mut lhs = 0.0;
    for i in disc.grid().omega() {
        lhs += e[i] * e[i] * disc.volume(i);
        for (k, w) in disc.table().col(i) {
            if disc.is_gamma(k) {
                lhs += (e[i] - v[k]).powi(2) * w;
            }
        }
    }
    let rhs = (1.0 + 2.0 * c).max(2.0) * w_norm_sq(disc, v, c)?;
    Ok((lhs, rhs))
}

/// Both essential suprema of
/// `∫_Ω ∫_Γ (k(s,x) − k(s,y))²/(k(s,x) + k(s,y)) ds γ(y,x)` with
/// `k(s,x) = γ(s,x)/(∫_Γγ(z,x) dz + c)`: over `x` (integrating in `y`) and
/// over `y` (integrating in `x`).
pub fn trace_surjectivity(disc: &Discretization, c: f64) -> Result<(f64, f64)> {
    let grid = disc.grid();
    let n_omega = disc.n_omega();
    let gamma: Vec<usize> = grid.gamma().collect();
    let mut k = DMatrix::zeros(gamma.len(), n_omega);
    for i in grid.omega() {
        let denom = disc.gamma_density(i) + c;
        if denom <= 0.0 {
            return Err(Error::Division(format!("denominator vanishes at cell {i}")));
        }
        for (s, w) in disc.table().col(i) {
            if let Ok(pos) = gamma.binary_search(&s) {
                k[(pos, i)] = w / (disc.volume(s) * disc.volume(i) * denom);
            }
        }
    }
    let inner = |i: usize, j: usize| -> f64 {
        let mut t = 0.0;
        for (pos, &s) in gamma.iter().enumerate() {
            let a = k[(pos, i)];
            let b = k[(pos, j)];
            if a + b > 0.0 {
                t += (a - b).powi(2) / (a + b) * disc.volume(s);
            }
        }
        t
    };
    let mut by_x = vec![0.0; n_omega];
    let mut by_y = vec![0.0; n_omega];
    for j in grid.omega() {
        for (i, w) in disc.table().row(j) {
            if i >= n_omega {
                continue;
            }
            // w = ∫∫ γ(y,x) with y in cell j and x in cell i
            let t = inner(i, j) * w;
            by_x[i] += t / disc.volume(i);
            by_y[j] += t / disc.volume(j);
        }
    }
    Ok((norm_inf(&by_x), norm_inf(&by_y)))
}

/// Gram matrix on Ω of `∫_Ω u v (1 + γ_{α,Ω}) + ∫_Ω∫_Ω (u(x)−u(y))(v(x)−v(y)) γ_α(y,x)`.
pub fn robin_gram(disc: &Discretization, robin: &RobinSet) -> SparseOperator {
    let n = disc.n_omega();
    let mut b = Builder::new(n, n);
    for i in 0..n {
        b.add(i, i, (1.0 + robin.potential[i]) * disc.volume(i));
        for (j, w) in robin.pair.row(i) {
            b.add(i, i, w);
            b.add(j, j, w);
            b.add(i, j, -w);
            b.add(j, i, -w);
        }
    }
    b.build()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbeddingReport {
    /// `|⟨u,v⟩ − ⟨Eu,Ev⟩_V|` for zero extensions and the `α ≡ 1` product.
    pub isometry_residual: f64,
    /// Scale of the inner products in the isometry check.
    pub isometry_scale: f64,
    /// `‖ũ‖_V / ‖u|_Ω‖` with `ũ` the weighted-average extension and the `α ≡ 0` norm.
    pub extension_ratio: f64,
    /// `‖u|_Ω‖ / ‖u‖_V` with the `α ≡ 0` norm.
    pub restriction_ratio: f64,
}

/// Checks the norm relations between the regional spaces and the V-space for
/// the fields `u`, `v` on Ω ∪ Γ.
pub fn regional_embeddings(disc: &Discretization, u: &[f64], v: &[f64]) -> Result<EmbeddingReport> {
    let n = disc.n();
    check_len(n, u.len())?;
    check_len(n, v.len())?;
    let n_omega = disc.n_omega();
    let zero = vec![0.0; n];
    let one_set = crate::solve::robin_transform(disc, &vec![1.0; n], &zero, 1e-12)?;
    let zero_set = crate::solve::robin_transform(disc, &zero, &zero, 1e-12)?;
    let vg = disc.v_gram();
    let ext = |f: &[f64]| -> Vec<f64> { (0..n).map(|i| if i < n_omega { f[i] } else { 0.0 }).collect() };
    let (eu, ev) = (ext(u), ext(v));
    let g1 = robin_gram(disc, &one_set);
    let a = g1.form(&u[..n_omega], &v[..n_omega]);
    let b = vg.form(&eu, &ev);
    let scale = (g1.form(&u[..n_omega], &u[..n_omega]) * g1.form(&v[..n_omega], &v[..n_omega])).sqrt();

    let g0 = robin_gram(disc, &zero_set);
    let v1_sq = g0.form(&u[..n_omega], &u[..n_omega]);
    let tilde = zero_set.reconstruct(disc, &u[..n_omega])?;
    let ext_sq = vg.form(&tilde, &tilde);
    let full_sq = vg.form(u, u);
    Ok(EmbeddingReport {
        isometry_residual: (a - b).abs(),
        isometry_scale: scale.max(f64::MIN_POSITIVE),
        extension_ratio: (ext_sq / v1_sq).sqrt(),
        restriction_ratio: (v1_sq / full_sq).sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobinResiduals {
    /// Relative mismatch between `ℒ_γ u` and the regional operator on Ω.
    pub interior: f64,
    /// Largest residual of `αu + (1−α)𝒩u = g` on Γ.
    pub boundary: f64,
}

/// Reconstructs `u` on Γ from `u_omega` and compares
/// `ℒ_γ u = ℒ_{γ_α} u + γ_{α,Ω} u − g_Γ` on Ω.
pub fn verify_robin_identity(disc: &Discretization, robin: &RobinSet, u_omega: &[f64]) -> Result<RobinResiduals> {
    let n_omega = disc.n_omega();
    let u = robin.reconstruct(disc, u_omega)?;
    let lu = disc.apply_l(&u)?;
    let back = robin.pair.transpose();
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..n_omega {
        let vol = disc.volume(i);
        let out: f64 = robin.pair.row(i).map(|(_, w)| w).sum::<f64>() * u_omega[i];
        let inc: f64 = back.row(i).map(|(j, w)| u_omega[j] * w).sum();
        let rhs = (out - inc) / vol + robin.potential[i] * u_omega[i] - robin.load[i];
        diff = diff.max((lu[i] - rhs).abs());
        scale = scale.max(lu[i].abs()).max((out / vol).abs()).max(robin.load[i].abs());
    }
    let nu = disc.apply_n(&u)?;
    let mut boundary: f64 = 0.0;
    for y in disc.grid().gamma() {
        let a = robin.alpha[y];
        boundary = boundary.max((a * u[y] + (1.0 - a) * nu[y] - robin.g[y]).abs());
    }
    Ok(RobinResiduals { interior: diff / scale.max(f64::MIN_POSITIVE), boundary })
}
