//! Dense factorizations, Krylov solvers and symmetric eigenvalue helpers.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves `a x = b` by LU with partial pivoting; `None` if `a` is singular.
pub fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let lu = a.clone().lu();
    let x = lu.solve(&DVector::from_column_slice(b))?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x.as_slice().to_vec())
    } else {
        None
    }
}

#[derive(Clone, Debug)]
pub struct IterOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// (semi)definite operator.
pub fn cg<A>(apply: A, diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> IterOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return IterOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0, converged: true };
    }
    let inv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    let mut rel = 1.0;
    while it < max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        rel = norm2(&r) / bnorm;
        if rel <= tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let true_rel = {
        let ax = apply(&x);
        let res: Vec<f64> = b.iter().zip(&ax).map(|(a, b)| a - b).collect();
        norm2(&res) / bnorm
    };
    rel = rel.max(true_rel);
    IterOutcome { x, iterations: it, relative_residual: rel, converged: rel <= tol }
}

/// Jacobi-preconditioned BiCGSTAB for general square operators.
pub fn bicgstab<A>(apply: A, diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> IterOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return IterOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0, converged: true };
    }
    let inv: Vec<f64> = diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv).map(|(a, b)| a * b).collect() };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut it = 0;
    while it < max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = precond(&p);
        v = apply(&ph);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        let sh = precond(&s);
        let t = apply(&sh);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        it += 1;
        if norm2(&r) / bnorm <= tol || omega == 0.0 {
            break;
        }
    }
    let ax = apply(&x);
    let res: Vec<f64> = b.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let rel = norm2(&res) / bnorm;
    IterOutcome { x, iterations: it, relative_residual: rel, converged: rel <= tol }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = 0.5 * (a + a.transpose());
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of `a x = λ b x` in ascending order, for symmetric `a` and
/// symmetric positive definite `b`. `None` if `b` is not positive definite.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<Vec<f64>> {
    let bs = 0.5 * (b + b.transpose());
    let chol = bs.cholesky()?;
    let l = chol.l();
    let x = l.solve_lower_triangular(a)?;
    let c = l.solve_lower_triangular(&x.transpose())?;
    Some(sym_eigenvalues(&c))
}

/// Orthonormal basis (as columns) of the complement of the constant vector.
pub fn mean_zero_basis(n: usize) -> DMatrix<f64> {
    assert!(n >= 2);
    // Householder reflection mapping e_0 onto the normalized constant vector
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    v[0] -= 1.0;
    let vv = v.dot(&v);
    let h = DMatrix::identity(n, n) - (2.0 / vv) * &v * v.transpose();
    h.columns(1, n - 1).into_owned()
}

/// Largest eigenvalue of `a x = λ b x` by power iteration on `b⁻¹a`.
///
/// `solve_b` returns `None` when the solve fails, which is reported as an
/// unbounded pencil.
pub fn power_largest<A, S>(apply_a: A, solve_b: S, x0: Vec<f64>, tol: f64, max_iter: usize) -> f64
where
    A: Fn(&[f64]) -> Vec<f64>,
    S: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x0;
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let ax = apply_a(&x);
        let Some(y) = solve_b(&ax) else {
            return f64::INFINITY;
        };
        let ay = apply_a(&y);
        let by_num = dot(&y, &ay);
        // Rayleigh quotient yᵀAy / yᵀBy with By = Ax
        let by_den = dot(&y, &ax);
        if by_den <= 0.0 {
            return lambda;
        }
        let new = by_num / by_den;
        let ny = norm2(&y);
        x = y.iter().map(|v| v / ny).collect();
        if (new - lambda).abs() <= tol * new.abs() {
            return new;
        }
        lambda = new;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn cg_matches_dense() {
        let a = spd(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x = dense_solve(&a, &b).unwrap();
        let diag: Vec<f64> = (0..30).map(|i| a[(i, i)]).collect();
        let it = cg(|v| (&a * DVector::from_column_slice(v)).as_slice().to_vec(), &diag, &b, 1e-12, 500);
        assert!(it.converged);
        for (p, q) in x.iter().zip(&it.x) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn bicgstab_on_nonsymmetric() {
        let n = 25;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                3.0
            } else if j == i + 1 {
                -1.2
            } else if i == j + 1 {
                -0.6
            } else {
                0.0
            }
        });
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let x = dense_solve(&a, &b).unwrap();
        let diag = vec![3.0; n];
        let it = bicgstab(|v| (&a * DVector::from_column_slice(v)).as_slice().to_vec(), &diag, &b, 1e-12, 500);
        assert!(it.converged);
        for (p, q) in x.iter().zip(&it.x) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn generalized_eigen_of_scaled_identity() {
        let a = spd(5);
        let b = DMatrix::identity(5, 5) * 2.0;
        let g = generalized_eigenvalues(&a, &b).unwrap();
        let s = sym_eigenvalues(&a);
        for (p, q) in g.iter().zip(&s) {
            assert!((p - q / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let q = mean_zero_basis(7);
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(6, 6)).norm() < 1e-13);
        let ones = DVector::from_element(7, 1.0);
        assert!((q.transpose() * ones).norm() < 1e-13);
    }

    #[test]
    fn power_iteration_finds_top_eigenvalue() {
        let a = spd(12);
        let b = DMatrix::identity(12, 12);
        let top = *sym_eigenvalues(&a).last().unwrap();
        let est = power_largest(
            |v| (&a * DVector::from_column_slice(v)).as_slice().to_vec(),
            |v| dense_solve(&b, v),
            (0..12).map(|i| 1.0 + (i as f64).cos()).collect(),
            1e-12,
            5000,
        );
        assert!((est - top).abs() < 1e-6 * top);
    }
}
