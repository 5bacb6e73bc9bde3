//! Cell-pair quadrature, the shared pair-weight table and the discrete
//! operators assembled from it.
//!
//! Every form and operator below reads the same table, so discrete integration
//! by parts holds to rounding error.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::geometry::{CellTag, Grid};
use crate::kernel::{Kernel, Point, Shape};

/// Sub-cells per axis used by the refined rule.
pub const REFINE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Zero,
    Midpoint,
    Refined,
    AnalyticAdjacent,
}

/// Chooses the quadrature rule for the cell pair centered at `a`, `b`.
pub fn classify(kernel: &Kernel, dim: usize, h: f64, a: Point, b: Point) -> Result<Rule> {
    let mut gap = [0.0; 2];
    for k in 0..dim {
        gap[k] = (a[k] - b[k]).abs();
    }
    let same = gap.iter().all(|&g| g < 0.5 * h);
    let max_gap = gap[0].max(gap[1]);
    let dmin = gap[..dim].iter().map(|&g| (g - h).max(0.0).powi(2)).sum::<f64>().sqrt();
    let dmax = gap[..dim].iter().map(|&g| (g + h).powi(2)).sum::<f64>().sqrt();

    if let Some(delta) = kernel.horizon() {
        if !same && dmin >= delta {
            return Ok(Rule::Zero);
        }
    }
    if let Some(beta) = kernel.singular_exponent() {
        if same {
            return Err(Error::SingularQuadrature(format!(
                "self-interaction of the cell at {a:?} diverges for a singular kernel"
            )));
        }
        let slack = 1.0 + 1e-9;
        if max_gap <= h * slack && beta >= dim as f64 + 1.0 {
            return Err(Error::UnsupportedKernel(format!(
                "singular exponent {beta} is not integrable across adjacent cells in dimension {dim}"
            )));
        }
        if max_gap <= 2.0 * h * slack {
            let closed_form = matches!(kernel.shape(), Shape::Power { exponent, .. }
                if *exponent != 1.0 && *exponent != 2.0);
            return Ok(if dim == 1 && closed_form { Rule::AnalyticAdjacent } else { Rule::Refined });
        }
    }
    if same {
        return Ok(Rule::Refined);
    }
    if let Some(delta) = kernel.horizon() {
        if dmax > delta {
            return Ok(Rule::Refined);
        }
    }
    Ok(Rule::Midpoint)
}

/// `∫_{C_a} ∫_{C_b} γ(p, q) dq dp` for the cells of width `h` centered at `a`
/// and `b`.
pub fn pair_weight(kernel: &Kernel, dim: usize, h: f64, a: Point, b: Point) -> Result<f64> {
    let vol = h.powi(dim as i32);
    Ok(match classify(kernel, dim, h, a, b)? {
        Rule::Zero => 0.0,
        Rule::Midpoint => vol * vol * kernel.eval(a, b),
        Rule::Refined => refined(kernel, dim, h, a, b),
        Rule::AnalyticAdjacent => {
            let Shape::Power { exponent, amplitude } = *kernel.shape() else {
                unreachable!("analytic rule only chosen for power kernels")
            };
            amplitude * power_1d(exponent, a[0], b[0], h)
        }
    })
}

fn refined(kernel: &Kernel, dim: usize, h: f64, a: Point, b: Point) -> f64 {
    let m = REFINE;
    let sub = h / m as f64;
    let offsets: Vec<f64> = (0..m).map(|s| (s as f64 + 0.5) * sub - 0.5 * h).collect();
    let points = |c: Point| -> Vec<Point> {
        if dim == 1 {
            offsets.iter().map(|&o| [c[0] + o, c[1]]).collect()
        } else {
            let mut v = Vec::with_capacity(m * m);
            for &oy in &offsets {
                for &ox in &offsets {
                    v.push([c[0] + ox, c[1] + oy]);
                }
            }
            v
        }
    };
    let pa = points(a);
    let pb = points(b);
    let w = sub.powi(dim as i32);
    let mut s = 0.0;
    for &p in &pa {
        for &q in &pb {
            s += kernel.eval(p, q);
        }
    }
    s * w * w
}

/// `∫∫ |x − y|^(−β)` over two disjoint intervals of width `h`.
fn power_1d(beta: f64, a: f64, b: f64, h: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let (a1, a2) = (lo - 0.5 * h, lo + 0.5 * h);
    let (b1, b2) = (hi - 0.5 * h, hi + 0.5 * h);
    let c = (1.0 - beta) * (2.0 - beta);
    let g = |t: f64| if t <= 0.0 { 0.0 } else { t.powf(2.0 - beta) / c };
    g(b2 - a1) - g(b2 - a2) - g(b1 - a1) + g(b1 - a2)
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates entries row by row; duplicates are summed in insertion order.
#[derive(Clone, Debug)]
pub struct Builder {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Builder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Builder { n_cols, rows: vec![Vec::new(); n_rows] }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.rows[i].push((j, v));
    }

    pub fn build(self) -> SparseOperator {
        let n_rows = self.rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in self.rows {
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for (j, v) in row {
                if j == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = j;
                }
            }
            indptr.push(indices.len());
        }
        SparseOperator { n_rows, n_cols: self.n_cols, indptr, indices, values }
    }
}

impl SparseOperator {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut b = Builder::new(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                b.add(j, i, v);
            }
        }
        b.build()
    }

    /// `xᵀ A y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Principal submatrix on the given index list.
    pub fn submatrix(&self, keep: &[usize]) -> SparseOperator {
        let mut map = vec![usize::MAX; self.n_cols.max(self.n_rows)];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut b = Builder::new(keep.len(), keep.len());
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    b.add(k, map[j], v);
                }
            }
        }
        b.build()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Pair weights `P(a, b) = ∫_{C_a} ∫_{C_b} γ(p, q) dq dp` over active cells,
/// stored for every pair with at least one Ω cell. Zero weights are omitted.
#[derive(Clone, Debug)]
pub struct PairTable {
    rows: SparseOperator,
    cols: SparseOperator,
}

impl PairTable {
    /// `P(a, b)`.
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.rows.get(a, b)
    }
    /// `(b, P(a, b))` for stored `b`.
    pub fn row(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows.row(a)
    }
    /// `(b, P(b, a))` for stored `b`.
    pub fn col(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cols.row(a)
    }
    pub fn nnz(&self) -> usize {
        self.rows.nnz()
    }
    pub fn as_operator(&self) -> &SparseOperator {
        &self.rows
    }
}

/// Grid, kernel and the pair-weight table shared by every discrete operator.
#[derive(Clone, Debug)]
pub struct Discretization {
    grid: Grid,
    kernel: Kernel,
    table: PairTable,
}

impl Discretization {
    pub fn new(grid: Grid, kernel: Kernel) -> Result<Self> {
        if grid.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: kernel.dim() });
        }
        let n = grid.n_active();
        let n_omega = grid.n_omega();
        let dim = grid.dim();
        let h = grid.h();
        let rows: Result<Vec<Vec<(usize, f64)>>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let end = if a < n_omega { n } else { n_omega };
                let ca = grid.center(a);
                let mut row = Vec::new();
                for b in 0..end {
                    if b == a {
                        continue;
                    }
                    let w = pair_weight(&kernel, dim, h, ca, grid.center(b))?;
                    if !w.is_finite() || w < 0.0 {
                        return Err(Error::InvalidKernel(format!(
                            "pair weight {w} between cells {a} and {b} is not a nonnegative number"
                        )));
                    }
                    if w > 0.0 {
                        row.push((b, w));
                    }
                }
                Ok(row)
            })
            .collect();
        let mut b = Builder::new(n, n);
        for (a, row) in rows?.into_iter().enumerate() {
            b.rows[a] = row;
        }
        let rows = b.build();
        let cols = rows.transpose();
        Ok(Discretization { grid, kernel, table: PairTable { rows, cols } })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
    pub fn table(&self) -> &PairTable {
        &self.table
    }
    pub fn n(&self) -> usize {
        self.grid.n_active()
    }
    pub fn n_omega(&self) -> usize {
        self.grid.n_omega()
    }
    pub fn volume(&self, i: usize) -> f64 {
        self.grid.volume(i)
    }
    pub fn is_omega(&self, i: usize) -> bool {
        i < self.grid.n_omega()
    }
    pub fn is_gamma(&self, i: usize) -> bool {
        self.grid.tag(i) == CellTag::Gamma
    }

    /// Scales the stored weight `P(a, b)` by `factor`. Used to check that the
    /// identity suite detects a corrupted table. Returns false if the pair is
    /// not stored.
    pub fn tamper(&mut self, a: usize, b: usize, factor: f64) -> bool {
        let scale = |op: &mut SparseOperator, i: usize, j: usize| -> bool {
            let r = op.indptr[i]..op.indptr[i + 1];
            match op.indices[r.clone()].binary_search(&j) {
                Ok(k) => {
                    op.values[r.start + k] *= factor;
                    true
                }
                Err(_) => false,
            }
        };
        scale(&mut self.table.rows, a, b) && scale(&mut self.table.cols, b, a)
    }

    /// Cell average over `C_a` of `∫_Ω γ(y, x) dx`.
    pub fn out_density(&self, a: usize) -> f64 {
        let s: f64 = self.table.row(a).filter(|&(b, _)| self.is_omega(b)).map(|(_, w)| w).sum();
        s / self.volume(a)
    }

    /// Cell average over `C_a` of `∫_Ω γ(x, y) dx`.
    pub fn in_density(&self, a: usize) -> f64 {
        let s: f64 = self.table.col(a).filter(|&(b, _)| self.is_omega(b)).map(|(_, w)| w).sum();
        s / self.volume(a)
    }

    /// Cell average over Ω cell `i` of `∫_Γ γ(y, x) dy`.
    pub fn gamma_density(&self, i: usize) -> f64 {
        let s: f64 = self.table.col(i).filter(|&(b, _)| self.is_gamma(b)).map(|(_, w)| w).sum();
        s / self.volume(i)
    }

    /// Volume vector restricted to Ω, zero elsewhere.
    pub fn omega_mass(&self) -> Vec<f64> {
        (0..self.n()).map(|i| if self.is_omega(i) { self.volume(i) } else { 0.0 }).collect()
    }

    fn check_field(&self, u: &[f64]) -> Result<()> {
        check_len(self.n(), u.len())
    }

    /// Strong operator `ℒu(x) = ∫ u(x)γ(x,y) − u(y)γ(y,x) dy` on Ω cells;
    /// zero on other cells.
    pub fn apply_l(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_field(u)?;
        let mut out = vec![0.0; self.n()];
        out[..self.n_omega()].par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut s = 0.0;
            for (_, w) in self.table.row(i) {
                s += u[i] * w;
            }
            for (j, w) in self.table.col(i) {
                s -= u[j] * w;
            }
            *o = s / self.volume(i);
        });
        Ok(out)
    }

    /// Nonlocal Neumann operator `𝒩u(y) = ∫_Ω u(y)γ(y,x) − u(x)γ(x,y) dx`
    /// on Γ̂ cells; zero on Ω cells.
    pub fn apply_n(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_field(u)?;
        let mut out = vec![0.0; self.n()];
        for k in self.grid.gamma_hat() {
            let mut s = 0.0;
            for (_, w) in self.table.row(k) {
                s += u[k] * w;
            }
            for (i, w) in self.table.col(k) {
                s -= u[i] * w;
            }
            out[k] = s / self.volume(k);
        }
        Ok(out)
    }

    /// Symmetric stiffness matrix over Ω ∪ Γ with `vᵀKu = 𝔅(u, v)`.
    pub fn stiffness(&self) -> Result<SparseOperator> {
        if !self.kernel.is_symmetric() {
            return Err(Error::Contract("the symmetric stiffness matrix requires a symmetric kernel".into()));
        }
        let n = self.n();
        let mut b = Builder::new(n, n);
        for i in self.grid.omega() {
            for (j, w) in self.table.col(i) {
                let w = match self.grid.tag(j) {
                    CellTag::Omega => 0.5 * w,
                    CellTag::Gamma => w,
                    _ => continue,
                };
                b.add(i, i, w);
                b.add(j, j, w);
                b.add(i, j, -w);
                b.add(j, i, -w);
            }
        }
        Ok(b.build())
    }

    /// Gram matrix of the seminorm `∫_Ω ∫ (u(x) − u(y))² γ(y,x) dy dx`.
    pub fn energy(&self) -> SparseOperator {
        let n = self.n();
        let mut b = Builder::new(n, n);
        for i in self.grid.omega() {
            for (j, w) in self.table.col(i) {
                if !matches!(self.grid.tag(j), CellTag::Omega | CellTag::Gamma) {
                    continue;
                }
                b.add(i, i, w);
                b.add(j, j, w);
                b.add(i, j, -w);
                b.add(j, i, -w);
            }
        }
        b.build()
    }

    /// Gram matrix of the V-norm, `M + energy`.
    pub fn v_gram(&self) -> SparseOperator {
        let n = self.n();
        let e = self.energy();
        let mut b = Builder::new(n, n);
        for i in 0..n {
            for (j, v) in e.row(i) {
                b.add(i, j, v);
            }
            if self.is_omega(i) {
                b.add(i, i, self.volume(i));
            }
        }
        b.build()
    }

    /// Matrix `A` over all active cells with `uᵀAv` equal to the nonsymmetric
    /// form with potential `alpha` on Ω.
    pub fn nonsym_form(&self, alpha: &[f64]) -> Result<SparseOperator> {
        self.check_field(alpha)?;
        let n = self.n();
        let mut b = Builder::new(n, n);
        for i in self.grid.omega() {
            for (j, w) in self.table.row(i) {
                b.add(i, i, w);
                b.add(i, j, -w);
            }
            for (k, w) in self.table.col(i) {
                if self.is_omega(k) {
                    continue;
                }
                b.add(k, i, -w);
                b.add(k, k, w);
            }
            b.add(i, i, alpha[i] * self.volume(i));
        }
        Ok(b.build())
    }

    /// Load vector: `f·vol` on Ω cells and `g·vol` on Γ cells.
    pub fn load(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check_field(f)?;
        self.check_field(g)?;
        Ok((0..self.n())
            .map(|i| match self.grid.tag(i) {
                CellTag::Omega => f[i] * self.volume(i),
                CellTag::Gamma => g[i] * self.volume(i),
                _ => 0.0,
            })
            .collect())
    }

    /// Samples `f` at the active cell centers.
    pub fn sample<F: Fn(Point) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n()).map(|i| f(self.grid.center(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Domain};

    fn k1() -> Kernel {
        Kernel::truncated(1, 0.5, 1.0).unwrap()
    }

    #[test]
    fn midpoint_pairs_for_indicator() {
        let k = k1();
        assert_eq!(pair_weight(&k, 1, 0.25, [0.125, 0.0], [0.375, 0.0]).unwrap(), 0.0625);
        assert_eq!(pair_weight(&k, 1, 0.25, [0.875, 0.0], [1.125, 0.0]).unwrap(), 0.0625);
        assert_eq!(pair_weight(&k, 1, 0.25, [0.125, 0.0], [0.875, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn adjacent_fractional_closed_form() {
        let k = Kernel::fractional(1, 0.25, 1.0).unwrap();
        let w = pair_weight(&k, 1, 1.0, [0.5, 0.0], [1.5, 0.0]).unwrap();
        let exact = 4.0 * (2.0 - 2.0f64.sqrt());
        assert!((w - exact).abs() < 1e-13, "{w} vs {exact}");
    }

    #[test]
    fn singular_self_pair_is_error() {
        let k = Kernel::fractional(1, 0.25, 1.0).unwrap();
        assert!(matches!(
            pair_weight(&k, 1, 0.1, [0.05, 0.0], [0.05, 0.0]),
            Err(Error::SingularQuadrature(_))
        ));
    }

    #[test]
    fn strongly_singular_adjacent_pair_is_unsupported() {
        let k = Kernel::fractional(1, 0.75, 1.0).unwrap();
        assert!(matches!(
            pair_weight(&k, 1, 0.1, [0.05, 0.0], [0.15, 0.0]),
            Err(Error::UnsupportedKernel(_))
        ));
        // separated pairs remain fine
        assert!(pair_weight(&k, 1, 0.1, [0.05, 0.0], [0.35, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn stiffness_annihilates_constants_and_is_symmetric() {
        let k = k1();
        let g = build_grid(&Domain::interval(0.0, 1.0).unwrap(), &k, 1.0 / 16.0, 0.5, None).unwrap();
        let d = Discretization::new(g, k).unwrap();
        let s = d.stiffness().unwrap();
        let ones = vec![1.0; d.n()];
        let r = s.matvec(&ones);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(s.max_asymmetry(), 0.0);
    }

    #[test]
    fn stiffness_rejects_nonsymmetric_kernel() {
        let k = Kernel::custom(1, false, Some(0.5), None, "skew", |y, x| {
            if crate::kernel::distance(x, y) < 0.5 { 1.0 + 0.1 * (y[0] - x[0]).signum() } else { 0.0 }
        })
        .unwrap();
        let g = build_grid(&Domain::interval(0.0, 1.0).unwrap(), &k, 0.25, 0.5, None).unwrap();
        let d = Discretization::new(g, k).unwrap();
        assert!(matches!(d.stiffness(), Err(Error::Contract(_))));
    }

    #[test]
    fn stiffness_entry_matches_fine_quadrature() {
        let k = k1();
        let g = build_grid(&Domain::interval(0.0, 1.0).unwrap(), &k, 0.25, 0.5, None).unwrap();
        let d = Discretization::new(g, k.clone()).unwrap();
        let s = d.stiffness().unwrap();
        let i = d.grid().locate([0.875, 0.0]).unwrap();
        let j = d.grid().locate([1.125, 0.0]).unwrap();
        // brute-force midpoint sums over 10 sub-cells per cell
        let m = 10;
        let sub = 0.25 / m as f64;
        let mut w = 0.0;
        for p in 0..m {
            for q in 0..m {
                let x = 0.75 + (p as f64 + 0.5) * sub;
                let y = 1.0 + (q as f64 + 0.5) * sub;
                w += k.eval([y, 0.0], [x, 0.0]) * sub * sub;
            }
        }
        assert!((s.get(i, j) + w).abs() < 1e-14);
        assert!((w - 0.0625).abs() < 1e-14);
    }

    #[test]
    fn sparse_roundtrip() {
        let mut b = Builder::new(2, 3);
        b.add(0, 2, 1.0);
        b.add(0, 0, 2.0);
        b.add(0, 2, 0.5);
        b.add(1, 1, -1.0);
        let a = b.build();
        assert_eq!(a.get(0, 2), 1.5);
        assert_eq!(a.matvec(&[1.0, 2.0, 3.0]), vec![6.5, -2.0]);
        assert_eq!(a.transpose().get(2, 0), 1.5);
        let mut out = Vec::new();
        a.write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n2 3 3\n"));
    }
}
