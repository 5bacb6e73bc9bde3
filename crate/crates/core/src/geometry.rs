//! Domains, uniform cell grids and nonlocal boundary detection.

use rayon::prelude::*;

use crate::assembly::pair_weight;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, Point, Shape};

/// Open axis-aligned box. In 1D the second axis is ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Point,
    pub hi: Point,
}

/// Finite union of open axis-aligned boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    dim: usize,
    boxes: Vec<Aabb>,
}

impl Domain {
    pub fn new(dim: usize, boxes: Vec<Aabb>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidDomain(format!("dimension must be 1 or 2, got {dim}")));
        }
        if boxes.is_empty() {
            return Err(Error::InvalidDomain("no boxes given".into()));
        }
        for b in &boxes {
            for k in 0..dim {
                if !(b.lo[k] < b.hi[k]) || !b.lo[k].is_finite() || !b.hi[k].is_finite() {
                    return Err(Error::InvalidDomain(format!("degenerate box {b:?}")));
                }
            }
        }
        let boxes = boxes
            .into_iter()
            .map(|b| {
                if dim == 1 {
                    Aabb { lo: [b.lo[0], 0.0], hi: [b.hi[0], 0.0] }
                } else {
                    b
                }
            })
            .collect();
        Ok(Domain { dim, boxes })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Domain::new(1, vec![Aabb { lo: [a, 0.0], hi: [b, 0.0] }])
    }

    pub fn rect(lo: Point, hi: Point) -> Result<Self> {
        Domain::new(2, vec![Aabb { lo, hi }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[Aabb] {
        &self.boxes
    }

    pub fn contains(&self, p: Point) -> bool {
        self.boxes
            .iter()
            .any(|b| (0..self.dim).all(|k| p[k] > b.lo[k] && p[k] < b.hi[k]))
    }

    /// Euclidean distance from `p` to the closure of the union.
    pub fn distance(&self, p: Point) -> f64 {
        self.boxes
            .iter()
            .map(|b| {
                let mut s = 0.0;
                for k in 0..self.dim {
                    let d = (b.lo[k] - p[k]).max(p[k] - b.hi[k]).max(0.0);
                    s += d * d;
                }
                s.sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn bounding_box(&self) -> Aabb {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for b in &self.boxes {
            for k in 0..2 {
                lo[k] = lo[k].min(b.lo[k]);
                hi[k] = hi[k].max(b.hi[k]);
            }
        }
        Aabb { lo, hi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellTag {
    Omega,
    Gamma,
    GammaHatOnly,
    Exterior,
}

impl CellTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CellTag::Omega => "OMEGA",
            CellTag::Gamma => "GAMMA",
            CellTag::GammaHatOnly => "GAMMA_HAT_ONLY",
            CellTag::Exterior => "EXTERIOR",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Lattice index; the cell is `[index·h, (index+1)·h]` along each axis.
    pub index: [i64; 2],
    pub center: Point,
    pub volume: f64,
    pub tag: CellTag,
}

/// Uniform grid of cells covering Ω and every exterior cell within the
/// truncation radius.
///
/// Cells are ordered by tag (Ω, Γ, Γ̂-only, exterior) and lexicographically
/// within a tag, so the first `n_active()` cells carry the unknowns.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: Domain,
    h: f64,
    radius: f64,
    eps_gamma: f64,
    cells: Vec<Cell>,
    counts: [usize; 4],
    tail_mass: Option<f64>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.domain.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn eps_gamma(&self) -> f64 {
        self.eps_gamma
    }
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }
    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }
    pub fn n_omega(&self) -> usize {
        self.counts[0]
    }
    pub fn n_gamma(&self) -> usize {
        self.counts[1]
    }
    pub fn n_gamma_hat_only(&self) -> usize {
        self.counts[2]
    }
    pub fn n_exterior(&self) -> usize {
        self.counts[3]
    }
    /// Number of cells carrying unknowns: Ω, Γ and Γ̂-only.
    pub fn n_active(&self) -> usize {
        self.counts[0] + self.counts[1] + self.counts[2]
    }
    /// Index range of Ω cells.
    pub fn omega(&self) -> std::ops::Range<usize> {
        0..self.counts[0]
    }
    /// Index range of Γ cells.
    pub fn gamma(&self) -> std::ops::Range<usize> {
        self.counts[0]..self.counts[0] + self.counts[1]
    }
    /// Index range of Γ̂ cells (Γ followed by Γ̂-only).
    pub fn gamma_hat(&self) -> std::ops::Range<usize> {
        self.counts[0]..self.n_active()
    }
    /// Index range of cells in Γ̂ but not in Γ.
    pub fn gamma_hat_only(&self) -> std::ops::Range<usize> {
        self.counts[0] + self.counts[1]..self.n_active()
    }
    pub fn tag(&self, i: usize) -> CellTag {
        self.cells[i].tag
    }
    pub fn volume(&self, i: usize) -> f64 {
        self.cells[i].volume
    }
    pub fn center(&self, i: usize) -> Point {
        self.cells[i].center
    }
    /// Approximate measure of Ω, the total volume of Ω cells.
    pub fn omega_measure(&self) -> f64 {
        self.omega().map(|i| self.volume(i)).sum()
    }
    /// Kernel mass dropped by truncating at the grid radius, when known.
    pub fn tail_mass(&self) -> Option<f64> {
        self.tail_mass
    }

    /// Locates the active cell whose index equals `index`.
    pub fn find(&self, index: [i64; 2]) -> Option<usize> {
        self.cells[..self.n_active()].iter().position(|c| c.index == index)
    }

    /// Index of the active cell containing `p`, if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let mut idx = [0i64; 2];
        for k in 0..self.dim() {
            idx[k] = (p[k] / self.h).floor() as i64;
        }
        self.find(idx)
    }

    fn from_cells(domain: Domain, h: f64, radius: f64, eps_gamma: f64, mut cells: Vec<Cell>, tail_mass: Option<f64>) -> Self {
        cells.sort_by(|a, b| {
            a.tag
                .cmp(&b.tag)
                .then(a.index[1].cmp(&b.index[1]))
                .then(a.index[0].cmp(&b.index[0]))
        });
        let mut counts = [0usize; 4];
        for c in &cells {
            counts[c.tag as usize] += 1;
        }
        Grid { domain, h, radius, eps_gamma, cells, counts, tail_mass }
    }
}

fn tail_mass(kernel: &Kernel, radius: f64) -> Option<f64> {
    if kernel.horizon().is_some_and(|d| d <= radius) {
        return Some(0.0);
    }
    match *kernel.shape() {
        Shape::Power { exponent, amplitude } => {
            let d = kernel.dim() as f64;
            let sphere = if kernel.dim() == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
            Some(amplitude * sphere * radius.powf(d - exponent) / (exponent - d))
        }
        _ => None,
    }
}

/// Builds the grid of width `h` over Ω and all exterior cells whose centers
/// lie within distance `radius` of Ω, then tags the exterior cells.
///
/// `eps_gamma` defaults to `1e-14 · h^d`.
pub fn build_grid(domain: &Domain, kernel: &Kernel, h: f64, radius: f64, eps_gamma: Option<f64>) -> Result<Grid> {
    let dim = domain.dim();
    if kernel.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: kernel.dim() });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidGrid(format!("cell width must be positive, got {h}")));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidGrid(format!("truncation radius must be positive, got {radius}")));
    }
    if let Some(delta) = kernel.horizon() {
        if radius < delta {
            return Err(Error::InvalidGrid(format!(
                "truncation radius {radius} is smaller than the kernel horizon {delta}"
            )));
        }
    }
    let bb = domain.bounding_box();
    let mut lo = [0i64; 2];
    let mut hi = [0i64; 2];
    for k in 0..dim {
        lo[k] = ((bb.lo[k] - radius) / h).floor() as i64 - 1;
        hi[k] = ((bb.hi[k] + radius) / h).ceil() as i64 + 1;
    }
    let vol = h.powi(dim as i32);
    let mut cells = Vec::new();
    for j in lo[1]..=hi[1] {
        for i in lo[0]..=hi[0] {
            let index = [i, j];
            let mut center = [0.0; 2];
            for k in 0..dim {
                center[k] = (index[k] as f64 + 0.5) * h;
            }
            let tag = if domain.contains(center) {
                CellTag::Omega
            } else if domain.distance(center) < radius {
                CellTag::Exterior
            } else {
                continue;
            };
            cells.push(Cell { index, center, volume: vol, tag });
        }
    }
    if !cells.iter().any(|c| c.tag == CellTag::Omega) {
        return Err(Error::InvalidGrid("no cell center lies inside the domain".into()));
    }
    let eps = eps_gamma.unwrap_or(1e-14 * vol);
    let grid = Grid::from_cells(domain.clone(), h, radius, eps, cells, tail_mass(kernel, radius));
    detect_nonlocal_boundary(&grid, kernel, Some(eps))
}

/// Re-tags every non-Ω cell from quadrature estimates of the cell averages of
/// `∫_Ω γ(y, x) dx` and `∫_Ω γ(x, y) dx`.
pub fn detect_nonlocal_boundary(grid: &Grid, kernel: &Kernel, eps_gamma: Option<f64>) -> Result<Grid> {
    let eps = eps_gamma.unwrap_or(grid.eps_gamma);
    let dim = grid.dim();
    let h = grid.h;
    let omega: Vec<Point> = grid.omega().map(|i| grid.center(i)).collect();
    let tagged: Result<Vec<Cell>> = grid
        .cells
        .par_iter()
        .map(|c| {
            if c.tag == CellTag::Omega {
                return Ok(c.clone());
            }
            let mut out = 0.0;
            let mut inn = 0.0;
            for &x in &omega {
                out += pair_weight(kernel, dim, h, c.center, x)?;
                inn += pair_weight(kernel, dim, h, x, c.center)?;
            }
            out /= c.volume;
            inn /= c.volume;
            let tag = if out > eps {
                CellTag::Gamma
            } else if inn > eps {
                CellTag::GammaHatOnly
            } else {
                CellTag::Exterior
            };
            Ok(Cell { tag, ..c.clone() })
        })
        .collect();
    Ok(Grid::from_cells(grid.domain.clone(), h, grid.radius, eps, tagged?, grid.tail_mass))
}
