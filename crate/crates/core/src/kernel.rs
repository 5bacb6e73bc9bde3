//! Interaction kernels γ(x, y) ≥ 0 and the transforms built on top of them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Domain;

/// A point in one or two dimensions. In 1D the second coordinate is 0.
pub type Point = [f64; 2];

pub fn distance(x: Point, y: Point) -> f64 {
    let a = x[0] - y[0];
    let b = x[1] - y[1];
    (a * a + b * b).sqrt()
}

/// Closed-form description used by the quadrature when available.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// `amplitude` on ‖x−y‖ < `delta`, zero elsewhere.
    Truncated { delta: f64, amplitude: f64 },
    /// `amplitude · ‖x−y‖^(−exponent)`.
    Power { exponent: f64, amplitude: f64 },
    General,
}

type EvalFn = dyn Fn(Point, Point) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct Kernel {
    eval: Arc<EvalFn>,
    dim: usize,
    symmetric: bool,
    horizon: Option<f64>,
    singular_exponent: Option<f64>,
    regional: bool,
    label: String,
    shape: Shape,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("symmetric", &self.symmetric)
            .field("horizon", &self.horizon)
            .field("singular_exponent", &self.singular_exponent)
            .field("regional", &self.regional)
            .finish()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!("dimension must be 1 or 2, got {dim}")))
    }
}

impl Kernel {
    /// Indicator kernel `amplitude · 1[‖x−y‖ < delta]`.
    pub fn truncated(dim: usize, delta: f64, amplitude: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidKernel(format!("horizon must be positive, got {delta}")));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidKernel(format!("amplitude must be nonnegative, got {amplitude}")));
        }
        Ok(Kernel {
            eval: Arc::new(move |x, y| if distance(x, y) < delta { amplitude } else { 0.0 }),
            dim,
            symmetric: true,
            horizon: Some(delta),
            singular_exponent: None,
            regional: false,
            label: format!("truncated(delta={delta}, amplitude={amplitude})"),
            shape: Shape::Truncated { delta, amplitude },
        })
    }

    /// Fractional-type kernel `amplitude · ‖x−y‖^(−d−2s)` for `0 < s < 1`.
    ///
    /// Construction accepts any such `s`; pair quadrature rejects adjacent
    /// cells when `s ≥ 1/2`.
    pub fn fractional(dim: usize, s: f64, amplitude: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidKernel(format!("fractional order must lie in (0,1), got {s}")));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidKernel(format!("amplitude must be positive, got {amplitude}")));
        }
        let exponent = dim as f64 + 2.0 * s;
        Ok(Kernel {
            eval: Arc::new(move |x, y| amplitude * distance(x, y).powf(-exponent)),
            dim,
            symmetric: true,
            horizon: None,
            singular_exponent: Some(exponent),
            regional: false,
            label: format!("fractional(s={s}, amplitude={amplitude})"),
            shape: Shape::Power { exponent, amplitude },
        })
    }

    /// Constant kernel with unbounded support.
    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidKernel(format!("constant must be nonnegative, got {value}")));
        }
        Ok(Kernel {
            eval: Arc::new(move |_, _| value),
            dim,
            symmetric: true,
            horizon: None,
            singular_exponent: None,
            regional: false,
            label: format!("constant({value})"),
            shape: Shape::General,
        })
    }

    /// Arbitrary kernel given by a callback. `horizon` must bound the support
    /// and `singular_exponent` the blow-up rate at the diagonal, if any.
    pub fn custom<F>(
        dim: usize,
        symmetric: bool,
        horizon: Option<f64>,
        singular_exponent: Option<f64>,
        label: impl Into<String>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(Point, Point) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        if let Some(d) = horizon {
            if !(d > 0.0) {
                return Err(Error::InvalidKernel(format!("horizon must be positive, got {d}")));
            }
        }
        Ok(Kernel {
            eval: Arc::new(f),
            dim,
            symmetric,
            horizon,
            singular_exponent,
            regional: false,
            label: label.into(),
            shape: Shape::General,
        })
    }

    #[inline]
    pub fn eval(&self, x: Point, y: Point) -> f64 {
        (self.eval)(x, y)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn singular_exponent(&self) -> Option<f64> {
        self.singular_exponent
    }

    pub fn is_regional(&self) -> bool {
        self.regional
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Checks nonnegativity, declared symmetry and declared horizon on every
    /// ordered pair of `samples`.
    pub fn check_samples(&self, samples: &[Point], sym_tol: f64) -> Result<()> {
        for &x in samples {
            for &y in samples {
                if x == y {
                    continue;
                }
                let v = self.eval(x, y);
                if v.is_nan() || v < 0.0 {
                    return Err(Error::InvalidKernel(format!(
                        "value {v} at ({x:?}, {y:?}) is not a nonnegative number"
                    )));
                }
                if self.symmetric {
                    let w = self.eval(y, x);
                    if (v - w).abs() > sym_tol * v.abs().max(w.abs()).max(1.0) {
                        return Err(Error::InvalidKernel(format!(
                            "declared symmetric but γ(x,y)={v} and γ(y,x)={w} at ({x:?}, {y:?})"
                        )));
                    }
                }
                if let Some(d) = self.horizon {
                    if distance(x, y) >= d && v != 0.0 {
                        return Err(Error::InvalidKernel(format!(
                            "nonzero value {v} beyond the declared horizon {d}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `transpose(k)(x, y) = k(y, x)`.
pub fn transpose(k: &Kernel) -> Kernel {
    let inner = k.eval.clone();
    Kernel {
        eval: Arc::new(move |x, y| inner(y, x)),
        dim: k.dim,
        symmetric: k.symmetric,
        horizon: k.horizon,
        singular_exponent: k.singular_exponent,
        regional: k.regional,
        label: format!("transpose({})", k.label),
        shape: if k.symmetric { k.shape.clone() } else { Shape::General },
    }
}

/// Restriction of `k` to Ω×Ω.
pub fn regional(k: &Kernel, omega: &Domain) -> Result<Kernel> {
    if omega.dim() != k.dim {
        return Err(Error::DimensionMismatch { expected: k.dim, got: omega.dim() });
    }
    let inner = k.eval.clone();
    let om = omega.clone();
    Ok(Kernel {
        eval: Arc::new(move |x, y| if om.contains(x) && om.contains(y) { inner(x, y) } else { 0.0 }),
        dim: k.dim,
        symmetric: k.symmetric,
        horizon: k.horizon,
        singular_exponent: k.singular_exponent,
        regional: true,
        label: format!("regional({})", k.label),
        shape: Shape::General,
    })
}

/// Builds a symmetric kernel from `eta`, which must be symmetric on Ω×Ω.
///
/// The result agrees with `eta(y, x)` whenever the second argument `x` lies in
/// Ω, takes the mirrored value `eta(x, y)` when only the first argument lies in
/// Ω, and vanishes when neither does. Symmetry of `eta` on Ω×Ω is checked on
/// the given sample points.
pub fn symmetrize_outside(eta: &Kernel, omega: &Domain, samples: &[Point], tol: f64) -> Result<Kernel> {
    if omega.dim() != eta.dim {
        return Err(Error::DimensionMismatch { expected: eta.dim, got: omega.dim() });
    }
    let inside: Vec<Point> = samples.iter().copied().filter(|p| omega.contains(*p)).collect();
    for &x in &inside {
        for &y in &inside {
            if x == y {
                continue;
            }
            let a = eta.eval(x, y);
            let b = eta.eval(y, x);
            if (a - b).abs() > tol * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::Consistency(format!(
                    "kernel is not symmetric on Ω×Ω: {a} vs {b} at ({x:?}, {y:?})"
                )));
            }
        }
    }
    let inner = eta.eval.clone();
    let om = omega.clone();
    Ok(Kernel {
        eval: Arc::new(move |y, x| {
            if om.contains(x) {
                inner(y, x)
            } else if om.contains(y) {
                inner(x, y)
            } else {
                0.0
            }
        }),
        dim: eta.dim,
        symmetric: true,
        horizon: eta.horizon,
        singular_exponent: eta.singular_exponent,
        regional: eta.regional,
        label: format!("symmetrized({})", eta.label),
        shape: Shape::General,
    })
}

/// `γ̃(y, x) = max{γ(y, x), (γ(x, y) − γ(y, x))² / k(y, x)}`.
///
/// `k` must be positive; it is checked on the sample pairs.
pub fn tilde_gamma(gamma: &Kernel, k: &Kernel, samples: &[Point]) -> Result<Kernel> {
    if gamma.dim != k.dim {
        return Err(Error::DimensionMismatch { expected: gamma.dim, got: k.dim });
    }
    for &x in samples {
        for &y in samples {
            if x != y && !(k.eval(y, x) > 0.0) {
                return Err(Error::Division(format!("auxiliary kernel vanishes at ({y:?}, {x:?})")));
            }
        }
    }
    let g = gamma.eval.clone();
    let kk = k.eval.clone();
    let horizon = match (gamma.horizon, k.horizon) {
        (Some(a), _) => Some(a),
        _ => None,
    };
    Ok(Kernel {
        eval: Arc::new(move |y, x| {
            let a = g(y, x);
            let b = g(x, y);
            let diff = b - a;
            if diff == 0.0 {
                a
            } else {
                a.max(diff * diff / kk(y, x))
            }
        }),
        dim: gamma.dim,
        symmetric: gamma.symmetric,
        horizon,
        singular_exponent: gamma.singular_exponent,
        regional: gamma.regional,
        label: format!("tilde({}, {})", gamma.label, k.label),
        shape: if gamma.symmetric { gamma.shape.clone() } else { Shape::General },
    })
}
