//! INI-style run configuration and the expression language for data fields.

use std::fmt;
use std::path::{Path, PathBuf};

use fasteval::{Compiler, Evaler};
use ini::Ini;
use nnl_core::kernel::{regional, Point};
use nnl_core::{Aabb, Domain, Kernel};

/// Configuration problem with the location that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(location: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { location: location.into(), message: message.into() }
}

/// Scalar field `f(x, y)` built from `+ - * / ^`, `abs`, `sin`, `cos`, `exp`
/// and `step`.
pub struct Expr {
    source: String,
    slab: fasteval::Slab,
    compiled: fasteval::Instruction,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

fn lookup(p: Point, name: &str, args: &[f64]) -> Option<f64> {
    match (name, args) {
        ("x", []) => Some(p[0]),
        ("y", []) => Some(p[1]),
        ("exp", [a]) => Some(a.exp()),
        ("step", [a]) => Some(if *a >= 0.0 { 1.0 } else { 0.0 }),
        _ => None,
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, String> {
        let parser = fasteval::Parser::new();
        let mut slab = fasteval::Slab::new();
        let compiled = parser
            .parse(source, &mut slab.ps)
            .map_err(|e| format!("cannot parse {source:?}: {e:?}"))?
            .from(&slab.ps)
            .compile(&slab.ps, &mut slab.cs);
        let expr = Expr { source: source.to_string(), slab, compiled };
        expr.try_eval([0.25, 0.25])?;
        Ok(expr)
    }

    fn try_eval(&self, p: Point) -> Result<f64, String> {
        let mut ns = |name: &str, args: Vec<f64>| lookup(p, name, &args);
        self.compiled
            .eval(&self.slab, &mut ns)
            .map_err(|e| format!("cannot evaluate {:?}: {e:?}", self.source))
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.try_eval(p).unwrap_or(f64::NAN)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Neumann,
    NeumannNonhom,
    Regularized,
    Nonsymmetric,
    DirichletV0,
    Robin,
}

impl ProblemKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "neumann" => ProblemKind::Neumann,
            "neumann-nonhom" => ProblemKind::NeumannNonhom,
            "regularized" => ProblemKind::Regularized,
            "nonsymmetric" => ProblemKind::Nonsymmetric,
            "dirichlet-v0" => ProblemKind::DirichletV0,
            "robin" => ProblemKind::Robin,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Neumann => "neumann",
            ProblemKind::NeumannNonhom => "neumann-nonhom",
            ProblemKind::Regularized => "regularized",
            ProblemKind::Nonsymmetric => "nonsymmetric",
            ProblemKind::DirichletV0 => "dirichlet-v0",
            ProblemKind::Robin => "robin",
        }
    }
}

#[derive(Debug)]
pub struct Analyses {
    pub identities: bool,
    pub coercivity: bool,
    pub poincare: bool,
    pub friedrichs: bool,
    pub trace: bool,
    pub trace_c: f64,
    pub poincare_eps: f64,
}

#[derive(Debug)]
pub struct Config {
    pub domain: Domain,
    pub kernel: Kernel,
    pub h: f64,
    pub radius: f64,
    pub eps_gamma: Option<f64>,
    pub problem: ProblemKind,
    pub f: Expr,
    pub g: Expr,
    pub alpha: Expr,
    pub kappa: Expr,
    pub c_threshold: f64,
    pub tol: f64,
    pub dense_limit: usize,
    pub analyses: Analyses,
    pub output: PathBuf,
    pub dump_operators: bool,
    pub seed: u64,
    pub threads: Option<usize>,
}

struct Reader<'a> {
    ini: &'a Ini,
}

impl<'a> Reader<'a> {
    fn raw(&self, section: &str, key: &str) -> Option<&'a str> {
        self.ini.get_from(Some(section), key).map(str::trim)
    }

    fn required(&self, section: &str, key: &str) -> Result<&'a str, ConfigError> {
        self.raw(section, key).ok_or_else(|| err(format!("[{section}] {key}"), "missing required field"))
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str, default: Option<T>) -> Result<T, ConfigError> {
        match self.raw(section, key) {
            Some(s) => s.parse().map_err(|_| err(format!("[{section}] {key}"), format!("cannot parse value {s:?}"))),
            None => default.ok_or_else(|| err(format!("[{section}] {key}"), "missing required field")),
        }
    }

    fn opt<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError> {
        self.raw(section, key)
            .map(|s| s.parse().map_err(|_| err(format!("[{section}] {key}"), format!("cannot parse value {s:?}"))))
            .transpose()
    }

    fn expr(&self, section: &str, key: &str, default: &str) -> Result<Expr, ConfigError> {
        let s = self.raw(section, key).unwrap_or(default);
        Expr::parse(s).map_err(|m| err(format!("[{section}] {key}"), m))
    }
}

fn numbers(s: &str, location: &str) -> Result<Vec<f64>, ConfigError> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| err(location, format!("cannot parse number {t:?}"))))
        .collect()
}

fn parse_domain(r: &Reader) -> Result<Domain, ConfigError> {
    let dim: usize = r.parse("domain", "dim", Some(1))?;
    let boxes = r.required("domain", "boxes")?;
    let loc = "[domain] boxes";
    let mut out = Vec::new();
    for part in boxes.split(';').filter(|p| !p.trim().is_empty()) {
        let v = numbers(part, loc)?;
        let b = match (dim, v.as_slice()) {
            (1, [a, b]) => Aabb { lo: [*a, 0.0], hi: [*b, 0.0] },
            (2, [x0, y0, x1, y1]) => Aabb { lo: [*x0, *y0], hi: [*x1, *y1] },
            _ => return Err(err(loc, format!("box {part:?} does not match dimension {dim}"))),
        };
        out.push(b);
    }
    Domain::new(dim, out).map_err(|e| err(loc, e.to_string()))
}

fn parse_kernel(r: &Reader, dim: usize, base: &Path) -> Result<Kernel, ConfigError> {
    let kind = r.parse::<String>("kernel", "type", Some("truncated".into()))?;
    let loc = "[kernel]";
    match kind.as_str() {
        "truncated" => {
            let delta = r.parse("kernel", "delta", None)?;
            let amp = r.parse("kernel", "amplitude", Some(1.0))?;
            Kernel::truncated(dim, delta, amp).map_err(|e| err(loc, e.to_string()))
        }
        "fractional" => {
            let s = r.parse("kernel", "s", None)?;
            let amp = r.parse("kernel", "amplitude", Some(1.0))?;
            Kernel::fractional(dim, s, amp).map_err(|e| err(loc, e.to_string()))
        }
        "custom-table" => {
            let file: String = r.parse("kernel", "table", None)?;
            let cell: f64 = r.parse("kernel", "table_h", None)?;
            let lo = numbers(r.required("kernel", "table_origin")?, "[kernel] table_origin")?;
            let shape: Vec<usize> = r
                .required("kernel", "table_shape")?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| err("[kernel] table_shape", format!("cannot parse {t:?}"))))
                .collect::<Result<_, _>>()?;
            let horizon: Option<f64> = r.opt("kernel", "horizon")?;
            if lo.len() != dim || shape.len() != dim {
                return Err(err("[kernel] table_origin", "origin and shape must have one entry per dimension"));
            }
            let path = base.join(&file);
            table_kernel(&path, dim, cell, &lo, &shape, horizon)
        }
        other => Err(err("[kernel] type", format!("unknown kernel type {other:?}"))),
    }
}

/// Piecewise-constant kernel from a dense CSV matrix over a lattice of cells.
fn table_kernel(path: &Path, dim: usize, cell: f64, lo: &[f64], shape: &[usize], horizon: Option<f64>) -> Result<Kernel, ConfigError> {
    let loc = format!("[kernel] table {}", path.display());
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(&loc, e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(&loc, e.to_string()))?;
        let row = rec
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("{loc} line {}", line + 1), format!("cannot parse {t:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let n: usize = shape.iter().product();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(err(&loc, format!("expected a {n}x{n} table")));
    }
    if rows.iter().flatten().any(|v| !(*v >= 0.0)) {
        return Err(err(&loc, "table entries must be nonnegative"));
    }
    let symmetric = (0..n).all(|i| (0..n).all(|j| rows[i][j] == rows[j][i]));
    let lo = [lo[0], if dim == 2 { lo[1] } else { 0.0 }];
    let shape = [shape[0], if dim == 2 { shape[1] } else { 1 }];
    let index = move |p: Point| -> Option<usize> {
        let mut idx = [0usize; 2];
        for k in 0..dim {
            let t = ((p[k] - lo[k]) / cell).floor();
            if t < 0.0 || t >= shape[k] as f64 {
                return None;
            }
            idx[k] = t as usize;
        }
        Some(idx[0] + shape[0] * idx[1])
    };
    let label = format!("custom-table({})", path.display());
    Kernel::custom(dim, symmetric, horizon, None, label, move |x, y| match (index(x), index(y)) {
        (Some(i), Some(j)) => rows[i][j],
        _ => 0.0,
    })
    .map_err(|e| err(&loc, e.to_string()))
}

fn parse_bool(r: &Reader, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
    match r.raw(section, key) {
        None => Ok(default),
        Some("true" | "yes" | "1" | "on") => Ok(true),
        Some("false" | "no" | "0" | "off") => Ok(false),
        Some(s) => Err(err(format!("[{section}] {key}"), format!("expected a boolean, got {s:?}"))),
    }
}

impl Config {
    pub fn from_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| err(format!("line {}", e.line), e.msg.to_string()))?;
        let r = Reader { ini: &ini };
        let domain = parse_domain(&r)?;
        let mut kernel = parse_kernel(&r, domain.dim(), base)?;
        if parse_bool(&r, "kernel", "regional", false)? {
            kernel = regional(&kernel, &domain).map_err(|e| err("[kernel] regional", e.to_string()))?;
        }
        let h: f64 = r.parse("grid", "h", None)?;
        let radius: f64 = r.parse("grid", "radius", kernel.horizon())?;
        let eps_gamma = r.opt("grid", "eps_gamma")?;
        let kind: String = r.parse("problem", "type", Some("neumann".into()))?;
        let problem = ProblemKind::parse(&kind).ok_or_else(|| err("[problem] type", format!("unknown problem type {kind:?}")))?;
        let output = PathBuf::from(r.parse::<String>("output", "dir", Some("nnl-out".into()))?);
        let output = if output.is_absolute() { output } else { base.join(output) };
        Ok(Config {
            domain,
            kernel,
            h,
            radius,
            eps_gamma,
            problem,
            f: r.expr("problem", "f", "0")?,
            g: r.expr("problem", "g", "0")?,
            alpha: r.expr("problem", "alpha", "1")?,
            kappa: r.expr("problem", "kappa", "1")?,
            c_threshold: r.parse("problem", "c_threshold", Some(1e-12))?,
            tol: r.parse("solver", "tol", Some(1e-10))?,
            dense_limit: r.parse("solver", "dense_limit", Some(3000))?,
            analyses: Analyses {
                identities: parse_bool(&r, "analysis", "identities", true)?,
                coercivity: parse_bool(&r, "analysis", "coercivity", false)?,
                poincare: parse_bool(&r, "analysis", "poincare", true)?,
                friedrichs: parse_bool(&r, "analysis", "friedrichs", true)?,
                trace: parse_bool(&r, "analysis", "trace", true)?,
                trace_c: r.parse("analysis", "trace_c", Some(1.0))?,
                poincare_eps: r.parse("analysis", "poincare_eps", Some(0.25))?,
            },
            output,
            dump_operators: parse_bool(&r, "output", "dump_operators", false)?,
            seed: r.parse("run", "seed", Some(0))?,
            threads: r.opt("run", "threads")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(path.display().to_string(), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Config::from_str(&text, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
[domain]
dim = 1
boxes = 0 1

[kernel]
type = truncated
delta = 0.5

[grid]
h = 0.0625

[problem]
type = neumann
f = x - 0.5
";

    #[test]
    fn parses_basic_config() {
        let c = Config::from_str(BASIC, Path::new("/tmp")).unwrap();
        assert_eq!(c.problem, ProblemKind::Neumann);
        assert_eq!(c.radius, 0.5);
        assert_eq!(c.f.eval([0.75, 0.0]), 0.25);
        assert_eq!(c.g.eval([0.75, 0.0]), 0.0);
    }

    #[test]
    fn expression_language() {
        let e = Expr::parse("2*x^2 + abs(y) - exp(0) + step(x - 1) + sin(0) + cos(0)").unwrap();
        assert_eq!(e.eval([2.0, -3.0]), 8.0 + 3.0 - 1.0 + 1.0 + 0.0 + 1.0);
        assert!(Expr::parse("x +").is_err());
        assert!(Expr::parse("z + 1").is_err());
    }

    #[test]
    fn reports_bad_field() {
        let bad = BASIC.replace("delta = 0.5", "delta = half");
        let e = Config::from_str(&bad, Path::new("/tmp")).unwrap_err();
        assert_eq!(e.location, "[kernel] delta");
        let bad = BASIC.replace("type = neumann", "type = wave");
        assert_eq!(Config::from_str(&bad, Path::new("/tmp")).unwrap_err().location, "[problem] type");
        let bad = BASIC.replace("boxes = 0 1", "boxes = 0 1 2");
        assert_eq!(Config::from_str(&bad, Path::new("/tmp")).unwrap_err().location, "[domain] boxes");
    }

    #[test]
    fn reports_syntax_line() {
        let e = Config::from_str("[domain\ndim = 1\n", Path::new("/tmp")).unwrap_err();
        assert!(e.location.starts_with("line"));
    }
}
