//! `solve` and `analyze` subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use nnl_core::analysis::{self, EigenOptions};
use nnl_core::solve::{self, SolveResult};
use nnl_core::{build_grid, Discretization, Error, SolveStatus, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::{Config, ProblemKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INCOMPATIBLE: i32 = 2;
pub const EXIT_UNSUPPORTED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// JSON number, or a string for non-finite values.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn entry(name: &str, value: f64, bound: Option<f64>, provenance: &str, status: &str) -> Value {
    json!({
        "name": name,
        "value": num(value),
        "bound": bound.map(num).unwrap_or(Value::Null),
        "bound_provenance": provenance,
        "status": status,
    })
}

fn bounded(name: &str, value: f64, bound: f64, provenance: &str) -> Value {
    let status = if value <= bound { "pass" } else { "fail" };
    entry(name, value, Some(bound), provenance, status)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Exit code for errors raised while building the discretization.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::UnsupportedKernel(_) | Error::SingularQuadrature(_) => EXIT_UNSUPPORTED,
        _ => EXIT_PARSE,
    }
}

pub fn status_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::Incompatible => EXIT_INCOMPATIBLE,
        SolveStatus::Singular | SolveStatus::Unsupported | SolveStatus::NotConverged => EXIT_UNSUPPORTED,
    }
}

pub fn discretize(cfg: &Config) -> std::result::Result<Discretization, Error> {
    let grid = build_grid(&cfg.domain, &cfg.kernel, cfg.h, cfg.radius, cfg.eps_gamma)?;
    Discretization::new(grid, cfg.kernel.clone())
}

fn grid_summary(disc: &Discretization) -> Value {
    let g = disc.grid();
    json!({
        "dim": g.dim(),
        "h": g.h(),
        "radius": g.radius(),
        "eps_gamma": g.eps_gamma(),
        "n_omega": g.n_omega(),
        "n_gamma": g.n_gamma(),
        "n_gamma_hat_only": g.n_gamma_hat_only(),
        "n_exterior": g.n_exterior(),
        "omega_measure": g.omega_measure(),
        "tail_mass": g.tail_mass().map(num).unwrap_or(Value::Null),
        "pair_weights": disc.table().nnz(),
    })
}

fn write_solution(path: &Path, disc: &Discretization, u: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let g = disc.grid();
    if g.dim() == 1 {
        w.write_record(["cell", "cx", "tag", "value"])?;
    } else {
        w.write_record(["cell", "cx", "cy", "tag", "value"])?;
    }
    for i in 0..disc.n() {
        let c = g.center(i);
        let mut rec = vec![i.to_string(), format!("{:.17e}", c[0])];
        if g.dim() == 2 {
            rec.push(format!("{:.17e}", c[1]));
        }
        rec.push(g.tag(i).as_str().to_string());
        rec.push(format!("{:.17e}", u[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn dump_operator(dir: &Path, name: &str, op: &nnl_core::SparseOperator) -> Result<()> {
    let path = dir.join(format!("{name}.mtx"));
    let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    op.write_matrix_market(&mut w)?;
    w.flush()?;
    Ok(())
}

fn identity_residuals(disc: &Discretization, u: &[f64], seed: u64) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..disc.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let div = analysis::divergence_residual(disc, u)?;
    let green = analysis::verify_green_identity(disc, u, &v)?;
    let mut list = vec![
        bounded("divergence", div.abs() / scale, 1e-12, "relative to max |u|"),
        bounded("green_full", green.full / green.scale, 1e-10, "relative to the summed term magnitude"),
    ];
    if let Some(s) = green.special {
        list.push(bounded("green_special", s / green.scale, 1e-12, "relative to the summed term magnitude"));
    }
    Ok(Value::Array(list))
}

fn solve_problem(cfg: &Config, disc: &Discretization, opts: &SolverOptions, extra: &mut Map<String, Value>) -> Result<SolveResult> {
    let f = disc.sample(|p| cfg.f.eval(p));
    let g = disc.sample(|p| cfg.g.eval(p));
    let r = match cfg.problem {
        ProblemKind::Neumann => solve::solve_neumann(disc, &f, &g, opts)?,
        ProblemKind::NeumannNonhom => {
            let direct = solve::solve_neumann(disc, &f, &g, opts)?;
            let hom = solve::transform_nonhom_to_hom(disc, &f, &g)?;
            let zero = vec![0.0; disc.n()];
            let lifted = solve::solve_neumann(disc, &hom.f_new, &zero, opts)?;
            let mut u: Vec<f64> = lifted.u.iter().zip(&hom.g_tilde).map(|(a, b)| a + b).collect();
            solve::mean_center(disc, &mut u);
            let diff = u.iter().zip(&direct.u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = direct.u.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
            extra.insert(
                "homogeneous_agreement".into(),
                bounded("homogeneous_agreement", diff / scale, 1e-8, "lifted homogeneous solve vs direct solve"),
            );
            direct
        }
        ProblemKind::Regularized => {
            let kappa = disc.sample(|p| cfg.kappa.eval(p));
            solve::solve_regularized(disc, &f, &kappa, opts)?
        }
        ProblemKind::Nonsymmetric => {
            let alpha = disc.sample(|p| cfg.alpha.eval(p));
            let c = analysis::coercivity_margin(disc, &alpha)?;
            extra.insert(
                "coercivity".into(),
                json!({
                    "min_margin": num(c.min_margin),
                    "ratio_bound": num(c.ratio_bound),
                    "unbounded_pairs": c.unbounded_pairs,
                }),
            );
            solve::solve_nonsymmetric(disc, &f, &alpha, opts)?
        }
        ProblemKind::DirichletV0 => solve::solve_dirichlet(disc, &f, None, opts)?,
        ProblemKind::Robin => {
            let alpha = disc.sample(|p| cfg.alpha.eval(p));
            let robin = solve::robin_transform(disc, &alpha, &g, cfg.c_threshold)?;
            let r = solve::solve_robin(disc, &robin, &f, opts)?;
            if r.status == SolveStatus::Converged || r.status == SolveStatus::Incompatible {
                let res = analysis::verify_robin_identity(disc, &robin, &r.u[..disc.n_omega()])?;
                extra.insert(
                    "robin_identity".into(),
                    json!([
                        bounded("interior", res.interior, 1e-8, "full operator vs regional operator"),
                        bounded("boundary", res.boundary, 1e-8, "exterior condition residual"),
                    ]),
                );
            }
            r
        }
    };
    Ok(r)
}

/// Runs `nnl solve`; returns the process exit code.
pub fn solve_command(cfg: &Config, dump: bool) -> Result<i32> {
    let disc = match discretize(cfg) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(error_code(&e));
        }
    };
    let opts = SolverOptions { tol: cfg.tol, dense_limit: cfg.dense_limit, ..SolverOptions::default() };
    let mut extra = Map::new();
    let r = match solve_problem(cfg, &disc, &opts, &mut extra) {
        Ok(r) => r,
        Err(e) => {
            let code = e.downcast_ref::<Error>().map(error_code).unwrap_or(EXIT_PARSE);
            eprintln!("error: {e}");
            return Ok(code);
        }
    };
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    write_solution(&cfg.output.join("solution.csv"), &disc, &r.u)?;
    let mut report = Map::new();
    report.insert("problem".into(), json!(cfg.problem.as_str()));
    report.insert("kernel".into(), json!(disc.kernel().label()));
    report.insert("grid".into(), grid_summary(&disc));
    report.insert("status".into(), json!(r.status.as_str()));
    report.insert("residual".into(), num(r.residual));
    report.insert("method".into(), json!(r.method.as_str()));
    report.insert("iterations".into(), json!(r.iterations));
    report.insert("compatibility_defect".into(), r.compatibility_defect.map(num).unwrap_or(Value::Null));
    report.insert("multiplier".into(), r.multiplier.map(num).unwrap_or(Value::Null));
    report.insert("message".into(), r.message.clone().map(Value::String).unwrap_or(Value::Null));
    report.insert("f".into(), json!(cfg.f.source()));
    report.insert("g".into(), json!(cfg.g.source()));
    for (k, v) in extra {
        report.insert(k, v);
    }
    write_json(&cfg.output.join("report.json"), &Value::Object(report))?;
    if cfg.analyses.identities && r.status != SolveStatus::Singular && r.status != SolveStatus::Unsupported {
        let ids = identity_residuals(&disc, &r.u, cfg.seed)?;
        write_json(&cfg.output.join("identity_residuals.json"), &ids)?;
    }
    if dump || cfg.dump_operators {
        let dir = cfg.output.join("operators");
        fs::create_dir_all(&dir)?;
        dump_operator(&dir, "pair_weights", disc.table().as_operator())?;
        if disc.kernel().is_symmetric() {
            dump_operator(&dir, "stiffness", &disc.stiffness()?)?;
        }
        let alpha = disc.sample(|p| cfg.alpha.eval(p));
        dump_operator(&dir, "nonsymmetric_form", &disc.nonsym_form(&alpha)?)?;
        dump_operator(&dir, "energy", &disc.energy())?;
    }
    println!(
        "{} on {} cells ({} in Ω): {} (residual {:.3e})",
        cfg.problem.as_str(),
        disc.n(),
        disc.n_omega(),
        r.status.as_str(),
        r.residual
    );
    Ok(status_code(r.status))
}

/// Runs `nnl analyze`; returns the process exit code.
pub fn analyze_command(cfg: &Config) -> Result<i32> {
    let disc = match discretize(cfg) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(error_code(&e));
        }
    };
    let eig = EigenOptions::default();
    let a = &cfg.analyses;
    let mut constants = Vec::new();
    if a.poincare {
        if disc.n_omega() >= 2 {
            let p = analysis::estimate_poincare(&disc, &eig)?;
            let status = match p.within_bound(1e-9) {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "info",
            };
            constants.push(entry("poincare", p.value, p.bound, &p.bound_source, status));
        }
        let ca = analysis::poincare_condition_a(&disc);
        constants.push(entry("poincare_condition_a", ca, None, "", if ca > 0.0 { "pass" } else { "info" }));
        let cb = analysis::poincare_condition_b(&disc, a.poincare_eps);
        constants.push(entry("poincare_condition_b", cb, None, "", if cb > 0.0 { "pass" } else { "info" }));
    }
    if a.friedrichs && disc.kernel().is_symmetric() {
        let f = analysis::estimate_friedrichs(&disc, &eig)?;
        constants.push(entry("friedrichs", f.value, None, "", "info"));
    }
    if a.trace && disc.grid().n_gamma() > 0 {
        let t = analysis::trace_operator_norm(&disc, a.trace_c, &eig)?;
        constants.push(bounded("trace_norm_squared", t.value, t.bound.unwrap(), &t.bound_source));
        let (sx, sy) = analysis::trace_surjectivity(&disc, a.trace_c)?;
        constants.push(entry("trace_surjectivity_x", sx, None, "", "info"));
        constants.push(entry("trace_surjectivity_y", sy, None, "", "info"));
    }
    if a.coercivity {
        let alpha = disc.sample(|p| cfg.alpha.eval(p));
        let c = analysis::coercivity_margin(&disc, &alpha)?;
        let status = if c.min_margin > 0.0 { "pass" } else { "fail" };
        constants.push(entry("coercivity_margin", c.min_margin, None, "", status));
        constants.push(entry("coercivity_ratio_bound", c.ratio_bound, None, "", "info"));
    }
    if let Some(t) = disc.grid().tail_mass() {
        constants.push(entry("tail_mass", t, None, "", "info"));
    }
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    write_json(
        &cfg.output.join("constants.json"),
        &json!({ "kernel": disc.kernel().label(), "grid": grid_summary(&disc), "constants": constants }),
    )?;
    if a.identities {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let u: Vec<f64> = (0..disc.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ids = identity_residuals(&disc, &u, cfg.seed.wrapping_add(1))?;
        write_json(&cfg.output.join("identity_residuals.json"), &ids)?;
    }
    for c in &constants {
        println!("{} = {} [{}]", c["name"].as_str().unwrap(), c["value"], c["status"].as_str().unwrap());
    }
    let failed = constants.iter().any(|c| c["status"] == "fail");
    Ok(if failed { EXIT_CHECK_FAILED } else { EXIT_OK })
}
