//! `nnl`: command-line driver for nonlocal Neumann, Robin and Dirichlet
//! problems on uniform grids.

mod config;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

#[derive(Parser)]
#[command(name = "nnl", version, about = "Nonlocal boundary value problems on uniform grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble and solve the problem described by an INI config.
    Solve {
        config: PathBuf,
        /// Write the assembled operators as Matrix Market files.
        #[arg(long)]
        dump_operators: bool,
    },
    /// Estimate Poincaré, Friedrichs, trace and coercivity constants.
    Analyze { config: PathBuf },
    /// Run seeded self-checks on built-in problems.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt one interaction weight before checking.
        #[arg(long)]
        inject_fault: bool,
    },
}

fn init_threads(config_threads: Option<usize>) {
    let from_env = std::env::var("NNL_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = from_env.or(config_threads).filter(|&n| n > 0) {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load(path: &PathBuf) -> Result<Config, ExitCode> {
    Config::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(run::EXIT_PARSE as u8)
    })
}

fn exit(r: anyhow::Result<i32>) -> ExitCode {
    match r {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(run::EXIT_UNSUPPORTED as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { config, dump_operators } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            init_threads(cfg.threads);
            exit(run::solve_command(&cfg, dump_operators || cfg.dump_operators))
        }
        Command::Analyze { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            init_threads(cfg.threads);
            exit(run::analyze_command(&cfg))
        }
        Command::Verify { suite, seed, inject_fault } => {
            init_threads(None);
            let checks = match verify::run(&suite, seed, inject_fault) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(run::EXIT_PARSE as u8);
                }
            };
            for c in &checks {
                println!(
                    "{} {}/{} value={:.3e} threshold={:.3e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.suite,
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            println!("{} checks, {} failed", checks.len(), failed);
            ExitCode::from(if failed == 0 { run::EXIT_OK } else { run::EXIT_CHECK_FAILED } as u8)
        }
    }
}
