use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use drsplit::engine::{self, SolverState};
use drsplit::io::{self, ResultFile};
use drsplit::oracle::{self, OracleConfig};
use drsplit::{DenseVector, ProductVector, QpProblem, QpSplitting, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(
    name = "drsplit",
    version,
    about = "Douglas-Rachford QP solver with infeasibility certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and print the result JSON.
    Solve {
        file: PathBuf,
        /// Write the result JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve, then check the certificates directly.
    Certify {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Compare engine estimates of v_P and v_D with the projected-gradient oracles.
    OracleCompare {
        /// Canonical instance name (E1..E4) or a problem file.
        instance: String,
        /// Number of iterations run before reading the estimates.
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve and write the iteration trace as CSV.
    Trace {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StartPoint {
    Zero,
    Random(u64),
}

impl FromStr for StartPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "zero" {
            return Ok(StartPoint::Zero);
        }
        s.strip_prefix("random:")
            .and_then(|seed| seed.parse().ok())
            .map(StartPoint::Random)
            .ok_or_else(|| format!("expected `zero` or `random:<seed>`, found `{s}`"))
    }
}

impl StartPoint {
    fn point(self, n: usize, m: usize) -> ProductVector {
        match self {
            StartPoint::Zero => ProductVector::zeros(n, m),
            StartPoint::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut draw = |len| DenseVector::from_fn(len, |_, _| rng.gen_range(-1.0..1.0));
                let z = draw(n);
                ProductVector::new(z, draw(m))
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    eps_solved: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps_inf: f64,
    #[arg(long, default_value_t = 50)]
    window: usize,
    /// Initial governing iterate: `zero` or `random:<seed>`.
    #[arg(long, default_value = "zero")]
    s0: StartPoint,
}

impl SolverArgs {
    fn config(&self, record_trace: bool) -> anyhow::Result<SolverConfig> {
        let config = SolverConfig {
            max_iter: self.max_iter,
            eps_solved: self.eps_solved,
            eps_inf: self.eps_inf,
            window: self.window,
            record_trace,
            ..SolverConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n"))
            .with_context(|| format!("failed to write {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn solve(
    file: &Path,
    solver: &SolverArgs,
    verify: bool,
    trace_out: Option<&Path>,
    out: Option<&Path>,
) -> anyhow::Result<i32> {
    let problem = io::parse_problem(file)?;
    let split = QpSplitting::new(problem)?;
    let config = solver.config(trace_out.is_some())?;
    let result = engine::run(&split, &config, solver.s0.point(split.n(), split.m()));
    log::info!("{} after {} iterations", result.status, result.iterations);
    if let Some(path) = trace_out {
        io::write_trace(result.trace.as_deref().unwrap_or_default(), path)?;
    }
    let report = ResultFile::new(&split, &result, config.eps_inf, verify);
    emit(&report.to_json(), out)?;
    Ok(io::exit_code(result.status))
}

fn load_instance(instance: &str) -> anyhow::Result<QpProblem> {
    let path = Path::new(instance);
    if path.is_file() {
        return Ok(io::parse_problem(path)?);
    }
    Ok(oracle::canonical_instance(instance)?)
}

fn list(v: &ProductVector) -> Vec<f64> {
    v.to_flat()
}

fn oracle_compare(instance: &str, steps: usize, solver: &SolverArgs) -> anyhow::Result<i32> {
    if steps < solver.window {
        bail!(
            "--steps ({steps}) must be at least --window ({})",
            solver.window
        );
    }
    let split = QpSplitting::new(load_instance(instance)?)?;
    let cfg = OracleConfig::default();
    let vp = oracle::oracle_vp(split.problem(), &cfg)?;
    let vd = oracle::oracle_vd(split.problem(), &cfg)?;

    let mut state = SolverState::new(&split, solver.s0.point(split.n(), split.m()), solver.window);
    for _ in 0..steps {
        state.step(&split);
    }
    let est = state.delta_estimates()?;
    let report = json!({
        "instance": instance,
        "steps": steps,
        "oracle": { "vp": list(&vp), "vd": list(&vd) },
        "engine": { "vp": list(&est.v_nu), "vd": list(&est.v_x), "v": list(&est.v) },
        "gaps": {
            "vp": (&vp - &est.v_nu).norm(),
            "vd": (&vd - &est.v_x).norm(),
            "sum": (&(&vp + &vd) - &est.v).norm(),
        },
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve { file, out, solver } => solve(&file, &solver, false, None, out.as_deref()),
        Command::Certify { file, out, solver } => solve(&file, &solver, true, None, out.as_deref()),
        Command::OracleCompare {
            instance,
            steps,
            solver,
        } => oracle_compare(&instance, steps, &solver),
        Command::Trace { file, out, solver } => solve(&file, &solver, false, Some(&out), None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => err.exit(),
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_point_parsing() {
        assert_eq!("zero".parse(), Ok(StartPoint::Zero));
        assert_eq!("random:42".parse(), Ok(StartPoint::Random(42)));
        assert!("random:".parse::<StartPoint>().is_err());
        assert!("ones".parse::<StartPoint>().is_err());
    }

    #[test]
    fn random_start_is_reproducible() {
        let a = StartPoint::Random(5).point(3, 2);
        let b = StartPoint::Random(5).point(3, 2);
        assert_eq!(a, b);
        assert!(a.norm() > 0.0);
        assert_eq!(StartPoint::Zero.point(3, 2).norm(), 0.0);
    }
}
