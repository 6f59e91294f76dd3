use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use horizon_walk::config::RunConfig;
use horizon_walk::{dispatch, parse_config, write_outputs, CliError, Command};
use horizon_walk_core::increments::IncrementLaw;
use horizon_walk_core::walker::TimeMode;

/// Geodesic random walks on Riemannian manifolds and their horizontal lifts.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on error.
#[derive(Parser, Debug)]
#[command(name = "horizon-walk", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Affects speed only, never results.
    #[arg(long, global = true, env = "HORIZON_WALK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Simulate the base walk and write every replica's path.
    Walk(Overrides),
    /// Simulate the horizontally lifted walk on the frame bundle.
    Lift(Overrides),
    /// Check mean, covariance and third moment of an increment law.
    ValidateLaw(Overrides),
    /// Compare lifted and base rescaled generators with ½Δ_H.
    GeneratorCheck(Overrides),
    /// Check Δ_H(f∘π) = Δ_M f over random frames.
    IdentityCheck(Overrides),
    /// Fit the convergence rate of the rescaled generator.
    Slope(Overrides),
    /// Compare empirical semigroups with heat-semigroup references.
    Converge(Overrides),
    /// Transport a frame around the spherical octant.
    Holonomy(Overrides),
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    law: Option<IncrementLaw>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Time mode: discrete_rescaled or exponential_clock.
    #[arg(long)]
    mode: Option<TimeMode>,
    /// Comma-separated α values.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Comma-separated test-function names.
    #[arg(long, value_delimiter = ',')]
    functions: Option<Vec<String>>,
    /// Comma-separated evaluation times.
    #[arg(long = "t-grid", value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Sample count for increment-law validation and Monte Carlo generators.
    #[arg(long)]
    samples: Option<usize>,
}

impl Sub {
    fn split(self) -> (Command, Overrides) {
        match self {
            Sub::Walk(o) => (Command::Walk, o),
            Sub::Lift(o) => (Command::Lift, o),
            Sub::ValidateLaw(o) => (Command::ValidateLaw, o),
            Sub::GeneratorCheck(o) => (Command::GeneratorCheck, o),
            Sub::IdentityCheck(o) => (Command::IdentityCheck, o),
            Sub::Slope(o) => (Command::Slope, o),
            Sub::Converge(o) => (Command::Converge, o),
            Sub::Holonomy(o) => (Command::Holonomy, o),
        }
    }
}

fn apply(cfg: &mut RunConfig, cmd: Command, o: Overrides) {
    if let Some(m) = o.manifold {
        cfg.manifold = m;
    }
    if let Some(a) = o.alpha {
        cfg.walk.alpha = a;
    }
    if let Some(t) = o.t {
        cfg.walk.t = t;
    }
    if let Some(law) = o.law {
        match cmd {
            Command::GeneratorCheck | Command::Slope => cfg.generator.law = law,
            _ => cfg.walk.law = law,
        }
    }
    if let Some(r) = o.replicas {
        cfg.walk.replicas = r;
    }
    if let Some(m) = o.mode {
        cfg.walk.time_mode = m;
    }
    if let Some(a) = o.alphas {
        match cmd {
            Command::Converge => cfg.convergence.alphas = a,
            _ => cfg.generator.alphas = a,
        }
    }
    if let Some(f) = o.functions {
        match cmd {
            Command::Converge => cfg.convergence.functions = f,
            _ => cfg.generator.functions = f,
        }
    }
    if let Some(t) = o.t_grid {
        cfg.convergence.t_grid = t;
    }
    if let Some(n) = o.samples {
        match cmd {
            Command::ValidateLaw => cfg.generator.law_samples = n,
            _ => cfg.generator.samples = n,
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    let (cmd, overrides) = cli.command.split();
    apply(&mut cfg, cmd, overrides);
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation { key: "threads".into(), message: e.to_string() })?;
    }
    let outcome = dispatch(cmd, &cfg)?;
    write_outputs(std::path::Path::new(&cfg.out), cmd, &cfg, &outcome)?;
    println!("{}: {}", cmd.name(), if outcome.pass { "pass" } else { "FAIL" });
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
