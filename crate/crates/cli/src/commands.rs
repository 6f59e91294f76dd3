//! Subcommand implementations. Every command computes its artifacts in
//! memory; nothing touches the output directory until it has succeeded.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path as FsPath;

use horizon_walk_core::convergence::{alpha_trend, semigroup_test, ConvergenceRow, TrendSummary};
use horizon_walk_core::frame::{sphere_octant_holonomy, FramePoint};
use horizon_walk_core::functions::FrameFunction;
use horizon_walk_core::generator::{
    apply_base_generator, apply_rescaled_generator, check_identity, convergence_slope, horizontal_laplacian,
    random_frames, SlopeStatus,
};
use horizon_walk_core::increments::validate_law;
use horizon_walk_core::manifold::{Chart, GeodesicConfig, Manifold, Point};
use horizon_walk_core::walker::{batch_run, WalkConfig, WalkKind};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, FORMAT_VERSION};
use crate::error::CliError;

/// Criterion for the holonomy angle of the octant loop.
pub const HOLONOMY_TOLERANCE: f64 = 1e-4;

/// Smallest fitted slope accepted by `slope`.
pub const MIN_SLOPE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Walk,
    Lift,
    ValidateLaw,
    GeneratorCheck,
    IdentityCheck,
    Slope,
    Converge,
    Holonomy,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Walk => "walk",
            Command::Lift => "lift",
            Command::ValidateLaw => "validate-law",
            Command::GeneratorCheck => "generator-check",
            Command::IdentityCheck => "identity-check",
            Command::Slope => "slope",
            Command::Converge => "converge",
            Command::Holonomy => "holonomy",
        }
    }
}

/// What a command produced: a CSV table, a JSON summary and a verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub csv: String,
    pub summary: Value,
    pub domain_exits: usize,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize to JSON")
}

fn start_point(cfg: &RunConfig, m: &Manifold) -> Point<2> {
    cfg.walk.initial.map(|[x, y]| Point::xy(x, y)).unwrap_or_else(|| m.reference_point())
}

/// Where pointwise generator checks are evaluated.
fn probe_point(cfg: &RunConfig, m: &Manifold) -> Point<2> {
    cfg.walk.initial.map(|[x, y]| Point::xy(x, y)).unwrap_or_else(|| m.probe_point())
}

fn geodesic_config(cfg: &RunConfig, alpha: f64) -> GeodesicConfig {
    let default = GeodesicConfig::for_alpha(alpha);
    GeodesicConfig::new(cfg.walk.integrator_step.unwrap_or(default.step), cfg.walk.max_arclength)
}

pub fn walk_config(cfg: &RunConfig, m: &Manifold) -> Result<WalkConfig<2>, CliError> {
    let w = &cfg.walk;
    let initial = start_point(cfg, m);
    let mut wc = WalkConfig::new(w.alpha, w.t, initial);
    wc.law = w.law;
    wc.time_mode = w.time_mode;
    wc.master_seed = cfg.seed;
    wc.replica_count = w.replicas;
    wc.geodesic = geodesic_config(cfg, w.alpha);
    if w.frame_angle != 0.0 {
        wc.initial_frame = Some(FramePoint::rotated(m, initial, w.frame_angle, false)?.frame);
    }
    wc.validate()?;
    Ok(wc)
}

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = cfg.manifold();
    match cmd {
        Command::Walk | Command::Lift => walk(cmd, cfg, &m),
        Command::ValidateLaw => validate(cfg, &m),
        Command::GeneratorCheck => generator_check(cfg, &m),
        Command::IdentityCheck => identity(cfg, &m),
        Command::Slope => slope(cfg, &m),
        Command::Converge => converge(cfg, &m),
        Command::Holonomy => holonomy(cfg, &m),
    }
}

fn walk(cmd: Command, cfg: &RunConfig, m: &Manifold) -> Result<Outcome, CliError> {
    let kind = if cmd == Command::Lift { WalkKind::Lifted } else { WalkKind::Base };
    let data = batch_run(m, &walk_config(cfg, m)?, kind)?;
    Ok(Outcome {
        pass: true,
        csv: data.to_csv(),
        summary: json!({ "completed_replicas": data.paths.len(), "failures": to_value(&data.failures) }),
        domain_exits: data.domain_exit_count(),
    })
}

/// The reference point followed by random points of the experiment region.
fn probe_points(cfg: &RunConfig, m: &Manifold, count: usize) -> Result<Vec<Point<2>>, CliError> {
    let mut points = vec![start_point(cfg, m)];
    if count > 1 {
        let extra = random_frames(m, m.experiment_region(), count - 1, 1, cfg.seed)?;
        points.extend(extra.into_iter().map(|u| u.base));
    }
    Ok(points)
}

fn validate(cfg: &RunConfig, m: &Manifold) -> Result<Outcome, CliError> {
    let g = &cfg.generator;
    let points = probe_points(cfg, m, g.law_points)?;
    let report = validate_law(m, cfg.walk.law, &points, g.law_samples, cfg.seed)?;
    let mut csv = String::from(
        "x1,x2,mean1,mean2,cov11,cov12,cov21,cov22,expected11,expected12,expected21,expected22,third,expected_third,pass\n",
    );
    for p in &report.points {
        let cells: Vec<String> = p
            .point
            .iter()
            .chain(&p.empirical_mean)
            .chain(&p.empirical_covariance)
            .chain(&p.expected_covariance)
            .chain([&p.empirical_third_abs_moment, &p.expected_third_abs_moment])
            .map(|x| format!("{x:?}"))
            .collect();
        writeln!(csv, "{},{}", cells.join(","), p.pass()).unwrap();
    }
    Ok(Outcome { pass: report.pass, csv, summary: to_value(&report), domain_exits: 0 })
}

fn generator_check(cfg: &RunConfig, m: &Manifold) -> Result<Outcome, CliError> {
    let g = &cfg.generator;
    let p = probe_point(cfg, m);
    let u = FramePoint::coordinate(m, p)?;
    let mut csv = String::from("function,alpha,lifted,base,stderr,half_horizontal_laplacian,error,compatible\n");
    let mut pass = true;
    let mut excluded = 0;
    for f in cfg.generator_functions() {
        let lifted_f = FrameFunction::Base(f);
        let half = 0.5 * horizontal_laplacian(m, &lifted_f, &u, g.fd_step, true)?;
        for &alpha in &g.alphas {
            let a = apply_rescaled_generator(m, &lifted_f, &u, alpha, g.law, g.samples, cfg.seed)?;
            let b = apply_base_generator(m, f, &p, alpha, g.law, g.samples, cfg.seed)?;
            excluded += a.excluded + b.excluded;
            // both sides draw the same increments, so only integration error separates them
            let compatible =
                (a.value - b.value).abs() <= 1e-6 * a.value.abs().max(1.0) + 4.0 * a.stderr.hypot(b.stderr);
            pass &= compatible;
            writeln!(
                csv,
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                f.name(),
                alpha,
                a.value,
                b.value,
                a.stderr,
                half,
                (a.value - half).abs(),
                compatible
            )
            .unwrap();
        }
    }
    Ok(Outcome {
        pass,
        csv,
        summary: json!({ "law": g.law, "base": p.coords.as_slice(), "excluded_samples": excluded }),
        domain_exits: excluded,
    })
}

fn identity(cfg: &RunConfig, m: &Manifold) -> Result<Outcome, CliError> {
    let g = &cfg.generator;
    let frames = random_frames(m, m.experiment_region(), g.bases, g.frames_per_base, cfg.seed)?;
    let mut csv = String::from("function,x1,x2,f11,f12,f21,f22,horizontal_laplacian,laplace_beltrami,analytic,error\n");
    let mut summaries = Vec::new();
    let mut pass = true;
    for f in cfg.generator_functions() {
        let r = check_identity(m, f, &frames, g.tolerance, g.fd_step)?;
        for e in &r.entries {
            let cells: Vec<String> = e
                .base
                .iter()
                .chain(&e.frame)
                .chain([&e.horizontal_laplacian, &e.laplace_beltrami, &e.analytic_laplacian, &e.error])
                .map(|x| format!("{x:?}"))
                .collect();
            writeln!(csv, "{},{}", f.name(), cells.join(",")).unwrap();
        }
        pass &= r.pass;
        summaries.push(json!({
            "function": r.function,
            "worst_error": r.worst_error,
            "worst_frame_spread": r.worst_frame_spread,
            "pass": r.pass,
        }));
    }
    Ok(Outcome { pass, csv, summary: json!({ "tolerance": g.tolerance, "functions": summaries }), domain_exits: 0 })
}

fn slope(cfg: &RunConfig, m: &Manifold) -> Result<Outcome, CliError> {
    let g = &cfg.generator;
    let p = probe_point(cfg, m);
    let u = FramePoint::rotated(m, p, cfg.walk.frame_angle, false)?;
    let mut csv = String::from("function,alpha,generator,stderr,error\n");
    let mut reports = Vec::new();
    let mut pass = true;
    for f in cfg.generator_functions() {
        let r = convergence_slope(m, &FrameFunction::Base(f), &u, &g.alphas, g.law, g.samples, cfg.seed)?;
        for row in &r.rows {
            writeln!(csv, "{},{:?},{:?},{:?},{:?}", f.name(), row.alpha, row.generator, row.stderr, row.error).unwrap();
        }
        let ok = r.nonincreasing
            && match &r.slope {
                SlopeStatus::AlreadyConverged => true,
                SlopeStatus::Fitted { fit } => fit.slope >= MIN_SLOPE,
                SlopeStatus::Degenerate { .. } => false,
            };
        pass &= ok;
        let mut v = to_value(&r);
        v["pass"] = json!(ok);
        reports.push(v);
    }
    Ok(Outcome { pass, csv, summary: json!({ "min_slope": MIN_SLOPE, "functions": reports }), domain_exits: 0 })
}

fn converge(cfg: &RunConfig, m: &Manifold) -> Result<Outcome, CliError> {
    let c = &cfg.convergence;
    let horizon = c.t_grid.iter().copied().fold(0.0, f64::max);
    let base = WalkConfig { horizon_t: horizon, ..walk_config(cfg, m)? };
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    let mut trends: Vec<Value> = Vec::new();
    let mut pass = true;
    for f in cfg.convergence_functions() {
        if c.alphas.len() >= 3 {
            for &t in &c.t_grid {
                let r = alpha_trend(m, &base, f, t, &c.alphas)?;
                let trend: TrendSummary = r.trend.clone().expect("alpha trends carry a summary");
                pass &= trend.pass;
                trends.push(json!({ "function": f.name(), "t": t, "trend": to_value(&trend) }));
                rows.extend(r.rows);
            }
        } else {
            for &alpha in &c.alphas {
                let local = WalkConfig { alpha, geodesic: geodesic_config(cfg, alpha), ..base };
                let r = semigroup_test(m, &local, f, &c.t_grid)?;
                pass &= r.pass;
                rows.extend(r.rows);
            }
        }
    }
    let excluded = rows.iter().map(|r| r.excluded).sum();
    let report =
        horizon_walk_core::convergence::ConvergenceReport { manifold: m.name().into(), rows, trend: None, pass };
    Ok(Outcome {
        pass,
        csv: report.to_csv(),
        summary: json!({ "rows": to_value(&report.rows), "trends": trends }),
        domain_exits: excluded,
    })
}

fn holonomy(cfg: &RunConfig, m: &Manifold) -> Result<Outcome, CliError> {
    if !matches!(m, Manifold::Sphere(_)) {
        return Err(CliError::Validation {
            key: "manifold".into(),
            message: format!("holonomy is only defined for the sphere, not {}", m.name()),
        });
    }
    let geo = GeodesicConfig::new(cfg.walk.integrator_step.unwrap_or(1e-3), cfg.walk.max_arclength);
    let r = sphere_octant_holonomy(m, &geo)?;
    let pass = (r.angle - FRAC_PI_2).abs() < HOLONOMY_TOLERANCE;
    Ok(Outcome {
        pass,
        csv: format!(
            "angle,expected,closure_error,max_drift\n{:?},{:?},{:?},{:?}\n",
            r.angle, FRAC_PI_2, r.closure_error, r.max_drift
        ),
        summary: json!({ "angle": r.angle, "expected": FRAC_PI_2, "tolerance": HOLONOMY_TOLERANCE, "closure_error": r.closure_error }),
        domain_exits: 0,
    })
}

/// The JSON sidecar: effective configuration, seed, verdict and summary.
/// The output directory is left out so that runs into different
/// directories compare equal.
pub fn sidecar(cmd: Command, cfg: &RunConfig, outcome: &Outcome) -> String {
    let mut config = to_value(cfg);
    if let Some(obj) = config.as_object_mut() {
        obj.remove("out");
    }
    let doc = json!({
        "version": FORMAT_VERSION,
        "command": cmd.name(),
        "seed": cfg.seed,
        "config": config,
        "domain_exit_count": outcome.domain_exits,
        "pass": outcome.pass,
        "summary": outcome.summary,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("sidecar serializes");
    text.push('\n');
    text
}

/// Writes `<command>.csv` and `<command>.json` into `dir`, each through a
/// temporary file renamed into place.
pub fn write_outputs(dir: &FsPath, cmd: Command, cfg: &RunConfig, outcome: &Outcome) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (format!("{}.csv", cmd.name()), outcome.csv.clone()),
        (format!("{}.json", cmd.name()), sidecar(cmd, cfg, outcome)),
    ];
    let mut staged = Vec::new();
    for (name, contents) in &files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = std::fs::write(&tmp, contents) {
            for t in &staged {
                let _ = std::fs::remove_file(t);
            }
            let _ = std::fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push(tmp);
    }
    for (tmp, (name, _)) in staged.iter().zip(&files) {
        std::fs::rename(tmp, dir.join(name))?;
    }
    Ok(())
}
