//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, TAU};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use horizon_walk_core::convergence::empirical_semigroup;
use horizon_walk_core::frame::{horizontal_lift_path_with, sphere_octant_holonomy, FramePoint, LiftOptions};
use horizon_walk_core::functions::{BaseFunction, FrameFunction};
use horizon_walk_core::generator::{check_identity, convergence_slope, random_frames, SlopeStatus};
use horizon_walk_core::increments::{validate_law, IncrementLaw};
use horizon_walk_core::manifold::{
    christoffel_fd, inner, integrate_geodesic, orthonormality_defect, Chart, GeodesicConfig, Manifold, ManifoldOptions,
    Point, TangentVector, CHRISTOFFEL_FD_STEP,
};
use horizon_walk_core::walker::{run_coupled_base_walk, run_lifted_walk, WalkConfig};
use horizon_walk_core::Error;

const SEED: u64 = 20_261_018;

struct Verdict {
    pass: bool,
    detail: String,
}

fn catalog() -> Vec<Manifold> {
    Manifold::catalog(&ManifoldOptions::default())
}

/// Random points of each manifold's experiment region.
fn points(m: &Manifold, n: usize, seed: u64) -> Vec<Point<2>> {
    random_frames(m, m.experiment_region(), n, 1, seed).unwrap().into_iter().map(|u| u.base).collect()
}

/// Random unit vectors at p (g-unit), from random rotations of the coordinate frame.
fn unit_vector(m: &Manifold, p: Point<2>, angle: f64) -> TangentVector<2> {
    let u = FramePoint::rotated(m, p, angle, false).unwrap();
    u.frame_vector(0)
}

fn christoffel_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    for m in catalog() {
        for p in points(&m, 100, SEED) {
            let analytic = m.analytic_christoffel(&p.coords).expect("catalog charts have analytic symbols");
            let fd = christoffel_fd(&m, &p.coords, CHRISTOFFEL_FD_STEP).unwrap();
            worst = worst.max(analytic.max_abs_diff(&fd));
        }
    }
    Verdict { pass: worst < 1e-6, detail: format!("max |Γ_analytic − Γ_fd| = {worst:.2e} (< 1e-6)") }
}

/// Geodesics whose closest approach to a pole has sin θ below this are
/// excluded from the sphere's accuracy sample.
const POLE_CLEARANCE: f64 = 0.05;

fn closest_pole_approach(m: &Manifold, p: &Point<2>, v: &TangentVector<2>) -> f64 {
    (0..=200)
        .map(|j| m.closed_form_geodesic(&p.coords, &v.components, j as f64 / 200.0).unwrap().0[0].sin())
        .fold(1.0, f64::min)
}

fn geodesic_integrator() -> Verdict {
    let cfg = GeodesicConfig::new(1e-3, 20.0);
    let mut worst_dist: f64 = 0.0;
    let mut worst_speed: f64 = 0.0;
    let mut skipped = 0;
    let mut checked = 0;
    let mut near_pole = 0;
    for m in catalog() {
        let angles = random_frames(&m, [(0.0, 1.0), (0.0, 1.0)], 100, 1, SEED + 1).unwrap();
        for (k, p) in points(&m, 100, SEED + 2).into_iter().enumerate() {
            let r = angles[k].base.coords;
            let v = unit_vector(&m, p, r[0] * TAU).scaled(r[1] * FRAC_PI_2);
            let closed =
                m.closed_form_geodesic(&p.coords, &v.components, 1.0).expect("catalog charts have closed forms");
            // the spherical chart is singular at the poles; geodesics that
            // graze them are outside the configured experiment region
            if matches!(m, Manifold::Sphere(_)) && closest_pole_approach(&m, &p, &v) < POLE_CLEARANCE {
                near_pole += 1;
                continue;
            }
            match integrate_geodesic(&m, &p, &v.components, 1.0, &cfg) {
                Ok((q, _)) => {
                    let d = m.geodesic_distance(&q.coords, &m.domain().normalize(&closed.0)).unwrap();
                    worst_dist = worst_dist.max(d);
                    checked += 1;
                }
                Err(Error::DomainExit { .. }) => skipped += 1,
                Err(e) => panic!("{e}"),
            }
        }
        // speed over arclength 5 along a geodesic that stays in the chart
        let p = m.probe_point();
        let dir = if matches!(m, Manifold::Sphere(_)) { unit_vector(&m, p, 0.3) } else { unit_vector(&m, p, 0.9) };
        let (q, w) = integrate_geodesic(&m, &p, &dir.components, 5.0, &cfg).unwrap();
        let speed = inner(&m, &q.coords, &w.components, &w.components).sqrt();
        worst_speed = worst_speed.max((speed - 1.0).abs());
    }
    Verdict {
        pass: worst_dist < 1e-8 && worst_speed < 1e-8 && skipped == 0,
        detail: format!(
            "max distance error {worst_dist:.2e} (< 1e-8) over {checked} geodesics ({near_pole} sphere geodesics passing within sin θ < {POLE_CLEARANCE} of a pole not sampled, {skipped} left the chart), speed drift {worst_speed:.2e} (< 1e-8)"
        ),
    }
}

fn transport_and_holonomy() -> Verdict {
    let cfg = GeodesicConfig::new(1e-3, 20.0);
    let mut worst: f64 = 0.0;
    for m in catalog() {
        let p = m.probe_point();
        let u = FramePoint::rotated(&m, p, 0.4, false).unwrap();
        // the sphere direction keeps the great circle well away from the poles
        let v = if matches!(m, Manifold::Sphere(_)) { unit_vector(&m, p, 0.3) } else { unit_vector(&m, p, 1.1) };
        let out = horizontal_lift_path_with(&m, &u, &v, 10.0, &cfg, LiftOptions { reproject: false }).unwrap();
        let g = m.metric(&out.end.base.coords);
        worst = worst.max(orthonormality_defect(&g, &out.end.frame));
    }
    let sphere = Manifold::from_name("sphere", &ManifoldOptions::default()).unwrap();
    let h = sphere_octant_holonomy(&sphere, &cfg).unwrap();
    let angle_err = (h.angle - FRAC_PI_2).abs();
    Verdict {
        pass: worst < 1e-7 && angle_err < 1e-4,
        detail: format!(
            "Gram deviation {worst:.2e} (< 1e-7) over arclength 10; octant holonomy {:.8} (π/2 ± 1e-4, error {angle_err:.2e})",
            h.angle
        ),
    }
}

fn operator_identity() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    let mut worst_analytic: f64 = 0.0;
    let mut functions = 0;
    for m in catalog() {
        let frames = random_frames(&m, m.experiment_region(), 20, 5, SEED + 3).unwrap();
        for f in BaseFunction::catalog_for(m.name()) {
            let r = check_identity(&m, f, &frames, 1e-4, 1e-3).unwrap();
            worst = worst.max(r.worst_error);
            worst_spread = worst_spread.max(r.worst_frame_spread);
            for e in &r.entries {
                worst_analytic = worst_analytic.max((e.horizontal_laplacian - e.analytic_laplacian).abs());
            }
            functions += 1;
        }
    }
    Verdict {
        pass: worst < 1e-4 && worst_spread < 1e-4 && worst_analytic < 1e-4,
        detail: format!(
            "{functions} functions × 100 frames: max |Δ_H(f∘π) − Δ_M f| {worst:.2e} (closed-form Δ_M: {worst_analytic:.2e}), frame spread {worst_spread:.2e} (< 1e-4)"
        ),
    }
}

fn generator_convergence() -> Verdict {
    let alphas = [0.2, 0.1, 0.05, 0.025];
    let mut pass = true;
    let mut parts = Vec::new();
    for m in catalog() {
        let u = FramePoint::rotated(&m, m.probe_point(), 0.7, false).unwrap();
        for f in BaseFunction::catalog_for(m.name()) {
            let r =
                convergence_slope(&m, &FrameFunction::Base(f), &u, &alphas, IncrementLaw::Rademacher, 0, SEED).unwrap();
            let ok = r.nonincreasing
                && match (&r.slope, f.is_flat_quadratic()) {
                    (SlopeStatus::AlreadyConverged, true) => true,
                    (SlopeStatus::Fitted { fit }, false) => fit.slope >= 0.9,
                    _ => false,
                };
            pass &= ok;
            let status = match &r.slope {
                SlopeStatus::Fitted { fit } => format!("{:.2}", fit.slope),
                SlopeStatus::AlreadyConverged => "converged".into(),
                SlopeStatus::Degenerate { .. } => "degenerate".into(),
            };
            parts.push(format!("{}={status}", f.name()));
        }
    }
    Verdict { pass, detail: format!("e(α) nonincreasing, slopes ≥ 0.9: {}", parts.join(" ")) }
}

fn projection_consistency() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut failed_pairs = 0;
    let mut mismatched = 0;
    let mut steps = 0;
    for m in catalog() {
        // α = 0.01 keeps 1000 sphere steps about five standard deviations
        // away from the poles
        let alpha = 0.01;
        let mut cfg = WalkConfig::new(alpha, 1000.0 * alpha * alpha, m.reference_point());
        cfg.geodesic = GeodesicConfig::new(2e-3, 20.0);
        cfg.master_seed = SEED;
        steps = cfg.steps_until(cfg.horizon_t);
        let per_replica: Vec<(f64, bool, bool)> = {
            use rayon::prelude::*;
            (0..1000)
                .into_par_iter()
                .map(|r| match run_lifted_walk(&m, &cfg, r) {
                    Ok(lifted) => match run_coupled_base_walk(&m, &cfg, r, &lifted.step_frames) {
                        Ok(base) => {
                            let d = lifted
                                .projection
                                .points
                                .iter()
                                .zip(&base.points)
                                .map(|(a, b)| (a.coords - b.coords).amax())
                                .fold(0.0, f64::max);
                            let same_len = lifted.projection.points.len() == base.points.len();
                            (d, same_len, false)
                        }
                        Err(_) => (f64::INFINITY, false, false),
                    },
                    Err(_) => (0.0, true, true),
                })
                .collect()
        };
        for (d, same_len, failed) in per_replica {
            worst = worst.max(d);
            mismatched += usize::from(!same_len);
            failed_pairs += usize::from(failed);
        }
    }
    Verdict {
        pass: worst <= 1e-12 && mismatched == 0 && failed_pairs == 0,
        detail: format!(
            "4 manifolds × 1000 replicas × {steps} steps: max |π(Z̃) − Z| = {worst:.1e} (≤ 1e-12), {failed_pairs} replicas failed"
        ),
    }
}

/// Largest fraction of replicas that may be dropped for entering the
/// sphere's pole band.
const MAX_EXCLUDED: f64 = 1e-3;

fn weak_convergence() -> Verdict {
    let cases: [(&str, Point<2>, BaseFunction, f64, f64); 3] = [
        ("euclidean", Point::xy(0.0, 0.0), BaseFunction::X1Squared, 1.0, 1.0),
        ("sphere", Point::xy(FRAC_PI_2, 0.0), BaseFunction::CosTheta, 0.5, 0.0),
        ("sphere", Point::xy(FRAC_PI_3, 0.0), BaseFunction::CosTheta, 0.5, 0.5 * (-0.5f64).exp()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, p, f, t, reference) in cases {
        let m = Manifold::from_name(name, &ManifoldOptions::default()).unwrap();
        let mut cfg = WalkConfig::new(0.05, t, p);
        cfg.replica_count = 100_000;
        cfg.master_seed = SEED;
        let est = empirical_semigroup(&m, &cfg, f, t).unwrap();
        let z = est.estimate.z_score(reference);
        pass &= z.abs() < 3.0 && est.excluded as f64 <= MAX_EXCLUDED * cfg.replica_count as f64;
        parts.push(format!(
            "{name} {}: {:.5} ± {:.5} vs {reference:.5} (z = {z:+.2}, {} excluded)",
            f.name(),
            est.estimate.mean,
            est.estimate.stderr,
            est.excluded
        ));
    }
    Verdict { pass, detail: parts.join("; ") }
}

fn moment_validation() -> Verdict {
    let mut pass = true;
    let mut failures = Vec::new();
    for m in catalog() {
        let pts = [m.reference_point(), m.probe_point()];
        for law in [IncrementLaw::Gaussian, IncrementLaw::SphereUniform, IncrementLaw::Rademacher] {
            let r = validate_law(&m, law, &pts, 1_000_000, SEED).unwrap();
            if !r.pass {
                failures.push(format!("{law} on {}", m.name()));
            }
            pass &= r.pass;
        }
    }
    let detail = if failures.is_empty() {
        "3 laws × 4 manifolds × 2 points at n = 10⁶: mean, covariance and third moment within tolerance".to_string()
    } else {
        format!("failed: {}", failures.join(", "))
    };
    Verdict { pass, detail }
}

fn run_cli(args: &[&str], out: &Path, threads: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_horizon-walk"))
        .args(args)
        .args(["--seed", "7", "--threads", threads, "--out"])
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .map(|s| s.code() == Some(0) || s.code() == Some(1))
        .unwrap_or(false)
}

fn determinism() -> Verdict {
    let runs: [(&str, &[&str]); 8] = [
        ("walk", &["walk", "--manifold", "sphere", "--replicas", "50", "--t", "0.5"]),
        (
            "lift",
            &["lift", "--manifold", "hyperbolic", "--replicas", "30", "--t", "0.3", "--mode", "exponential_clock"],
        ),
        ("validate-law", &["validate-law", "--manifold", "torus", "--law", "gaussian", "--samples", "20000"]),
        ("generator-check", &["generator-check", "--manifold", "sphere", "--law", "gaussian", "--samples", "2000"]),
        ("identity-check", &["identity-check", "--manifold", "hyperbolic"]),
        ("slope", &["slope", "--manifold", "torus"]),
        ("converge", &["converge", "--manifold", "sphere", "--replicas", "500", "--alphas", "0.2,0.1,0.05"]),
        ("holonomy", &["holonomy", "--manifold", "sphere"]),
    ];
    let root = std::env::temp_dir().join(format!("horizon-walk-acceptance-{}", std::process::id()));
    let mut differing = Vec::new();
    for (name, args) in runs {
        let a = root.join(format!("{name}-1"));
        let b = root.join(format!("{name}-4"));
        if !run_cli(args, &a, "1") || !run_cli(args, &b, "4") {
            differing.push(format!("{name} (did not run)"));
            continue;
        }
        for ext in ["csv", "json"] {
            let file = format!("{name}.{ext}");
            let same =
                std::fs::read(a.join(&file)).ok().zip(std::fs::read(b.join(&file)).ok()).is_some_and(|(x, y)| x == y);
            if !same {
                differing.push(file);
            }
        }
    }
    let _ = std::fs::remove_dir_all(&root);
    Verdict {
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            "all 8 subcommands byte-identical with 1 and 4 threads".into()
        } else {
            format!("differing outputs: {}", differing.join(", "))
        },
    }
}

/// Name, check and runtime budget.
type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() {
    let criteria: [Criterion; 9] = [
        ("christoffel-oracle", christoffel_oracle, Duration::from_secs(1)),
        ("geodesic-integrator", geodesic_integrator, Duration::from_secs(5)),
        ("transport-holonomy", transport_and_holonomy, Duration::from_secs(5)),
        ("operator-identity", operator_identity, Duration::from_secs(30)),
        ("generator-convergence", generator_convergence, Duration::from_secs(60)),
        ("projection-consistency", projection_consistency, Duration::from_secs(60)),
        ("weak-convergence", weak_convergence, Duration::from_secs(300)),
        ("moment-validation", moment_validation, Duration::from_secs(60)),
        ("determinism", determinism, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (k, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let on_time = elapsed <= *budget;
        let pass = v.pass && on_time;
        failed += usize::from(!pass);
        println!(
            "acceptance {}/9 {name}: {} | {} | {:.2}s (budget {}s{})",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if on_time { "" } else { ", exceeded" }
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 9 criteria passed");
}
