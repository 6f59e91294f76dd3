//! Numerical generators: the rescaled generator L_α of the lifted walk,
//! the Laplace–Beltrami operator Δ_M and the horizontal Laplacian
//! Δ_H = Σ H_i², plus the checks that tie them together.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{horizontal_lift_path, FramePoint};
use crate::functions::{BaseFunction, FrameFunction};
use crate::increments::IncrementLaw;
use crate::manifold::{
    check_domain, coordinate_frame_at, exp_map, inverse_metric, Chart, Coords, GeodesicConfig, Mat, Point,
    TangentVector,
};
use crate::rng;
use crate::stats::{fit_loglog, LogLogFit, MeanEstimate};

/// Default second-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

/// Smallest sample count for Monte Carlo generator estimates.
pub const MIN_GENERATOR_SAMPLES: usize = 1000;

/// Errors below this are treated as zero when fitting convergence slopes.
pub const ERROR_FLOOR: f64 = 1e-8;

/// Fraction of excluded samples above which a generator value is flagged.
pub const EXCLUSION_WARNING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorValue {
    pub value: f64,
    /// Zero for laws whose expectation is an exact finite sum.
    pub stderr: f64,
    pub samples: usize,
    pub excluded: usize,
    pub warning: bool,
}

fn evaluate_law<F>(law: IncrementLaw, alpha: f64, n: usize, seed: u64, mut displacement: F) -> Result<GeneratorValue>
where
    F: FnMut(&Coords<2>) -> Result<f64>,
{
    let a2 = alpha * alpha;
    if let Some(atoms) = law.atoms::<2>() {
        let mut acc = 0.0;
        for (w, xi) in &atoms {
            acc += w * displacement(xi)?;
        }
        return Ok(GeneratorValue { value: acc / a2, stderr: 0.0, samples: atoms.len(), excluded: 0, warning: false });
    }
    if n < MIN_GENERATOR_SAMPLES {
        return Err(Error::InsufficientSamples { got: n, min: MIN_GENERATOR_SAMPLES });
    }
    let mut rng = rng::stream(seed, 0);
    let mut diffs = Vec::with_capacity(n);
    let mut excluded = 0;
    for _ in 0..n {
        let xi = law.sample::<_, 2>(&mut rng);
        match displacement(&xi) {
            Ok(d) => diffs.push(d),
            Err(e) if e.is_replica_failure() => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    let est = MeanEstimate::from_samples(&diffs);
    Ok(GeneratorValue {
        value: est.mean / a2,
        stderr: est.stderr / a2,
        samples: n,
        excluded,
        warning: excluded as f64 > EXCLUSION_WARNING * n as f64,
    })
}

/// L_α f(u) = α⁻² E[f(exp_u(α ṽ[v, u])) − f(u)], v = uξ, with the lifted
/// geodesic integrated on O(M).
pub fn apply_rescaled_generator<C: Chart<2> + ?Sized>(
    m: &C,
    f: &FrameFunction,
    u: &FramePoint<2>,
    alpha: f64,
    law: IncrementLaw,
    n: usize,
    seed: u64,
) -> Result<GeneratorValue> {
    check_domain(m, &u.base.coords)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let cfg = GeodesicConfig::for_alpha(alpha);
    let f0 = f.eval(u);
    evaluate_law(law, alpha, n, seed, |xi| {
        let v = TangentVector::new(u.base, u.frame * xi * alpha);
        let end = horizontal_lift_path(m, u, &v, 1.0, &cfg)?.end;
        Ok(f.eval(&end) - f0)
    })
}

/// The base-manifold counterpart of [`apply_rescaled_generator`]: increments
/// are drawn through the coordinate frame at p and exp_p is evaluated in
/// closed form where available.
pub fn apply_base_generator<C: Chart<2> + ?Sized>(
    m: &C,
    f: BaseFunction,
    p: &Point<2>,
    alpha: f64,
    law: IncrementLaw,
    n: usize,
    seed: u64,
) -> Result<GeneratorValue> {
    check_domain(m, &p.coords)?;
    let cfg = GeodesicConfig::for_alpha(alpha);
    let frame = coordinate_frame_at(m, &p.coords)?;
    let f0 = f.eval(&p.coords);
    evaluate_law(law, alpha, n, seed, |xi| {
        let q = exp_map(m, p, &TangentVector::new(*p, frame * xi * alpha), &cfg)?;
        Ok(f.eval(&q.coords) - f0)
    })
}

/// Δ_M f = |g|^{-1/2} ∂_i(|g|^{1/2} g^{ij} ∂_j f) by nested central differences.
pub fn laplace_beltrami<C: Chart<2> + ?Sized>(m: &C, f: BaseFunction, p: &Point<2>, h: f64) -> Result<f64> {
    check_domain(m, &p.coords)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    if m.domain().margin(&p.coords) < 2.0 * h {
        return Err(Error::OutOfDomain { chart: m.name(), coords: p.coords.as_slice().to_vec() });
    }
    let e = |i: usize| {
        let mut v = Coords::<2>::zeros();
        v[i] = h;
        v
    };
    let flux = |y: &Coords<2>, i: usize| -> Result<f64> {
        let ginv = inverse_metric(m, y)?;
        let vol = m.metric(y).determinant().sqrt();
        let mut acc = 0.0;
        for j in 0..2 {
            let dj = (f.eval(&(y + e(j))) - f.eval(&(y - e(j)))) / (2.0 * h);
            acc += ginv[(i, j)] * dj;
        }
        Ok(vol * acc)
    };
    let x = p.coords;
    let mut div = 0.0;
    for i in 0..2 {
        div += (flux(&(x + e(i)), i)? - flux(&(x - e(i)), i)?) / (2.0 * h);
    }
    Ok(div / m.metric(&x).determinant().sqrt())
}

fn horizontal_second_differences<C: Chart<2> + ?Sized>(
    m: &C,
    f: &FrameFunction,
    u: &FramePoint<2>,
    h: f64,
) -> Result<f64> {
    let cfg = GeodesicConfig { step: h.min(GeodesicConfig::default().step), ..GeodesicConfig::default() };
    let f0 = f.eval(u);
    let mut acc = 0.0;
    for i in 0..2 {
        let e = u.frame_vector(i);
        let ahead = horizontal_lift_path(m, u, &e, h, &cfg)?.end;
        let behind = horizontal_lift_path(m, u, &e.scaled(-1.0), h, &cfg)?.end;
        acc += (f.eval(&ahead) - 2.0 * f0 + f.eval(&behind)) / (h * h);
    }
    Ok(acc)
}

/// Δ_H f(u) = Σ_i H_i² f(u), each term a second difference along the
/// horizontal geodesic through u with initial velocity H_i(u). With
/// `richardson`, steps h and h/2 are combined to cancel the O(h²) term.
pub fn horizontal_laplacian<C: Chart<2> + ?Sized>(
    m: &C,
    f: &FrameFunction,
    u: &FramePoint<2>,
    h: f64,
    richardson: bool,
) -> Result<f64> {
    check_domain(m, &u.base.coords)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let coarse = horizontal_second_differences(m, f, u, h)?;
    if !richardson {
        return Ok(coarse);
    }
    let fine = horizontal_second_differences(m, f, u, h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityEntry {
    pub base: Vec<f64>,
    /// Column-major frame matrix.
    pub frame: Vec<f64>,
    pub horizontal_laplacian: f64,
    pub laplace_beltrami: f64,
    pub analytic_laplacian: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub function: String,
    pub manifold: String,
    pub tolerance: f64,
    pub entries: Vec<IdentityEntry>,
    pub worst_error: f64,
    /// Largest spread of Δ_H(f∘π) across frames over one base point.
    pub worst_frame_spread: f64,
    pub pass: bool,
}

/// Compares Δ_H(f∘π)(u) with Δ_M f(π(u)) at every frame, both computed by
/// finite differences, and checks that Δ_H(f∘π) does not depend on the
/// frame over a fixed base point.
pub fn check_identity<C: Chart<2> + ?Sized>(
    m: &C,
    f: BaseFunction,
    frames: &[FramePoint<2>],
    tol: f64,
    h: f64,
) -> Result<IdentityReport> {
    let lifted = FrameFunction::Base(f);
    let mut entries = Vec::with_capacity(frames.len());
    let mut by_base: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
    for u in frames {
        let dh = horizontal_laplacian(m, &lifted, u, h, false)?;
        let dm = laplace_beltrami(m, f, &u.base, h)?;
        let key = u.base.coords.iter().map(|x| x.to_bits()).collect();
        let range = by_base.entry(key).or_insert((dh, dh));
        range.0 = range.0.min(dh);
        range.1 = range.1.max(dh);
        entries.push(IdentityEntry {
            base: u.base.coords.as_slice().to_vec(),
            frame: u.frame.as_slice().to_vec(),
            horizontal_laplacian: dh,
            laplace_beltrami: dm,
            analytic_laplacian: f.laplacian(&u.base.coords),
            error: (dh - dm).abs(),
        });
    }
    let worst_error = entries.iter().map(|e| e.error).fold(0.0, f64::max);
    let worst_frame_spread = by_base.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    Ok(IdentityReport {
        function: f.name().to_string(),
        manifold: m.name().to_string(),
        tolerance: tol,
        pass: worst_error <= tol && worst_frame_spread <= tol,
        entries,
        worst_error,
        worst_frame_spread,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub generator: f64,
    pub stderr: f64,
    /// |L_α f(u) − ½Δ_H f(u)|.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SlopeStatus {
    Fitted {
        fit: LogLogFit,
    },
    /// Every error is below [`ERROR_FLOOR`]: the remainder vanishes.
    AlreadyConverged,
    /// Some errors are at the floor and some are not.
    Degenerate {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorReport {
    pub function: String,
    pub law: IncrementLaw,
    pub base: Vec<f64>,
    pub frame: Vec<f64>,
    pub half_horizontal_laplacian: f64,
    pub rows: Vec<AlphaRow>,
    /// e(α) does not grow as α decreases (within two combined error bars).
    pub nonincreasing: bool,
    pub slope: SlopeStatus,
}

impl GeneratorReport {
    pub fn fitted_slope(&self) -> Option<f64> {
        match &self.slope {
            SlopeStatus::Fitted { fit } => Some(fit.slope),
            _ => None,
        }
    }

    /// CSV rows `alpha,error,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,error,stderr\n");
        for r in &self.rows {
            out.push_str(&format!("{:?},{:?},{:?}\n", r.alpha, r.error, r.stderr));
        }
        out
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.len() < 4 {
        return Err(Error::InvalidArgument(format!("slope fits need at least 4 alpha values, got {}", alphas.len())));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
        return Err(Error::InvalidArgument("alpha values must lie in (0, 1]".into()));
    }
    let ratio = alphas[1] / alphas[0];
    let geometric = alphas.windows(2).all(|w| ((w[1] / w[0]) / ratio - 1.0).abs() < 1e-9);
    if !geometric || ratio == 1.0 {
        return Err(Error::InvalidArgument("alpha values must be geometrically spaced".into()));
    }
    Ok(())
}

/// Measures e(α) = |L_α f(u) − ½Δ_H f(u)| over an α sweep and fits the
/// slope of ln e against ln α. ½Δ_H is evaluated with Richardson
/// extrapolation so that its error stays far below e(α).
pub fn convergence_slope<C: Chart<2> + ?Sized>(
    m: &C,
    f: &FrameFunction,
    u: &FramePoint<2>,
    alphas: &[f64],
    law: IncrementLaw,
    n: usize,
    seed: u64,
) -> Result<GeneratorReport> {
    check_alphas(alphas)?;
    let half = 0.5 * horizontal_laplacian(m, f, u, DEFAULT_FD_STEP, true)?;
    let mut rows = Vec::with_capacity(alphas.len());
    let mut sorted: Vec<f64> = alphas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for (k, &alpha) in sorted.iter().enumerate() {
        let g = apply_rescaled_generator(m, f, u, alpha, law, n, seed.wrapping_add(k as u64))?;
        rows.push(AlphaRow { alpha, generator: g.value, stderr: g.stderr, error: (g.value - half).abs() });
    }
    let nonincreasing = rows.windows(2).all(|w| w[1].error <= w[0].error + 2.0 * (w[0].stderr + w[1].stderr) + 1e-12);
    let below = rows.iter().filter(|r| r.error < ERROR_FLOOR).count();
    let slope = if below == rows.len() {
        SlopeStatus::AlreadyConverged
    } else if below > 0 {
        SlopeStatus::Degenerate { reason: format!("{below} of {} errors below the numerical floor", rows.len()) }
    } else {
        let xs: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.error).collect();
        match fit_loglog(&xs, &ys) {
            Ok(fit) => SlopeStatus::Fitted { fit },
            Err(e) => SlopeStatus::Degenerate { reason: e.to_string() },
        }
    };
    Ok(GeneratorReport {
        function: f.name(),
        law,
        base: u.base.coords.as_slice().to_vec(),
        frame: u.frame.as_slice().to_vec(),
        half_horizontal_laplacian: half,
        rows,
        nonincreasing,
        slope,
    })
}

/// Random frames over random base points of `region`: `per_base` frames at
/// each of `bases` base points, alternating orientation.
pub fn random_frames<C: Chart<2> + ?Sized>(
    m: &C,
    region: [(f64, f64); 2],
    bases: usize,
    per_base: usize,
    seed: u64,
) -> Result<Vec<FramePoint<2>>> {
    use rand::Rng;
    let mut rng = rng::stream(seed, 0);
    let mut out = Vec::with_capacity(bases * per_base);
    for _ in 0..bases {
        let p = Point::xy(rng.gen_range(region[0].0..region[0].1), rng.gen_range(region[1].0..region[1].1));
        for k in 0..per_base {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            out.push(FramePoint::rotated(m, p, angle, k % 2 == 1)?);
        }
    }
    Ok(out)
}

/// Frame whose matrix is `frame`, for callers that hold raw matrices.
pub fn frame_point<C: Chart<2> + ?Sized>(m: &C, base: Point<2>, frame: Mat<2>) -> Result<FramePoint<2>> {
    FramePoint::new(m, base, frame)
}
