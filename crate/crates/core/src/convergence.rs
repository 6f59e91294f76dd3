//! Weak-convergence checks: empirical semigroups E[f(Z_t)] of simulated
//! walks against the heat semigroup e^{tΔ/2}f.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::BaseFunction;
use crate::manifold::{Chart, Coords, GeodesicConfig, Point};
use crate::stats::MeanEstimate;
use crate::walker::{base_walk_endpoint, lifted_walk_endpoint, run_coupled_base_walk, run_lifted_walk, WalkConfig};

/// Smallest replica count accepted by the empirical estimators.
pub const MIN_REPLICAS: usize = 100;

/// Empirical and reference values agree when |z| is below this.
pub const Z_THRESHOLD: f64 = 3.0;

/// Tolerance for pathwise equality under shared randomness.
pub const COUPLING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    GaussianExact,
    WrappedGaussian,
    HarmonicSeries,
}

/// How the heat semigroup is evaluated on one catalog manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatReference {
    pub manifold: &'static str,
    pub method: ReferenceMethod,
    /// Minimum Gauss–Hermite order. Larger t raises the order used so that
    /// the quadrature error stays below 1e-8 (see [`HeatReference::order_for`]).
    pub order: usize,
}

impl HeatReference {
    pub const DEFAULT_ORDER: usize = 40;

    /// The reference for a catalog manifold. The hyperbolic plane has none.
    pub fn for_manifold(name: &str) -> Result<Self> {
        let (manifold, method) = match name {
            "euclidean" => ("euclidean", ReferenceMethod::GaussianExact),
            "torus" => ("torus", ReferenceMethod::WrappedGaussian),
            "sphere" => ("sphere", ReferenceMethod::HarmonicSeries),
            other => {
                return Err(Error::UnsupportedFunction {
                    function: "*".into(),
                    method: format!("heat-semigroup ({other})"),
                })
            }
        };
        Ok(HeatReference { manifold, method, order: Self::DEFAULT_ORDER })
    }

    /// Quadrature order used at time t. For entire functions of exponential
    /// type 1 per unit σ the n-point error behaves like (e·t/2n)ⁿ, so
    /// n ≥ 3t + 20 keeps it far below 1e-8.
    pub fn order_for(&self, t: f64) -> usize {
        self.order.max((3.0 * t).ceil() as usize + 20).min(400)
    }
}

/// Nodes and weights of the n-point Gauss–Hermite rule for the standard
/// normal density, from the eigen-decomposition of the Jacobi matrix.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i + 1 == j || j + 1 == i { (i.max(j) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(jacobi);
    let mut rule: Vec<(f64, f64)> = (0..n).map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2))).collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn reference_for(manifold: &str, f: BaseFunction) -> Result<HeatReference> {
    HeatReference::for_manifold(manifold).map_err(|e| match e {
        Error::UnsupportedFunction { method, .. } => Error::UnsupportedFunction { function: f.name().into(), method },
        other => other,
    })
}

/// (e^{tΔ/2} f)(p).
pub fn heat_semigroup_reference(r: &HeatReference, f: BaseFunction, p: &Point<2>, t: f64) -> Result<f64> {
    if f.manifold() != r.manifold {
        return Err(Error::UnsupportedFunction { function: f.name().into(), method: format!("{:?}", r.method) });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.eval(&p.coords));
    }
    match r.method {
        ReferenceMethod::HarmonicSeries => {
            let lambda = f.eigenvalue().ok_or_else(|| Error::UnsupportedFunction {
                function: f.name().into(),
                method: "harmonic_series".into(),
            })?;
            Ok((-lambda * t / 2.0).exp() * f.eval(&p.coords))
        }
        ReferenceMethod::GaussianExact | ReferenceMethod::WrappedGaussian => {
            let wrap = r.method == ReferenceMethod::WrappedGaussian;
            let sigma = t.sqrt();
            let rule = gauss_hermite(r.order_for(t));
            let mut acc = 0.0;
            for &(z1, w1) in &rule {
                for &(z2, w2) in &rule {
                    let mut x = p.coords + Coords::<2>::new(z1, z2) * sigma;
                    if wrap {
                        x = x.map(|c| c.rem_euclid(std::f64::consts::TAU));
                    }
                    acc += w1 * w2 * f.eval(&x);
                }
            }
            Ok(acc)
        }
    }
}

/// A Monte Carlo semigroup estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemigroupEstimate {
    #[serde(flatten)]
    pub estimate: MeanEstimate,
    /// Replicas dropped after leaving the chart.
    pub excluded: usize,
}

fn check_request<const D: usize>(cfg: &WalkConfig<D>, t: f64) -> Result<()> {
    if cfg.replica_count < MIN_REPLICAS {
        return Err(Error::TooFewReplicas { replicas: cfg.replica_count, min: MIN_REPLICAS });
    }
    if !(t >= 0.0 && t <= cfg.horizon_t + 1e-12) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, {}]", cfg.horizon_t)));
    }
    Ok(())
}

fn reduce(values: Vec<Result<f64>>) -> Result<SemigroupEstimate> {
    let mut kept = Vec::with_capacity(values.len());
    let mut excluded = 0;
    for v in values {
        match v {
            Ok(x) => kept.push(x),
            Err(e) if e.is_replica_failure() => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(SemigroupEstimate { estimate: MeanEstimate::from_samples(&kept), excluded })
}

/// Mean of f(Z_t) over the replicas of the base walk.
pub fn empirical_semigroup<C: Chart<2> + Sync + ?Sized>(
    m: &C,
    cfg: &WalkConfig<2>,
    f: BaseFunction,
    t: f64,
) -> Result<SemigroupEstimate> {
    check_request(cfg, t)?;
    let values = (0..cfg.replica_count)
        .into_par_iter()
        .map(|r| base_walk_endpoint(m, cfg, r, t).map(|p| f.eval(&p.coords)))
        .collect();
    reduce(values)
}

/// Mean of (f∘π)(Z̃_t) over the replicas of the lifted walk.
pub fn empirical_lifted_semigroup<C: Chart<2> + Sync + ?Sized>(
    m: &C,
    cfg: &WalkConfig<2>,
    f: BaseFunction,
    t: f64,
) -> Result<SemigroupEstimate> {
    check_request(cfg, t)?;
    let values = (0..cfg.replica_count)
        .into_par_iter()
        .map(|r| lifted_walk_endpoint(m, cfg, r, t).map(|u| f.eval(&u.base.coords)))
        .collect();
    reduce(values)
}

/// One compared value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub function: String,
    pub t: f64,
    pub alpha: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub reference: f64,
    /// (empirical − reference) / stderr.
    pub z: f64,
    pub excluded: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSummary {
    /// |bias| does not grow as α decreases, within two combined error bars.
    pub monotone: bool,
    pub final_z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub manifold: String,
    pub rows: Vec<ConvergenceRow>,
    pub trend: Option<TrendSummary>,
    pub pass: bool,
}

impl ConvergenceReport {
    /// CSV rows `function,t,alpha,empirical,stderr,reference,z,excluded,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("function,t,alpha,empirical,stderr,reference,z,excluded,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:?},{:?},{:?},{:?},{:?},{:?},{},{}\n",
                r.function, r.t, r.alpha, r.empirical, r.stderr, r.reference, r.z, r.excluded, r.pass
            ));
        }
        out
    }
}

fn row(function: &str, t: f64, alpha: f64, est: &SemigroupEstimate, reference: f64) -> ConvergenceRow {
    let z = est.estimate.z_score(reference);
    ConvergenceRow {
        function: function.to_string(),
        t,
        alpha,
        empirical: est.estimate.mean,
        stderr: est.estimate.stderr,
        reference,
        z,
        excluded: est.excluded,
        pass: z.abs() < Z_THRESHOLD,
    }
}

/// Empirical semigroup of f over a grid of times, each against the heat
/// reference.
pub fn semigroup_test<C: Chart<2> + Sync + ?Sized>(
    m: &C,
    cfg: &WalkConfig<2>,
    f: BaseFunction,
    times: &[f64],
) -> Result<ConvergenceReport> {
    let reference = reference_for(m.name(), f)?;
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let est = empirical_semigroup(m, cfg, f, t)?;
        let exact = heat_semigroup_reference(&reference, f, &cfg.initial, t)?;
        rows.push(row(f.name(), t, cfg.alpha, &est, exact));
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ConvergenceReport { manifold: m.name().into(), rows, trend: None, pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Randomness {
    /// The base walk replays the lifted walk's stream and carried frames.
    Shared,
    /// The base walk uses its own stream and the coordinate frame field.
    Independent,
}

/// Compares E[(f∘π)(Z̃_t)] from the lifted walk with E[f(Z_t)] from a base
/// walk. With shared randomness every replica must agree to
/// [`COUPLING_TOLERANCE`]; with independent streams the two means must agree
/// within [`Z_THRESHOLD`] combined standard errors.
pub fn lifted_functional_test<C: Chart<2> + Sync + ?Sized>(
    m: &C,
    cfg: &WalkConfig<2>,
    f: BaseFunction,
    t: f64,
    randomness: Randomness,
) -> Result<ConvergenceReport> {
    check_request(cfg, t)?;
    let row = match randomness {
        Randomness::Shared => {
            let local = WalkConfig { horizon_t: t, ..*cfg };
            let pairs: Vec<Result<(f64, f64)>> = (0..cfg.replica_count)
                .into_par_iter()
                .map(|r| {
                    let lifted = run_lifted_walk(m, &local, r)?;
                    let base = run_coupled_base_walk(m, &local, r, &lifted.step_frames)?;
                    let a = lifted.end().base.coords;
                    let b = base.points.last().expect("paths record their start").coords;
                    Ok((f.eval(&a), f.eval(&b)))
                })
                .collect();
            let (mut lifted, mut base, mut excluded) = (Vec::new(), Vec::new(), 0);
            for p in pairs {
                match p {
                    Ok((a, b)) => {
                        lifted.push(a);
                        base.push(b);
                    }
                    Err(e) if e.is_replica_failure() => excluded += 1,
                    Err(e) => return Err(e),
                }
            }
            let worst = lifted.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let l = MeanEstimate::from_samples(&lifted);
            let b = MeanEstimate::from_samples(&base);
            ConvergenceRow {
                function: f.name().into(),
                t,
                alpha: cfg.alpha,
                empirical: l.mean,
                stderr: 0.0,
                reference: b.mean,
                z: l.z_score(b.mean),
                excluded,
                pass: worst <= COUPLING_TOLERANCE,
            }
        }
        Randomness::Independent => {
            let lifted = empirical_lifted_semigroup(m, cfg, f, t)?;
            let other = WalkConfig { master_seed: cfg.master_seed ^ 0x9e37_79b9_7f4a_7c15, ..*cfg };
            let base = empirical_semigroup(m, &other, f, t)?;
            let stderr = lifted.estimate.stderr.hypot(base.estimate.stderr);
            let combined = SemigroupEstimate {
                estimate: MeanEstimate { stderr, ..lifted.estimate },
                excluded: lifted.excluded + base.excluded,
            };
            row(f.name(), t, cfg.alpha, &combined, base.estimate.mean)
        }
    };
    let pass = row.pass;
    Ok(ConvergenceReport { manifold: m.name().into(), rows: vec![row], trend: None, pass })
}

/// Bias of the empirical semigroup against the heat reference over a sweep
/// of α values, largest first.
pub fn alpha_trend<C: Chart<2> + Sync + ?Sized>(
    m: &C,
    cfg: &WalkConfig<2>,
    f: BaseFunction,
    t: f64,
    alphas: &[f64],
) -> Result<ConvergenceReport> {
    if alphas.len() < 3 {
        return Err(Error::InvalidArgument(format!("an alpha trend needs at least 3 values, got {}", alphas.len())));
    }
    let reference = reference_for(m.name(), f)?;
    let exact = heat_semigroup_reference(&reference, f, &cfg.initial, t)?;
    let mut sorted = alphas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(sorted.len());
    for alpha in sorted {
        let local = WalkConfig { alpha, geodesic: GeodesicConfig::for_alpha(alpha), ..*cfg };
        let est = empirical_semigroup(m, &local, f, t)?;
        rows.push(row(f.name(), t, alpha, &est, exact));
    }
    let monotone = rows.windows(2).all(|w| {
        (w[1].empirical - w[1].reference).abs()
            <= (w[0].empirical - w[0].reference).abs() + 2.0 * (w[0].stderr + w[1].stderr) + 1e-12
    });
    let final_z = rows.last().map(|r| r.z).unwrap_or(0.0);
    let pass = monotone && final_z.abs() < Z_THRESHOLD;
    Ok(ConvergenceReport {
        manifold: m.name().into(),
        rows,
        trend: Some(TrendSummary { monotone, final_z, pass }),
        pass,
    })
}
