//! Geodesic random walks on M and their horizontal lifts to O(M).
//!
//! One step moves from p to exp_p(α v) with v = uξ drawn through a frame u.
//! Base walks use the coordinate frame field; lifted walks carry their own
//! frame along the horizontal lift of each geodesic step.
//!
//! Time is either the rescaled step count (step k happens at time kα²) or
//! an exponential clock of rate α⁻² between steps.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{horizontal_lift_path, FramePoint};
use crate::increments::IncrementLaw;
use crate::manifold::{
    check_domain, coordinate_frame_at, geodesic_with_tangent, integrate_geodesic, Chart, GeodesicConfig, Mat, Point,
    TangentVector,
};
use crate::rng::{self, Stream};

/// Paths are recorded at most this many times over the horizon.
pub const MAX_RECORDS: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    #[default]
    DiscreteRescaled,
    ExponentialClock,
}

impl std::str::FromStr for TimeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete_rescaled" | "discrete" => Ok(TimeMode::DiscreteRescaled),
            "exponential_clock" | "exponential" => Ok(TimeMode::ExponentialClock),
            _ => Err(Error::UnknownName { kind: "time mode", name: s.to_string() }),
        }
    }
}

/// How base walks evaluate exp_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeodesicMethod {
    /// Closed form when the chart has one, RK4 otherwise.
    #[default]
    Auto,
    /// Always RK4. Lifted walks integrate their base geodesics this way.
    Integrated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig<const D: usize> {
    pub alpha: f64,
    pub horizon_t: f64,
    pub time_mode: TimeMode,
    pub law: IncrementLaw,
    pub initial: Point<D>,
    /// Starting frame of lifted walks; the coordinate frame when `None`.
    pub initial_frame: Option<Mat<D>>,
    pub geodesic: GeodesicConfig,
    pub method: GeodesicMethod,
    pub master_seed: u64,
    pub replica_count: usize,
}

impl<const D: usize> WalkConfig<D> {
    /// Defaults: discrete time, sphere-uniform increments, integrator step
    /// `min(1e-3, α/50)`, one replica.
    pub fn new(alpha: f64, horizon_t: f64, initial: Point<D>) -> Self {
        WalkConfig {
            alpha,
            horizon_t,
            time_mode: TimeMode::default(),
            law: IncrementLaw::SphereUniform,
            initial,
            initial_frame: None,
            geodesic: GeodesicConfig::for_alpha(alpha),
            method: GeodesicMethod::default(),
            master_seed: 0,
            replica_count: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.horizon_t >= 0.0 && self.horizon_t.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {}", self.horizon_t)));
        }
        if self.replica_count == 0 {
            return Err(Error::InvalidArgument("replica_count must be at least 1".into()));
        }
        self.geodesic.validate()
    }

    /// Number of steps the discrete walk takes up to time `t`: ⌊α⁻² t⌋.
    pub fn steps_until(&self, t: f64) -> usize {
        // guard against t/α² landing just below an integer
        (t / (self.alpha * self.alpha) + 1e-9).floor() as usize
    }

    /// Spacing of recorded samples: max(α², horizon/1000).
    pub fn record_interval(&self) -> f64 {
        (self.alpha * self.alpha).max(self.horizon_t / MAX_RECORDS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path<const D: usize> {
    pub replica: usize,
    pub times: Vec<f64>,
    pub points: Vec<Point<D>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePath<const D: usize> {
    pub replica: usize,
    pub times: Vec<f64>,
    pub frames: Vec<FramePoint<D>>,
}

impl<const D: usize> FramePath<D> {
    /// π applied to every recorded frame point.
    pub fn project(&self) -> Path<D> {
        Path { replica: self.replica, times: self.times.clone(), points: self.frames.iter().map(|u| u.base).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recording {
    Grid,
    FinalOnly,
}

/// Runs the step/hold schedule of `cfg` up to `horizon`, calling `record`
/// at the recording times with the current state.
fn drive<S, F, G, const D: usize>(
    cfg: &WalkConfig<D>,
    horizon: f64,
    recording: Recording,
    rng: &mut Stream,
    state: &mut S,
    mut step: F,
    mut record: G,
) -> Result<()>
where
    F: FnMut(&mut S, &mut Stream) -> Result<()>,
    G: FnMut(f64, &S),
{
    let a2 = cfg.alpha * cfg.alpha;
    match cfg.time_mode {
        TimeMode::DiscreteRescaled => {
            let n = cfg.steps_until(horizon);
            let stride = match recording {
                Recording::Grid => ((cfg.record_interval() / a2) - 1e-9).ceil().max(1.0) as usize,
                Recording::FinalOnly => usize::MAX,
            };
            if recording == Recording::Grid || n == 0 {
                record(0.0, state);
            }
            for k in 1..=n {
                step(state, rng)?;
                if k % stride == 0 || k == n {
                    record(k as f64 * a2, state);
                }
            }
        }
        TimeMode::ExponentialClock => {
            let clock = Exp::new(1.0 / a2).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let dt = cfg.record_interval();
            let grid: Vec<f64> = match recording {
                Recording::Grid => {
                    let n = (horizon / dt + 1e-9).floor() as usize;
                    let mut g: Vec<f64> = (0..=n).map(|j| j as f64 * dt).collect();
                    if horizon - g[n] > 1e-12 {
                        g.push(horizon);
                    }
                    g
                }
                Recording::FinalOnly => vec![horizon],
            };
            let mut next_jump: f64 = clock.sample(rng);
            for &t in &grid {
                while next_jump <= t {
                    step(state, rng)?;
                    next_jump += clock.sample(rng);
                }
                record(t, state);
            }
        }
    }
    Ok(())
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn base_move<C: Chart<D> + ?Sized, R: Rng + ?Sized, const D: usize>(
    m: &C,
    p: &Point<D>,
    frame: &Mat<D>,
    law: IncrementLaw,
    alpha: f64,
    method: GeodesicMethod,
    cfg: &GeodesicConfig,
    rng: &mut R,
) -> Result<Point<D>> {
    let v = frame * law.sample::<R, D>(rng);
    let step = v * alpha;
    match method {
        GeodesicMethod::Auto => geodesic_with_tangent(m, p, &TangentVector::new(*p, step), 1.0, cfg).map(|(q, _)| q),
        GeodesicMethod::Integrated => integrate_geodesic(m, p, &step, 1.0, cfg).map(|(q, _)| q),
    }
}

/// One step of the speed-α walk: exp_p(α v), v drawn through the coordinate
/// orthonormal frame at p.
pub fn step_discrete<C: Chart<D> + ?Sized, R: Rng + ?Sized, const D: usize>(
    m: &C,
    law: IncrementLaw,
    p: &Point<D>,
    alpha: f64,
    cfg: &GeodesicConfig,
    rng: &mut R,
) -> Result<Point<D>> {
    check_domain(m, &p.coords)?;
    let frame = coordinate_frame_at(m, &p.coords)?;
    base_move(m, p, &frame, law, alpha, GeodesicMethod::Auto, cfg, rng)
}

fn start<C: Chart<D> + ?Sized, const D: usize>(m: &C, cfg: &WalkConfig<D>) -> Result<()> {
    cfg.validate()?;
    check_domain(m, &cfg.initial.coords)
}

/// Trajectory of one replica of the base walk, recorded on the grid.
pub fn run_base_walk<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    cfg: &WalkConfig<D>,
    replica: usize,
) -> Result<Path<D>> {
    start(m, cfg)?;
    let mut rng = rng::stream(cfg.master_seed, replica as u64);
    let mut p = cfg.initial;
    let mut path = Path { replica, times: Vec::new(), points: Vec::new() };
    drive(
        cfg,
        cfg.horizon_t,
        Recording::Grid,
        &mut rng,
        &mut p,
        |p, rng| {
            let frame = coordinate_frame_at(m, &p.coords)?;
            *p = base_move(m, p, &frame, cfg.law, cfg.alpha, cfg.method, &cfg.geodesic, rng)?;
            Ok(())
        },
        |t, p| {
            path.times.push(t);
            path.points.push(*p);
        },
    )?;
    Ok(path)
}

/// Position of one replica of the base walk at time `t` (no path recorded).
pub fn base_walk_endpoint<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    cfg: &WalkConfig<D>,
    replica: usize,
    t: f64,
) -> Result<Point<D>> {
    start(m, cfg)?;
    let mut rng = rng::stream(cfg.master_seed, replica as u64);
    let mut p = cfg.initial;
    let mut end = p;
    drive(
        cfg,
        t,
        Recording::FinalOnly,
        &mut rng,
        &mut p,
        |p, rng| {
            let frame = coordinate_frame_at(m, &p.coords)?;
            *p = base_move(m, p, &frame, cfg.law, cfg.alpha, cfg.method, &cfg.geodesic, rng)?;
            Ok(())
        },
        |_, p| end = *p,
    )?;
    Ok(end)
}

/// A lifted trajectory together with its projection and the frame used at
/// every step.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedWalk<const D: usize> {
    pub frame_path: FramePath<D>,
    pub projection: Path<D>,
    /// Frame carried into step k, for replaying the walk on M.
    pub step_frames: Vec<Mat<D>>,
    /// Largest per-step orthonormality defect before re-projection.
    pub max_drift: f64,
}

impl<const D: usize> LiftedWalk<D> {
    pub fn end(&self) -> &FramePoint<D> {
        self.frame_path.frames.last().expect("paths record their start")
    }
}

fn initial_frame<C: Chart<D> + ?Sized, const D: usize>(m: &C, cfg: &WalkConfig<D>) -> Result<FramePoint<D>> {
    match cfg.initial_frame {
        Some(f) => FramePoint::new(m, cfg.initial, f),
        None => FramePoint::coordinate(m, cfg.initial),
    }
}

fn lifted<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    cfg: &WalkConfig<D>,
    replica: usize,
    horizon: f64,
    recording: Recording,
) -> Result<LiftedWalk<D>> {
    start(m, cfg)?;
    let mut rng = rng::stream(cfg.master_seed, replica as u64);
    let mut u = initial_frame(m, cfg)?;
    let mut frame_path = FramePath { replica, times: Vec::new(), frames: Vec::new() };
    let mut step_frames = Vec::new();
    let mut max_drift: f64 = 0.0;
    drive(
        cfg,
        horizon,
        recording,
        &mut rng,
        &mut u,
        |u, rng| {
            step_frames.push(u.frame);
            let v = u.frame * cfg.law.sample::<Stream, D>(rng);
            let step = v * cfg.alpha;
            let out = horizontal_lift_path(m, u, &TangentVector::new(u.base, step), 1.0, &cfg.geodesic)?;
            max_drift = max_drift.max(out.max_drift);
            *u = out.end;
            Ok(())
        },
        |t, u| {
            frame_path.times.push(t);
            frame_path.frames.push(*u);
        },
    )?;
    let projection = frame_path.project();
    Ok(LiftedWalk { frame_path, projection, step_frames, max_drift })
}

/// One replica of the horizontally lifted walk Z̃ on O(M). Every step draws
/// ξ once, sets v = uξ and follows the horizontal lift of s ↦ exp(s α v)
/// for s ∈ [0, 1].
pub fn run_lifted_walk<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    cfg: &WalkConfig<D>,
    replica: usize,
) -> Result<LiftedWalk<D>> {
    lifted(m, cfg, replica, cfg.horizon_t, Recording::Grid)
}

/// State of one lifted replica at time `t`.
pub fn lifted_walk_endpoint<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    cfg: &WalkConfig<D>,
    replica: usize,
    t: f64,
) -> Result<FramePoint<D>> {
    lifted(m, cfg, replica, t, Recording::FinalOnly).map(|w| *w.end())
}

/// The base walk driven by the same random stream as the lifted replica,
/// with its frame field replaced by the frames the lifted walk carried.
/// Geodesics are always integrated, so the result matches the projection of
/// the lifted walk step by step.
pub fn run_coupled_base_walk<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    cfg: &WalkConfig<D>,
    replica: usize,
    step_frames: &[Mat<D>],
) -> Result<Path<D>> {
    start(m, cfg)?;
    let mut rng = rng::stream(cfg.master_seed, replica as u64);
    let mut p = cfg.initial;
    let mut k = 0usize;
    let mut path = Path { replica, times: Vec::new(), points: Vec::new() };
    drive(
        cfg,
        cfg.horizon_t,
        Recording::Grid,
        &mut rng,
        &mut p,
        |p, rng| {
            let frame = step_frames
                .get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("no carried frame supplied for step {k}")))?;
            k += 1;
            *p = base_move(m, p, frame, cfg.law, cfg.alpha, GeodesicMethod::Integrated, &cfg.geodesic, rng)?;
            Ok(())
        },
        |t, p| {
            path.times.push(t);
            path.points.push(*p);
        },
    )?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    Base,
    Lifted,
}

/// A replica that was aborted, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedReplica {
    pub replica: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<const D: usize> {
    pub kind: WalkKind,
    /// Successful replicas in replica order.
    pub paths: Vec<Path<D>>,
    /// Frame paths of lifted replicas, parallel to `paths`.
    pub frame_paths: Vec<FramePath<D>>,
    pub failures: Vec<FailedReplica>,
}

impl<const D: usize> Dataset<D> {
    pub fn domain_exit_count(&self) -> usize {
        self.failures.len()
    }

    /// CSV with header `replica,time,x1..xd` and, for lifted walks, the
    /// frame entries `f{i}{j}` = (ue_i)^j in column-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replica,time");
        for j in 1..=D {
            write!(out, ",x{j}").unwrap();
        }
        if self.kind == WalkKind::Lifted {
            for i in 1..=D {
                for j in 1..=D {
                    write!(out, ",f{i}{j}").unwrap();
                }
            }
        }
        out.push('\n');
        match self.kind {
            WalkKind::Base => {
                for path in &self.paths {
                    for (t, p) in path.times.iter().zip(&path.points) {
                        write!(out, "{},{:?}", path.replica, t).unwrap();
                        for x in p.coords.iter() {
                            write!(out, ",{x:?}").unwrap();
                        }
                        out.push('\n');
                    }
                }
            }
            WalkKind::Lifted => {
                for path in &self.frame_paths {
                    for (t, u) in path.times.iter().zip(&path.frames) {
                        write!(out, "{},{:?}", path.replica, t).unwrap();
                        for x in u.csv_fields() {
                            write!(out, ",{x:?}").unwrap();
                        }
                        out.push('\n');
                    }
                }
            }
        }
        out
    }
}

/// Runs every replica of `cfg` in parallel. Replicas that leave the chart
/// are counted and dropped; any other error aborts the batch. The dataset
/// does not depend on the number of threads.
pub fn batch_run<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    cfg: &WalkConfig<D>,
    kind: WalkKind,
) -> Result<Dataset<D>> {
    start(m, cfg)?;
    let results: Vec<Result<(Path<D>, Option<FramePath<D>>)>> = (0..cfg.replica_count)
        .into_par_iter()
        .map(|r| match kind {
            WalkKind::Base => run_base_walk(m, cfg, r).map(|p| (p, None)),
            WalkKind::Lifted => run_lifted_walk(m, cfg, r).map(|w| (w.projection, Some(w.frame_path))),
        })
        .collect();
    let mut data = Dataset { kind, paths: Vec::new(), frame_paths: Vec::new(), failures: Vec::new() };
    for (replica, res) in results.into_iter().enumerate() {
        match res {
            Ok((p, f)) => {
                data.paths.push(p);
                data.frame_paths.extend(f);
            }
            Err(e) if e.is_replica_failure() => data.failures.push(FailedReplica { replica, reason: e.to_string() }),
            Err(e) => return Err(e),
        }
    }
    Ok(data)
}
