//! The orthonormal frame bundle O(M) in chart coordinates.
//!
//! A frame point is a base point together with a matrix whose column i holds
//! the chart components of the frame vector ue_i. Horizontal curves are
//! obtained by integrating the geodesic equation coupled to the parallel
//! transport equation for every frame column.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{
    check_domain, coordinate_frame_at, domain_exit, geodesic_rhs, gram_schmidt, inner, orthonormality_defect, Chart,
    Christoffel, Coords, GeodesicConfig, GeodesicState, Mat, Point, TangentVector,
};
use crate::ode::{rk4_step, OdeState};

/// Tolerance accepted when constructing a [`FramePoint`] from user data.
pub const FRAME_TOLERANCE: f64 = 1e-9;

/// Largest per-step orthonormality loss tolerated before re-projection.
pub const DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePoint<const D: usize> {
    pub base: Point<D>,
    pub frame: Mat<D>,
}

impl<const D: usize> FramePoint<D> {
    /// Checks that `frame` is g-orthonormal at `base`.
    pub fn new<C: Chart<D> + ?Sized>(m: &C, base: Point<D>, frame: Mat<D>) -> Result<Self> {
        check_domain(m, &base.coords)?;
        let defect = orthonormality_defect(&m.metric(&base.coords), &frame);
        if !(defect <= FRAME_TOLERANCE) {
            return Err(Error::OrthonormalityDrift { drift: defect, limit: FRAME_TOLERANCE });
        }
        Ok(FramePoint { base, frame })
    }

    /// The Gram–Schmidt frame of the coordinate basis.
    pub fn coordinate<C: Chart<D> + ?Sized>(m: &C, base: Point<D>) -> Result<Self> {
        check_domain(m, &base.coords)?;
        Ok(FramePoint { base, frame: coordinate_frame_at(m, &base.coords)? })
    }

    /// ue_i as a tangent vector at the base point.
    pub fn frame_vector(&self, i: usize) -> TangentVector<D> {
        TangentVector::new(self.base, self.frame.column(i).into_owned())
    }

    pub fn inverse(&self) -> Result<Mat<D>> {
        self.frame.try_inverse().ok_or(Error::SingularFrame)
    }

    /// Coordinates x¹..x^d followed by the frame matrix in column-major order.
    pub fn csv_fields(&self) -> Vec<f64> {
        self.base.coords.iter().chain(self.frame.as_slice()).copied().collect()
    }
}

impl FramePoint<2> {
    /// Coordinate frame rotated by `angle`, optionally reflected so that
    /// the result has the opposite orientation.
    pub fn rotated<C: Chart<2> + ?Sized>(m: &C, base: Point<2>, angle: f64, reflect: bool) -> Result<Self> {
        let e = FramePoint::coordinate(m, base)?;
        let (s, c) = angle.sin_cos();
        let mut r = Mat::<2>::new(c, -s, s, c);
        if reflect {
            r.set_column(1, &(-r.column(1)));
        }
        Ok(FramePoint { base, frame: e.frame * r })
    }
}

/// A tangent vector to O(M): the dx part and the d(ue_i)^j part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTangent<const D: usize> {
    pub base: FramePoint<D>,
    pub base_components: Coords<D>,
    pub frame_components: Mat<D>,
}

impl<const D: usize> FrameTangent<D> {
    pub fn zero(base: FramePoint<D>) -> Self {
        FrameTangent { base, base_components: Coords::<D>::zeros(), frame_components: Mat::<D>::zeros() }
    }

    /// dπ(ξ).
    pub fn project(&self) -> TangentVector<D> {
        TangentVector::new(self.base.base, self.base_components)
    }
}

impl<const D: usize> Add for FrameTangent<D> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        FrameTangent {
            base: self.base,
            base_components: self.base_components + rhs.base_components,
            frame_components: self.frame_components + rhs.frame_components,
        }
    }
}

impl<const D: usize> Mul<f64> for FrameTangent<D> {
    type Output = Self;

    fn mul(self, s: f64) -> Self {
        FrameTangent {
            base: self.base,
            base_components: self.base_components * s,
            frame_components: self.frame_components * s,
        }
    }
}

/// O(d)-invariant inner product ⟨A, B⟩ = scale · trace(AᵀB) on 𝔬(d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SasakiMokConfig {
    pub vertical_scale: f64,
}

impl Default for SasakiMokConfig {
    fn default() -> Self {
        SasakiMokConfig { vertical_scale: 0.5 }
    }
}

/// Frame derivative −Γ(a, ·)U, i.e. (d(ue_l)^m) = −a^j (ue_l)^k Γ^m_{jk}.
#[inline]
fn transport_rate<const D: usize>(gamma: &Christoffel<D>, a: &Coords<D>, frame: &Mat<D>) -> Mat<D> {
    -(gamma.contract_first(a) * frame)
}

/// Canonical horizontal vector field H_i(u), zero-based `i`.
pub fn horizontal_vector_field<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    u: &FramePoint<D>,
    i: usize,
) -> Result<FrameTangent<D>> {
    if i >= D {
        return Err(Error::InvalidArgument(format!("horizontal field index {i} out of range for dimension {D}")));
    }
    let gamma = crate::manifold::christoffel(m, &u.base)?;
    let a = u.frame.column(i).into_owned();
    Ok(FrameTangent { base: *u, base_components: a, frame_components: transport_rate(&gamma, &a, &u.frame) })
}

/// Horizontal lift ṽ[v, u] = Σ_i (u⁻¹v)^i H_i(u).
pub fn lift_tangent<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    u: &FramePoint<D>,
    v: &TangentVector<D>,
) -> Result<FrameTangent<D>> {
    if v.base != u.base {
        return Err(Error::InvalidArgument("tangent vector is not based at the frame's base point".into()));
    }
    let coeffs = u.inverse()? * v.components;
    let mut out = FrameTangent::zero(*u);
    for i in 0..D {
        out = out + horizontal_vector_field(m, u, i)? * coeffs[i];
    }
    Ok(out)
}

/// Fundamental vertical field of an antisymmetric A: dU = U A.
pub fn vertical_vector_field<const D: usize>(u: &FramePoint<D>, a: &Mat<D>) -> FrameTangent<D> {
    FrameTangent { base: *u, base_components: Coords::<D>::zeros(), frame_components: u.frame * a }
}

/// Values of the canonical 1-form θ and the connection form ω on ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormValues<const D: usize> {
    pub theta: Coords<D>,
    pub omega: Mat<D>,
}

/// θ_u(ξ) = u⁻¹ dx and ω_u(ξ) = u⁻¹ (dU + Γ(dx, ·) U).
pub fn connection_form<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    u: &FramePoint<D>,
    xi: &FrameTangent<D>,
) -> Result<FormValues<D>> {
    let inv = u.inverse()?;
    let gamma = crate::manifold::christoffel(m, &u.base)?;
    let dx = xi.base_components;
    Ok(FormValues { theta: inv * dx, omega: inv * (xi.frame_components + gamma.contract_first(&dx) * u.frame) })
}

pub fn sasaki_mok_norm<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    u: &FramePoint<D>,
    xi: &FrameTangent<D>,
    cfg: &SasakiMokConfig,
) -> Result<f64> {
    if !(cfg.vertical_scale > 0.0) {
        return Err(Error::InvalidArgument(format!("vertical_scale must be positive, got {}", cfg.vertical_scale)));
    }
    let forms = connection_form(m, u, xi)?;
    let dx = xi.base_components;
    let horizontal = inner(m, &u.base.coords, &dx, &dx);
    let vertical = cfg.vertical_scale * (forms.omega.transpose() * forms.omega).trace();
    Ok((horizontal + vertical).max(0.0).sqrt())
}

/// Whether to re-orthonormalize the frame after every integrator step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftOptions {
    pub reproject: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions { reproject: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOutcome<const D: usize> {
    pub end: FramePoint<D>,
    /// γ'(t) of the projected geodesic.
    pub velocity: TangentVector<D>,
    /// Largest orthonormality defect seen before re-projection. Without
    /// re-projection this is the defect accumulated along the whole path.
    pub max_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LiftState<const D: usize> {
    geo: GeodesicState<D>,
    frame: Mat<D>,
}

impl<const D: usize> OdeState for LiftState<D> {
    #[inline]
    fn add_scaled(&self, k: &Self, h: f64) -> Self {
        LiftState { geo: self.geo.add_scaled(&k.geo, h), frame: self.frame.add_scaled(&k.frame, h) }
    }

    #[inline]
    fn rk4_combine(&self, k1: &Self, k2: &Self, k3: &Self, k4: &Self, dt: f64) -> Self {
        LiftState {
            geo: self.geo.rk4_combine(&k1.geo, &k2.geo, &k3.geo, &k4.geo, dt),
            frame: self.frame.rk4_combine(&k1.frame, &k2.frame, &k3.frame, &k4.frame, dt),
        }
    }
}

/// Horizontal lift, started at `u0`, of the geodesic γ(s) = exp(s v) for
/// s ∈ [0, t]; the frame is re-projected after each step.
pub fn horizontal_lift_path<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    u0: &FramePoint<D>,
    v: &TangentVector<D>,
    t: f64,
    cfg: &GeodesicConfig,
) -> Result<LiftOutcome<D>> {
    horizontal_lift_path_with(m, u0, v, t, cfg, LiftOptions::default())
}

pub fn horizontal_lift_path_with<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    u0: &FramePoint<D>,
    v: &TangentVector<D>,
    t: f64,
    cfg: &GeodesicConfig,
    opts: LiftOptions,
) -> Result<LiftOutcome<D>> {
    check_domain(m, &u0.base.coords)?;
    if v.base != u0.base {
        return Err(Error::InvalidArgument("tangent vector is not based at the frame's base point".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("lift time must be nonnegative, got {t}")));
    }
    let speed = inner(m, &u0.base.coords, &v.components, &v.components).max(0.0).sqrt();
    let n = cfg.substeps(speed * t)?;
    let dt = t / n as f64;
    let mut s = LiftState { geo: GeodesicState { x: u0.base.coords, v: v.components }, frame: u0.frame };
    let mut max_drift: f64 = 0.0;
    if speed * t > 0.0 {
        for _ in 0..n {
            s = rk4_step(&s, dt, |y| {
                let (geo, gamma) = geodesic_rhs(m, &y.geo)?;
                Ok(LiftState { geo, frame: transport_rate(&gamma, &y.geo.v, &y.frame) })
            })?;
            if !m.domain().contains(&s.geo.x) {
                return Err(domain_exit(m, &s.geo.x));
            }
            if opts.reproject {
                let g = m.metric(&s.geo.x);
                let drift = orthonormality_defect(&g, &s.frame);
                if drift > DRIFT_LIMIT {
                    return Err(Error::OrthonormalityDrift { drift, limit: DRIFT_LIMIT });
                }
                max_drift = max_drift.max(drift);
                s.frame = gram_schmidt(&g, &s.frame)?;
            }
        }
    }
    if !opts.reproject {
        max_drift = orthonormality_defect(&m.metric(&s.geo.x), &s.frame);
    }
    let end = Point::new(m.domain().normalize(&s.geo.x));
    Ok(LiftOutcome {
        end: FramePoint { base: end, frame: s.frame },
        velocity: TangentVector::new(end, s.geo.v),
        max_drift,
    })
}

/// Parallel transport of `w` along the geodesic γ(s) = exp_p(s v), s ∈ [0, t],
/// read off the horizontal lift of the coordinate frame at p.
pub fn parallel_transport<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    v: &TangentVector<D>,
    t: f64,
    w: &TangentVector<D>,
    cfg: &GeodesicConfig,
) -> Result<TangentVector<D>> {
    if w.base != v.base {
        return Err(Error::InvalidArgument("transported vector is not based at the geodesic's start".into()));
    }
    let u0 = FramePoint::coordinate(m, v.base)?;
    let lifted = horizontal_lift_path(m, &u0, v, t, cfg)?;
    Ok(TangentVector::new(lifted.end.base, lifted.end.frame * (u0.inverse()? * w.components)))
}

/// Result of transporting a frame around a closed piecewise-geodesic loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolonomyReport {
    /// Rotation angle of the returned frame relative to the starting frame.
    pub angle: f64,
    /// Distance between the loop's end point and its start.
    pub closure_error: f64,
    pub max_drift: f64,
}

/// Transports `start` along consecutive geodesic segments of the given
/// lengths. Between segments the velocity (not the frame) is turned by
/// +90° in the g-orthonormal coordinate frame.
pub fn transport_around_loop<C: Chart<2> + ?Sized>(
    m: &C,
    start: &FramePoint<2>,
    initial_velocity: &TangentVector<2>,
    lengths: &[f64],
    cfg: &GeodesicConfig,
) -> Result<(FramePoint<2>, f64)> {
    let mut u = *start;
    let speed = crate::manifold::norm(m, initial_velocity);
    if !(speed > 0.0) {
        return Err(Error::InvalidArgument("loop velocity must be nonzero".into()));
    }
    let mut v = initial_velocity.components / speed;
    let mut max_drift: f64 = 0.0;
    for (k, &len) in lengths.iter().enumerate() {
        if k > 0 {
            let e = coordinate_frame_at(m, &u.base.coords)?;
            let c = e.try_inverse().ok_or(Error::SingularFrame)? * v;
            v = e * Coords::<2>::new(-c[1], c[0]);
        }
        let out = horizontal_lift_path(m, &u, &TangentVector::new(u.base, v), len, cfg)?;
        max_drift = max_drift.max(out.max_drift);
        u = out.end;
        v = out.velocity.components;
    }
    Ok((u, max_drift))
}

/// Transports the coordinate frame around a geodesic triangle with three
/// right angles on the unit sphere. The triangle is an octant rotated so
/// that its edges stay clear of the chart's poles; its area is π/2.
pub fn sphere_octant_holonomy<C: Chart<2> + ?Sized>(sphere: &C, cfg: &GeodesicConfig) -> Result<HolonomyReport> {
    use crate::manifold::Sphere;
    use nalgebra::Vector3;
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    let s6 = 6f64.sqrt();
    let a = Vector3::new(1.0 / s2, 1.0 / s6, 1.0 / s3);
    let b = Vector3::new(-1.0 / s2, 1.0 / s6, 1.0 / s3);
    let x = Sphere::chart_coords(&a);
    let start = FramePoint::coordinate(sphere, Point::new(x))?;
    let v = TangentVector::new(start.base, Sphere::chart_tangent(&x, &b));
    let quarter = std::f64::consts::FRAC_PI_2;
    let (end, max_drift) = transport_around_loop(sphere, &start, &v, &[quarter; 3], cfg)?;
    let rel = start.inverse()? * end.frame;
    let closure_error = sphere
        .geodesic_distance(&start.base.coords, &end.base.coords)
        .unwrap_or_else(|| (start.base.coords - end.base.coords).norm());
    Ok(HolonomyReport { angle: rel[(1, 0)].atan2(rel[(0, 0)]), closure_error, max_drift })
}
