use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Chart, ChartDomain, Christoffel, CoordBound, Coords, Mat, Point};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Chart parameters that can be set from a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldOptions {
    /// Sphere charts exclude θ < ε and θ > π − ε.
    pub pole_band: f64,
    /// Lowest admissible height of the hyperbolic half-plane chart.
    pub hyperbolic_y_min: f64,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        ManifoldOptions { pole_band: 1e-3, hyperbolic_y_min: 1e-6 }
    }
}

/// ℝ² with the flat metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euclidean {
    domain: ChartDomain<2>,
}

impl Default for Euclidean {
    fn default() -> Self {
        Euclidean { domain: ChartDomain { bounds: [CoordBound::unbounded(); 2] } }
    }
}

impl Chart<2> for Euclidean {
    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn domain(&self) -> &ChartDomain<2> {
        &self.domain
    }

    fn metric(&self, _x: &Coords<2>) -> Mat<2> {
        Mat::<2>::identity()
    }

    fn inverse_metric(&self, _x: &Coords<2>) -> Option<Mat<2>> {
        Some(Mat::<2>::identity())
    }

    fn analytic_christoffel(&self, _x: &Coords<2>) -> Option<Christoffel<2>> {
        Some(Christoffel::zero())
    }

    fn closed_form_geodesic(&self, x: &Coords<2>, v: &Coords<2>, t: f64) -> Option<(Coords<2>, Coords<2>)> {
        Some((x + v * t, *v))
    }

    fn geodesic_distance(&self, a: &Coords<2>, b: &Coords<2>) -> Option<f64> {
        Some((a - b).norm())
    }
}

/// The flat torus ℝ²/(2πℤ)², coordinates in [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatTorus {
    domain: ChartDomain<2>,
}

impl Default for FlatTorus {
    fn default() -> Self {
        FlatTorus { domain: ChartDomain { bounds: [CoordBound::periodic(0.0, TWO_PI); 2] } }
    }
}

impl Chart<2> for FlatTorus {
    fn name(&self) -> &'static str {
        "torus"
    }

    fn domain(&self) -> &ChartDomain<2> {
        &self.domain
    }

    fn metric(&self, _x: &Coords<2>) -> Mat<2> {
        Mat::<2>::identity()
    }

    fn inverse_metric(&self, _x: &Coords<2>) -> Option<Mat<2>> {
        Some(Mat::<2>::identity())
    }

    fn analytic_christoffel(&self, _x: &Coords<2>) -> Option<Christoffel<2>> {
        Some(Christoffel::zero())
    }

    fn closed_form_geodesic(&self, x: &Coords<2>, v: &Coords<2>, t: f64) -> Option<(Coords<2>, Coords<2>)> {
        Some((self.domain.normalize(&(x + v * t)), *v))
    }

    fn geodesic_distance(&self, a: &Coords<2>, b: &Coords<2>) -> Option<f64> {
        let wrap = |d: f64| {
            let d = d.rem_euclid(TWO_PI);
            d.min(TWO_PI - d)
        };
        Some(wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1])))
    }
}

/// The unit sphere in colatitude/longitude (θ, φ), g = diag(1, sin²θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    domain: ChartDomain<2>,
}

impl Sphere {
    pub fn with_pole_band(eps: f64) -> Self {
        Sphere {
            domain: ChartDomain { bounds: [CoordBound::closed(eps, PI - eps), CoordBound::periodic(0.0, TWO_PI)] },
        }
    }

    pub fn embed(x: &Coords<2>) -> Vector3<f64> {
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    /// Embedded image of the coordinate tangent vector v at x.
    pub fn embed_tangent(x: &Coords<2>, v: &Coords<2>) -> Vector3<f64> {
        let (e_theta, e_phi) = Self::unit_basis(x);
        e_theta * v[0] + e_phi * (x[0].sin() * v[1])
    }

    /// Unit vectors along ∂_θ and ∂_φ.
    pub fn unit_basis(x: &Coords<2>) -> (Vector3<f64>, Vector3<f64>) {
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        (Vector3::new(ct * cp, ct * sp, -st), Vector3::new(-sp, cp, 0.0))
    }

    pub fn chart_coords(p: &Vector3<f64>) -> Coords<2> {
        let theta = p.xy().norm().atan2(p.z);
        let phi = p.y.atan2(p.x).rem_euclid(TWO_PI);
        Coords::<2>::new(theta, if phi >= TWO_PI { 0.0 } else { phi })
    }

    pub fn chart_tangent(x: &Coords<2>, w: &Vector3<f64>) -> Coords<2> {
        let (e_theta, e_phi) = Self::unit_basis(x);
        Coords::<2>::new(w.dot(&e_theta), w.dot(&e_phi) / x[0].sin())
    }
}

impl Default for Sphere {
    fn default() -> Self {
        Sphere::with_pole_band(ManifoldOptions::default().pole_band)
    }
}

impl Chart<2> for Sphere {
    fn name(&self) -> &'static str {
        "sphere"
    }

    fn domain(&self) -> &ChartDomain<2> {
        &self.domain
    }

    fn metric(&self, x: &Coords<2>) -> Mat<2> {
        let s = x[0].sin();
        Mat::<2>::new(1.0, 0.0, 0.0, s * s)
    }

    fn inverse_metric(&self, x: &Coords<2>) -> Option<Mat<2>> {
        let s2 = x[0].sin().powi(2);
        (s2 > 0.0).then(|| Mat::<2>::new(1.0, 0.0, 0.0, 1.0 / s2))
    }

    fn analytic_christoffel(&self, x: &Coords<2>) -> Option<Christoffel<2>> {
        let (s, c) = x[0].sin_cos();
        let cot = c / s;
        Some(Christoffel([Mat::<2>::new(0.0, 0.0, 0.0, -s * c), Mat::<2>::new(0.0, cot, cot, 0.0)]))
    }

    fn closed_form_geodesic(&self, x: &Coords<2>, v: &Coords<2>, t: f64) -> Option<(Coords<2>, Coords<2>)> {
        let p = Self::embed(x);
        let w = Self::embed_tangent(x, v);
        let speed = w.norm();
        if speed == 0.0 {
            return Some((*x, *v));
        }
        let (s, c) = (speed * t).sin_cos();
        let q = p * c + w * (s / speed);
        let dq = p * (-speed * s) + w * c;
        let y = Self::chart_coords(&q);
        Some((y, Self::chart_tangent(&y, &dq)))
    }

    fn geodesic_distance(&self, a: &Coords<2>, b: &Coords<2>) -> Option<f64> {
        let (p, q) = (Self::embed(a), Self::embed(b));
        Some(p.cross(&q).norm().atan2(p.dot(&q)))
    }
}

/// The upper half-plane y > 0 with g = (dx² + dy²)/y².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicHalfPlane {
    domain: ChartDomain<2>,
}

impl HyperbolicHalfPlane {
    pub fn with_y_min(y_min: f64) -> Self {
        HyperbolicHalfPlane {
            domain: ChartDomain { bounds: [CoordBound::unbounded(), CoordBound::closed(y_min, f64::INFINITY)] },
        }
    }

    /// Image on the hyperboloid X0² − X1² − X2² = 1.
    fn embed(x: &Coords<2>) -> Vector3<f64> {
        let (u, y) = (x[0], x[1]);
        let r2 = u * u + y * y;
        Vector3::new((1.0 + r2) / (2.0 * y), u / y, (1.0 - r2) / (2.0 * y))
    }

    fn embed_tangent(x: &Coords<2>, v: &Coords<2>) -> Vector3<f64> {
        let (u, y) = (x[0], x[1]);
        let (a, b) = (v[0], v[1]);
        let y2 = y * y;
        Vector3::new(
            (u / y) * a + (0.5 - (1.0 + u * u) / (2.0 * y2)) * b,
            a / y - (u / y2) * b,
            -(u / y) * a + (-0.5 - (1.0 - u * u) / (2.0 * y2)) * b,
        )
    }

    fn chart_point(p: &Vector3<f64>) -> Coords<2> {
        let y = 1.0 / (p[0] + p[2]);
        Coords::<2>::new(p[1] * y, y)
    }

    fn chart_tangent(p: &Vector3<f64>, w: &Vector3<f64>) -> Coords<2> {
        let y = 1.0 / (p[0] + p[2]);
        let dy = -y * y * (w[0] + w[2]);
        Coords::<2>::new(w[1] * y + p[1] * dy, dy)
    }

    fn minkowski(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2]
    }
}

impl Default for HyperbolicHalfPlane {
    fn default() -> Self {
        HyperbolicHalfPlane::with_y_min(ManifoldOptions::default().hyperbolic_y_min)
    }
}

impl Chart<2> for HyperbolicHalfPlane {
    fn name(&self) -> &'static str {
        "hyperbolic"
    }

    fn domain(&self) -> &ChartDomain<2> {
        &self.domain
    }

    fn metric(&self, x: &Coords<2>) -> Mat<2> {
        let s = 1.0 / (x[1] * x[1]);
        Mat::<2>::new(s, 0.0, 0.0, s)
    }

    fn inverse_metric(&self, x: &Coords<2>) -> Option<Mat<2>> {
        let s = x[1] * x[1];
        (s > 0.0).then(|| Mat::<2>::new(s, 0.0, 0.0, s))
    }

    fn analytic_christoffel(&self, x: &Coords<2>) -> Option<Christoffel<2>> {
        let r = 1.0 / x[1];
        Some(Christoffel([Mat::<2>::new(0.0, -r, -r, 0.0), Mat::<2>::new(r, 0.0, 0.0, -r)]))
    }

    fn closed_form_geodesic(&self, x: &Coords<2>, v: &Coords<2>, t: f64) -> Option<(Coords<2>, Coords<2>)> {
        let p = Self::embed(x);
        let w = Self::embed_tangent(x, v);
        let speed = (-Self::minkowski(&w, &w)).max(0.0).sqrt();
        if speed == 0.0 {
            return Some((*x, *v));
        }
        let (s, c) = ((speed * t).sinh(), (speed * t).cosh());
        let q = p * c + w * (s / speed);
        let dq = p * (speed * s) + w * c;
        Some((Self::chart_point(&q), Self::chart_tangent(&q, &dq)))
    }

    fn geodesic_distance(&self, a: &Coords<2>, b: &Coords<2>) -> Option<f64> {
        let chord = (a - b).norm();
        Some(2.0 * (chord / (2.0 * (a[1] * b[1]).sqrt())).asinh())
    }
}

/// The catalog manifolds behind one type, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Manifold {
    Euclidean(Euclidean),
    Torus(FlatTorus),
    Sphere(Sphere),
    Hyperbolic(HyperbolicHalfPlane),
}

impl Manifold {
    pub const NAMES: [&'static str; 4] = ["euclidean", "torus", "sphere", "hyperbolic"];

    pub fn from_name(name: &str, opts: &ManifoldOptions) -> Result<Self> {
        match name {
            "euclidean" => Ok(Manifold::Euclidean(Euclidean::default())),
            "torus" => Ok(Manifold::Torus(FlatTorus::default())),
            "sphere" => Ok(Manifold::Sphere(Sphere::with_pole_band(opts.pole_band))),
            "hyperbolic" => Ok(Manifold::Hyperbolic(HyperbolicHalfPlane::with_y_min(opts.hyperbolic_y_min))),
            _ => Err(Error::UnknownName { kind: "manifold", name: name.to_string() }),
        }
    }

    pub fn catalog(opts: &ManifoldOptions) -> Vec<Manifold> {
        Self::NAMES.iter().map(|n| Self::from_name(n, opts).expect("catalog name")).collect()
    }

    fn chart(&self) -> &dyn Chart<2> {
        match self {
            Manifold::Euclidean(m) => m,
            Manifold::Torus(m) => m,
            Manifold::Sphere(m) => m,
            Manifold::Hyperbolic(m) => m,
        }
    }

    /// True for the two flat catalog manifolds.
    pub fn is_flat(&self) -> bool {
        matches!(self, Manifold::Euclidean(_) | Manifold::Torus(_))
    }

    /// A generic interior point used as default start and probe location.
    pub fn reference_point(&self) -> Point<2> {
        match self {
            Manifold::Euclidean(_) => Point::xy(0.0, 0.0),
            Manifold::Torus(_) => Point::xy(1.0, 2.0),
            Manifold::Sphere(_) => Point::xy(PI / 2.0, 0.0),
            Manifold::Hyperbolic(_) => Point::xy(0.0, 2.0),
        }
    }

    /// A point without the symmetries of [`Manifold::reference_point`], so
    /// that generator remainders at it do not vanish by accident.
    pub fn probe_point(&self) -> Point<2> {
        match self {
            Manifold::Euclidean(_) => Point::xy(0.3, -0.2),
            Manifold::Torus(_) => Point::xy(1.0, 2.0),
            Manifold::Sphere(_) => Point::xy(1.0, 0.5),
            Manifold::Hyperbolic(_) => Point::xy(0.1, 1.2),
        }
    }

    /// Coordinate box where experiments sample their probe points: well
    /// inside the chart, so that finite-difference stencils and short
    /// geodesics stay in the domain.
    pub fn experiment_region(&self) -> [(f64, f64); 2] {
        match self {
            Manifold::Euclidean(_) => [(-1.0, 1.0), (-1.0, 1.0)],
            Manifold::Torus(_) => [(0.0, TWO_PI), (0.0, TWO_PI)],
            Manifold::Sphere(_) => [(0.5, PI - 0.5), (0.0, TWO_PI)],
            Manifold::Hyperbolic(_) => [(-1.0, 1.0), (0.5, 2.0)],
        }
    }
}

impl Chart<2> for Manifold {
    fn name(&self) -> &'static str {
        self.chart().name()
    }

    fn domain(&self) -> &ChartDomain<2> {
        self.chart().domain()
    }

    #[inline]
    fn metric(&self, x: &Coords<2>) -> Mat<2> {
        self.chart().metric(x)
    }

    #[inline]
    fn inverse_metric(&self, x: &Coords<2>) -> Option<Mat<2>> {
        self.chart().inverse_metric(x)
    }

    #[inline]
    fn analytic_christoffel(&self, x: &Coords<2>) -> Option<Christoffel<2>> {
        self.chart().analytic_christoffel(x)
    }

    fn closed_form_geodesic(&self, x: &Coords<2>, v: &Coords<2>, t: f64) -> Option<(Coords<2>, Coords<2>)> {
        self.chart().closed_form_geodesic(x, v, t)
    }

    fn geodesic_distance(&self, a: &Coords<2>, b: &Coords<2>) -> Option<f64> {
        self.chart().geodesic_distance(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn names_round_trip() {
        let opts = ManifoldOptions::default();
        for name in Manifold::NAMES {
            assert_eq!(Manifold::from_name(name, &opts).unwrap().name(), name);
        }
        assert!(matches!(Manifold::from_name("klein", &opts), Err(Error::UnknownName { .. })));
    }

    #[test]
    fn hyperbolic_embedding_is_consistent() {
        let x = Coords::<2>::new(0.4, 1.7);
        let v = Coords::<2>::new(-0.3, 0.8);
        let p = HyperbolicHalfPlane::embed(&x);
        assert_abs_diff_eq!(HyperbolicHalfPlane::minkowski(&p, &p), 1.0, epsilon = 1e-13);
        let w = HyperbolicHalfPlane::embed_tangent(&x, &v);
        let g = HyperbolicHalfPlane::default().metric(&x);
        assert_abs_diff_eq!(-HyperbolicHalfPlane::minkowski(&w, &w), v.dot(&(g * v)), epsilon = 1e-13);
        assert_abs_diff_eq!(HyperbolicHalfPlane::chart_point(&p), x, epsilon = 1e-14);
        assert_abs_diff_eq!(HyperbolicHalfPlane::chart_tangent(&p, &w), v, epsilon = 1e-14);
    }

    #[test]
    fn vertical_hyperbolic_geodesic_is_exponential() {
        // along x = const, unit speed upward: y(t) = y0 e^t
        let h = HyperbolicHalfPlane::default();
        let (q, w) = h.closed_form_geodesic(&Coords::<2>::new(0.0, 2.0), &Coords::<2>::new(0.0, 2.0), 0.7).unwrap();
        assert_abs_diff_eq!(q, Coords::<2>::new(0.0, 2.0 * 0.7f64.exp()), epsilon = 1e-13);
        assert_abs_diff_eq!(w, Coords::<2>::new(0.0, 2.0 * 0.7f64.exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(h.geodesic_distance(&Coords::<2>::new(0.0, 2.0), &q).unwrap(), 0.7, epsilon = 1e-13);
    }

    #[test]
    fn sphere_embedding_round_trip() {
        let x = Coords::<2>::new(1.1, 5.9);
        let v = Coords::<2>::new(0.2, -0.7);
        let y = Sphere::chart_coords(&Sphere::embed(&x));
        assert_abs_diff_eq!(y, x, epsilon = 1e-14);
        assert_abs_diff_eq!(Sphere::chart_tangent(&x, &Sphere::embed_tangent(&x, &v)), v, epsilon = 1e-14);
    }
}
