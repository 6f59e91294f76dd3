//! Increment laws {μ_p}, sampled through an orthonormal frame.
//!
//! A law here is the distribution of a centered vector ξ ∈ ℝ^d with identity
//! covariance. Pushing it through a g-orthonormal frame u, v = uξ, gives a
//! tangent vector with mean zero and covariance u uᵀ = g⁻¹(p).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FramePoint;
use crate::manifold::{coordinate_orthonormal_frame, inverse_metric, Chart, Coords, Mat, Point, TangentVector};
use crate::rng;

/// Smallest sample count accepted by [`validate_law`].
pub const MIN_VALIDATION_SAMPLES: usize = 10_000;

// Two-point law with P(2) = 1/5, P(-1/2) = 4/5: mean 0, variance 1,
// third moment 3/2.
const SKEW_HIGH: f64 = 2.0;
const SKEW_LOW: f64 = -0.5;
const SKEW_P_HIGH: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementLaw {
    /// Standard normal components.
    Gaussian,
    /// Uniform on the sphere of radius √d.
    SphereUniform,
    /// ±√d e_I with I and the sign uniform.
    Rademacher,
    /// Independent two-point components with nonzero third moment.
    /// Diagnostic only: it exposes the O(α) term of the generator error.
    Skewed,
}

impl IncrementLaw {
    pub const ALL: [IncrementLaw; 4] =
        [IncrementLaw::Gaussian, IncrementLaw::SphereUniform, IncrementLaw::Rademacher, IncrementLaw::Skewed];

    pub fn name(&self) -> &'static str {
        match self {
            IncrementLaw::Gaussian => "gaussian",
            IncrementLaw::SphereUniform => "sphere_uniform",
            IncrementLaw::Rademacher => "rademacher",
            IncrementLaw::Skewed => "skewed",
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, IncrementLaw::Skewed)
    }

    pub fn has_bounded_support(&self) -> bool {
        !matches!(self, IncrementLaw::Gaussian)
    }

    /// Draws ξ.
    pub fn sample<R: Rng + ?Sized, const D: usize>(&self, rng: &mut R) -> Coords<D> {
        let root_d = (D as f64).sqrt();
        match self {
            IncrementLaw::Gaussian => Coords::<D>::from_fn(|_, _| rng.sample(StandardNormal)),
            IncrementLaw::SphereUniform => loop {
                let z = Coords::<D>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                let n = z.norm();
                if n > 0.0 {
                    break z * (root_d / n);
                }
            },
            IncrementLaw::Rademacher => {
                let i = rng.gen_range(0..D);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                let mut xi = Coords::<D>::zeros();
                xi[i] = sign * root_d;
                xi
            }
            IncrementLaw::Skewed => {
                Coords::<D>::from_fn(|_, _| if rng.gen_bool(SKEW_P_HIGH) { SKEW_HIGH } else { SKEW_LOW })
            }
        }
    }

    /// Support points and weights for laws with finite support.
    pub fn atoms<const D: usize>(&self) -> Option<Vec<(f64, Coords<D>)>> {
        match self {
            IncrementLaw::Rademacher => {
                let w = 1.0 / (2 * D) as f64;
                let root_d = (D as f64).sqrt();
                Some(
                    (0..D)
                        .flat_map(|i| {
                            [1.0, -1.0].into_iter().map(move |s| {
                                let mut xi = Coords::<D>::zeros();
                                xi[i] = s * root_d;
                                (w, xi)
                            })
                        })
                        .collect(),
                )
            }
            IncrementLaw::Skewed => Some(
                (0..1usize << D)
                    .map(|mask| {
                        let mut w = 1.0;
                        let xi = Coords::<D>::from_fn(|i, _| {
                            if mask >> i & 1 == 1 {
                                w *= SKEW_P_HIGH;
                                SKEW_HIGH
                            } else {
                                w *= 1.0 - SKEW_P_HIGH;
                                SKEW_LOW
                            }
                        });
                        (w, xi)
                    })
                    .collect(),
            ),
            IncrementLaw::Gaussian | IncrementLaw::SphereUniform => None,
        }
    }

    /// E‖ξ‖³.
    pub fn third_abs_moment(&self, d: usize) -> f64 {
        let df = d as f64;
        match self {
            IncrementLaw::SphereUniform | IncrementLaw::Rademacher => df.powf(1.5),
            // chi distribution: E R³ = 2^{3/2} Γ((d+3)/2) / Γ(d/2)
            IncrementLaw::Gaussian => {
                use statrs::function::gamma::ln_gamma;
                (1.5 * 2f64.ln() + ln_gamma((df + 3.0) / 2.0) - ln_gamma(df / 2.0)).exp()
            }
            IncrementLaw::Skewed => {
                // sum over the number k of high components
                (0..=d)
                    .map(|k| {
                        let count = binomial(d, k);
                        let w = SKEW_P_HIGH.powi(k as i32) * (1.0 - SKEW_P_HIGH).powi((d - k) as i32);
                        let r2 = k as f64 * SKEW_HIGH * SKEW_HIGH + (d - k) as f64 * SKEW_LOW * SKEW_LOW;
                        count * w * r2.powf(1.5)
                    })
                    .sum()
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl fmt::Display for IncrementLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IncrementLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IncrementLaw::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::UnknownName { kind: "increment law", name: s.to_string() })
    }
}

/// v = u ξ with ξ drawn from `law`.
pub fn sample_increment<R: Rng + ?Sized, const D: usize>(
    law: IncrementLaw,
    u: &FramePoint<D>,
    rng: &mut R,
) -> TangentVector<D> {
    TangentVector::new(u.base, u.frame * law.sample::<R, D>(rng))
}

/// Empirical E‖v‖³_g over `n` draws at the frame `u`.
pub fn third_moment_bound<C: Chart<D> + ?Sized, R: Rng + ?Sized, const D: usize>(
    m: &C,
    law: IncrementLaw,
    u: &FramePoint<D>,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("third_moment_bound needs at least one sample".into()));
    }
    let g = m.metric(&u.base.coords);
    let total: f64 = (0..n)
        .map(|_| {
            let v = sample_increment(law, u, rng).components;
            v.dot(&(g * v)).max(0.0).powf(1.5)
        })
        .sum();
    Ok(total / n as f64)
}

/// Empirical moments of μ_p at one point, with CLT tolerances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointMoments {
    pub point: Vec<f64>,
    pub empirical_mean: Vec<f64>,
    pub mean_tolerance: Vec<f64>,
    /// Row-major d×d second moment about the hypothesised zero mean.
    pub empirical_covariance: Vec<f64>,
    pub expected_covariance: Vec<f64>,
    pub covariance_tolerance: Vec<f64>,
    pub empirical_third_abs_moment: f64,
    pub expected_third_abs_moment: f64,
    pub third_moment_tolerance: f64,
    pub mean_pass: bool,
    pub covariance_pass: bool,
    pub third_moment_pass: bool,
}

impl PointMoments {
    pub fn pass(&self) -> bool {
        self.mean_pass && self.covariance_pass && self.third_moment_pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub law: IncrementLaw,
    pub manifold: String,
    pub sample_count: usize,
    pub points: Vec<PointMoments>,
    pub pass: bool,
}

// floor for tolerances of statistics that have zero sample variance
const TOLERANCE_FLOOR: f64 = 1e-12;

/// Samples `n` increments at each point through the coordinate frame field
/// and checks mean, covariance and third moment.
///
/// Mean and covariance entries must lie within 4 sample standard errors of
/// 0 and g⁻¹(p). Bounded laws must reproduce E‖v‖³ to rounding; the
/// Gaussian third moment must be within 4 standard errors of its exact value.
pub fn validate_law<C: Chart<D> + ?Sized, const D: usize>(
    m: &C,
    law: IncrementLaw,
    points: &[Point<D>],
    n: usize,
    seed: u64,
) -> Result<MomentReport> {
    if n < MIN_VALIDATION_SAMPLES {
        return Err(Error::InsufficientSamples { got: n, min: MIN_VALIDATION_SAMPLES });
    }
    let nf = n as f64;
    let mut out = Vec::with_capacity(points.len());
    for (idx, p) in points.iter().enumerate() {
        let u = FramePoint { base: *p, frame: coordinate_orthonormal_frame(m, p)? };
        let g = m.metric(&p.coords);
        let ginv = inverse_metric(m, &p.coords)?;
        let mut rng = rng::stream(seed, idx as u64);

        let mut sum = Coords::<D>::zeros();
        let mut sum_sq = Coords::<D>::zeros();
        let mut outer = Mat::<D>::zeros();
        let mut outer_sq = Mat::<D>::zeros();
        let (mut third, mut third_sq) = (0.0, 0.0);
        for _ in 0..n {
            let v = sample_increment(law, &u, &mut rng).components;
            sum += v;
            sum_sq += v.component_mul(&v);
            let vv = v * v.transpose();
            outer += vv;
            outer_sq += vv.component_mul(&vv);
            let r3 = v.dot(&(g * v)).max(0.0).powf(1.5);
            third += r3;
            third_sq += r3 * r3;
        }
        let mean = sum / nf;
        let sd = (sum_sq / nf - mean.component_mul(&mean)).map(|x| x.max(0.0).sqrt());
        let mean_tol = sd.map(|s| (4.0 * s / nf.sqrt()).max(TOLERANCE_FLOOR));
        // μ_p is centered by hypothesis, so the covariance is the second
        // moment about zero
        let second = outer / nf;
        let cov = second;
        let cov_sd = (outer_sq / nf - second.component_mul(&second)).map(|x| x.max(0.0).sqrt());
        let cov_tol = cov_sd.map(|s| (4.0 * s / nf.sqrt()).max(TOLERANCE_FLOOR));
        let third_mean = third / nf;
        let expected_third = law.third_abs_moment(D);
        let third_tol = if law.has_bounded_support() && law.is_symmetric() {
            1e-9 * expected_third
        } else {
            let third_sd = (third_sq / nf - third_mean * third_mean).max(0.0).sqrt();
            4.0 * third_sd / nf.sqrt()
        };

        let mean_pass = (0..D).all(|i| mean[i].abs() <= mean_tol[i]);
        let covariance_pass = (0..D).all(|i| (0..D).all(|j| (cov[(i, j)] - ginv[(i, j)]).abs() <= cov_tol[(i, j)]));
        let third_moment_pass = third_mean.is_finite() && (third_mean - expected_third).abs() <= third_tol;
        let row_major = |a: &Mat<D>| a.transpose().as_slice().to_vec();
        out.push(PointMoments {
            point: p.coords.as_slice().to_vec(),
            empirical_mean: mean.as_slice().to_vec(),
            mean_tolerance: mean_tol.as_slice().to_vec(),
            empirical_covariance: row_major(&cov),
            expected_covariance: row_major(&ginv),
            covariance_tolerance: row_major(&cov_tol),
            empirical_third_abs_moment: third_mean,
            expected_third_abs_moment: expected_third,
            third_moment_tolerance: third_tol,
            mean_pass,
            covariance_pass,
            third_moment_pass,
        });
    }
    let pass = out.iter().all(PointMoments::pass);
    Ok(MomentReport { law, manifold: m.name().to_string(), sample_count: n, points: out, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Euclidean, HyperbolicHalfPlane, Sphere};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn atoms_are_centered_with_identity_covariance() {
        for law in [IncrementLaw::Rademacher, IncrementLaw::Skewed] {
            let atoms = law.atoms::<2>().unwrap();
            let total: f64 = atoms.iter().map(|(w, _)| w).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
            let mean: Coords<2> = atoms.iter().map(|(w, x)| x * *w).sum();
            assert_abs_diff_eq!(mean, Coords::<2>::zeros(), epsilon = 1e-15);
            let cov: Mat<2> = atoms.iter().map(|(w, x)| x * x.transpose() * *w).sum();
            assert_abs_diff_eq!(cov, Mat::<2>::identity(), epsilon = 1e-15);
            let third: f64 = atoms.iter().map(|(w, x)| w * x.norm().powi(3)).sum();
            assert_abs_diff_eq!(third, law.third_abs_moment(2), epsilon = 1e-13);
        }
        let skew = IncrementLaw::Skewed.atoms::<1>().unwrap();
        let m3: f64 = skew.iter().map(|(w, x)| w * x[0].powi(3)).sum();
        assert_abs_diff_eq!(m3, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn rademacher_draws_are_axis_steps() {
        let m = Euclidean::default();
        let u = FramePoint::coordinate(&m, Point::xy(0.0, 0.0)).unwrap();
        let mut rng = rng::stream(1, 0);
        let mut counts = std::collections::HashMap::new();
        for _ in 0..40_000 {
            let v = sample_increment(IncrementLaw::Rademacher, &u, &mut rng).components;
            let key = (v[0].round() as i32, v[1].round() as i32);
            assert_abs_diff_eq!(v.norm(), 2f64.sqrt(), epsilon = 1e-15);
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            // binomial(40000, 1/4): sd ≈ 87
            assert!((*c as f64 - 10_000.0).abs() < 450.0, "{counts:?}");
        }
    }

    #[test]
    fn bounded_laws_have_exact_third_moment() {
        let m = Sphere::default();
        let u = FramePoint::rotated(&m, Point::xy(1.0, 2.0), 0.3, false).unwrap();
        for law in [IncrementLaw::SphereUniform, IncrementLaw::Rademacher] {
            let mut rng = rng::stream(3, 0);
            let t = third_moment_bound(&m, law, &u, 1000, &mut rng).unwrap();
            assert_abs_diff_eq!(t, 2f64.powf(1.5), epsilon = 1e-12);
        }
        assert!(third_moment_bound(&m, IncrementLaw::Gaussian, &u, 0, &mut rng::stream(0, 0)).is_err());
    }

    #[test]
    fn gaussian_third_moment_matches_quadrature() {
        // oracle: E R³ for R ~ chi(2), density r e^{-r²/2}, by composite Simpson on [0, 40]
        let n = 400_000;
        let h = 40.0 / n as f64;
        let f = |r: f64| r.powi(4) * (-r * r / 2.0).exp();
        let mut s = f(0.0) + f(40.0);
        for k in 1..n {
            s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = s * h / 3.0;
        assert_abs_diff_eq!(IncrementLaw::Gaussian.third_abs_moment(2), oracle, epsilon = 1e-10);

        let m = Euclidean::default();
        let u = FramePoint::coordinate(&m, Point::xy(0.0, 0.0)).unwrap();
        let emp = third_moment_bound(&m, IncrementLaw::Gaussian, &u, 400_000, &mut rng::stream(11, 0)).unwrap();
        assert!((emp - oracle).abs() / oracle < 0.01, "{emp} vs {oracle}");
    }

    #[test]
    fn frame_pushforward_covariance_is_inverse_metric() {
        let m = HyperbolicHalfPlane::default();
        for angle in [0.0, 0.4, 2.5] {
            let u = FramePoint::rotated(&m, Point::xy(0.3, 0.7), angle, angle > 1.0).unwrap();
            let ginv = m.inverse_metric(&u.base.coords).unwrap();
            assert_abs_diff_eq!(u.frame * u.frame.transpose(), ginv, epsilon = 1e-12);
        }
    }

    #[test]
    fn validation_sample_threshold() {
        let err = validate_law(&Euclidean::default(), IncrementLaw::Gaussian, &[Point::xy(0.0, 0.0)], 1000, 0);
        assert_eq!(err.unwrap_err(), Error::InsufficientSamples { got: 1000, min: MIN_VALIDATION_SAMPLES });
    }

    #[test]
    fn hyperbolic_covariance_is_four_times_identity() {
        for law in [IncrementLaw::Gaussian, IncrementLaw::SphereUniform, IncrementLaw::Rademacher] {
            let r = validate_law(&HyperbolicHalfPlane::default(), law, &[Point::xy(0.0, 2.0)], 200_000, 5).unwrap();
            assert!(r.pass, "{r:?}");
            assert_eq!(r.points[0].expected_covariance, vec![4.0, 0.0, 0.0, 4.0]);
        }
    }

    #[test]
    fn gaussian_covariance_at_equator() {
        let r = validate_law(&Sphere::default(), IncrementLaw::Gaussian, &[Point::xy(FRAC_PI_2, 0.0)], 1_000_000, 9)
            .unwrap();
        assert!(r.pass);
        let c = &r.points[0].empirical_covariance;
        assert!((c[0] - 1.0).abs() < 5e-3 && (c[3] - 1.0).abs() < 5e-3 && c[1].abs() < 5e-3, "{c:?}");
    }

    #[test]
    fn rotation_invariant_laws_ignore_the_frame() {
        // fourth moment of v¹ distinguishes frames only for Rademacher
        let m = Euclidean::default();
        let p = Point::xy(0.0, 0.0);
        let u0 = FramePoint::rotated(&m, p, 0.0, false).unwrap();
        let u1 = FramePoint::rotated(&m, p, std::f64::consts::FRAC_PI_4, false).unwrap();
        let n = 200_000;
        let fourth = |law: IncrementLaw, u: &FramePoint<2>, seed| {
            let mut rng = rng::stream(seed, 0);
            let xs: Vec<f64> = (0..n).map(|_| sample_increment(law, u, &mut rng).components[0].powi(4)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            (mean, (var / n as f64).sqrt())
        };
        for law in [IncrementLaw::Gaussian, IncrementLaw::SphereUniform] {
            let (a, sa) = fourth(law, &u0, 1);
            let (b, sb) = fourth(law, &u1, 2);
            assert!((a - b).abs() < 4.0 * sa.hypot(sb), "{law}: {a} vs {b}");
        }
        let (a, sa) = fourth(IncrementLaw::Rademacher, &u0, 1);
        let (b, _) = fourth(IncrementLaw::Rademacher, &u1, 2);
        assert!((a - 2.0).abs() < 4.0 * sa);
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn law_names_parse() {
        for law in IncrementLaw::ALL {
            assert_eq!(law.name().parse::<IncrementLaw>().unwrap(), law);
        }
        assert!("cauchy".parse::<IncrementLaw>().is_err());
    }
}
