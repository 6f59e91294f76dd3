//! Test functions with known Laplacians, per catalog manifold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FramePoint;
use crate::manifold::Coords;

/// Smooth functions on the 2-d catalog manifolds, written in chart
/// coordinates (x¹, x²) = (x, y) or (θ, φ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFunction {
    X1Squared,
    X1X2,
    SinX1,
    CosTheta,
    /// sin²θ cos 2φ, a degree-2 spherical harmonic.
    Sin2ThetaCos2Phi,
    LogY,
    Y,
    CosX1,
    CosX1CosX2,
}

impl BaseFunction {
    pub const ALL: [BaseFunction; 9] = [
        BaseFunction::X1Squared,
        BaseFunction::X1X2,
        BaseFunction::SinX1,
        BaseFunction::CosTheta,
        BaseFunction::Sin2ThetaCos2Phi,
        BaseFunction::LogY,
        BaseFunction::Y,
        BaseFunction::CosX1,
        BaseFunction::CosX1CosX2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BaseFunction::X1Squared => "x1_sq",
            BaseFunction::X1X2 => "x1x2",
            BaseFunction::SinX1 => "sin_x1",
            BaseFunction::CosTheta => "cos_theta",
            BaseFunction::Sin2ThetaCos2Phi => "sin2_theta_cos2_phi",
            BaseFunction::LogY => "log_y",
            BaseFunction::Y => "y",
            BaseFunction::CosX1 => "cos_x1",
            BaseFunction::CosX1CosX2 => "cos_x1_cos_x2",
        }
    }

    /// The catalog manifold this function is defined for.
    pub fn manifold(&self) -> &'static str {
        match self {
            BaseFunction::X1Squared | BaseFunction::X1X2 | BaseFunction::SinX1 => "euclidean",
            BaseFunction::CosTheta | BaseFunction::Sin2ThetaCos2Phi => "sphere",
            BaseFunction::LogY | BaseFunction::Y => "hyperbolic",
            BaseFunction::CosX1 | BaseFunction::CosX1CosX2 => "torus",
        }
    }

    pub fn catalog_for(manifold: &str) -> Vec<BaseFunction> {
        Self::ALL.into_iter().filter(|f| f.manifold() == manifold).collect()
    }

    /// Polynomials of degree ≤ 2 on flat space: every third derivative vanishes.
    pub fn is_flat_quadratic(&self) -> bool {
        matches!(self, BaseFunction::X1Squared | BaseFunction::X1X2)
    }

    pub fn support(&self) -> &'static str {
        match self {
            BaseFunction::X1Squared | BaseFunction::X1X2 => "unbounded; bounded on the experiment box",
            BaseFunction::LogY | BaseFunction::Y => "smooth on y > 0; bounded on the experiment box",
            _ => "globally bounded with bounded derivatives",
        }
    }

    #[inline]
    pub fn eval(&self, x: &Coords<2>) -> f64 {
        let (a, b) = (x[0], x[1]);
        match self {
            BaseFunction::X1Squared => a * a,
            BaseFunction::X1X2 => a * b,
            BaseFunction::SinX1 => a.sin(),
            BaseFunction::CosTheta => a.cos(),
            BaseFunction::Sin2ThetaCos2Phi => a.sin().powi(2) * (2.0 * b).cos(),
            BaseFunction::LogY => b.ln(),
            BaseFunction::Y => b,
            BaseFunction::CosX1 => a.cos(),
            BaseFunction::CosX1CosX2 => a.cos() * b.cos(),
        }
    }

    /// Closed-form Laplace–Beltrami Δ_M f at x on the function's manifold.
    pub fn laplacian(&self, x: &Coords<2>) -> f64 {
        let (a, b) = (x[0], x[1]);
        match self {
            BaseFunction::X1Squared => 2.0,
            BaseFunction::X1X2 => 0.0,
            BaseFunction::SinX1 => -a.sin(),
            BaseFunction::CosTheta => -2.0 * a.cos(),
            BaseFunction::Sin2ThetaCos2Phi => -6.0 * a.sin().powi(2) * (2.0 * b).cos(),
            // y²(∂²_x + ∂²_y) log y = y² · (−1/y²)
            BaseFunction::LogY => -1.0,
            BaseFunction::Y => 0.0,
            BaseFunction::CosX1 => -a.cos(),
            BaseFunction::CosX1CosX2 => -2.0 * a.cos() * b.cos(),
        }
    }

    /// λ with Δ_M f = −λ f, for eigenfunctions.
    pub fn eigenvalue(&self) -> Option<f64> {
        match self {
            BaseFunction::SinX1 | BaseFunction::CosX1 => Some(1.0),
            BaseFunction::CosTheta | BaseFunction::CosX1CosX2 => Some(2.0),
            BaseFunction::Sin2ThetaCos2Phi => Some(6.0),
            _ => None,
        }
    }
}

impl fmt::Display for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownName { kind: "test function", name: s.to_string() })
    }
}

/// Functions on O(M).
#[derive(Debug, Clone, PartialEq)]
pub enum FrameFunction {
    /// f ∘ π.
    Base(BaseFunction),
    /// (ue_vector)^component, zero-based indices.
    FrameEntry { vector: usize, component: usize },
    /// Σ c_k f_k.
    Combination(Vec<(f64, FrameFunction)>),
}

impl FrameFunction {
    pub fn eval(&self, u: &FramePoint<2>) -> f64 {
        match self {
            FrameFunction::Base(f) => f.eval(&u.base.coords),
            FrameFunction::FrameEntry { vector, component } => u.frame[(*component, *vector)],
            FrameFunction::Combination(terms) => terms.iter().map(|(c, f)| c * f.eval(u)).sum(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            FrameFunction::Base(f) => f.name().to_string(),
            FrameFunction::FrameEntry { vector, component } => format!("frame_{}{}", vector + 1, component + 1),
            FrameFunction::Combination(terms) => {
                terms.iter().map(|(c, f)| format!("{c}*{}", f.name())).collect::<Vec<_>>().join("+")
            }
        }
    }

    pub fn base(&self) -> Option<BaseFunction> {
        match self {
            FrameFunction::Base(f) => Some(*f),
            _ => None,
        }
    }
}

impl FromStr for FrameFunction {
    type Err = Error;

    /// A base-function name, or `frame_ij` for (ue_i)^j with one-based i, j.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("frame_") {
            let digits: Vec<usize> = rest.chars().filter_map(|c| c.to_digit(10).map(|d| d as usize)).collect();
            if rest.len() == 2 && digits.len() == 2 && digits.iter().all(|d| (1..=2).contains(d)) {
                return Ok(FrameFunction::FrameEntry { vector: digits[0] - 1, component: digits[1] - 1 });
            }
            return Err(Error::UnknownName { kind: "test function", name: s.to_string() });
        }
        s.parse().map(FrameFunction::Base)
    }
}
