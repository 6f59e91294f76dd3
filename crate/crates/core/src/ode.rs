//! Classical fixed-step fourth-order Runge–Kutta.
//!
//! States implement [`OdeState`] componentwise, so a state that embeds
//! another (the frame-bundle state embeds the geodesic state) advances its
//! embedded part with exactly the same floating-point operations.

use crate::error::Result;

pub trait OdeState: Sized {
    /// `self + h * k`.
    fn add_scaled(&self, k: &Self, h: f64) -> Self;

    /// `self + dt/6 * (k1 + 2 k2 + 2 k3 + k4)`.
    fn rk4_combine(&self, k1: &Self, k2: &Self, k3: &Self, k4: &Self, dt: f64) -> Self;
}

pub fn rk4_step<S, F>(state: &S, dt: f64, mut rhs: F) -> Result<S>
where
    S: OdeState,
    F: FnMut(&S) -> Result<S>,
{
    let k1 = rhs(state)?;
    let k2 = rhs(&state.add_scaled(&k1, 0.5 * dt))?;
    let k3 = rhs(&state.add_scaled(&k2, 0.5 * dt))?;
    let k4 = rhs(&state.add_scaled(&k3, dt))?;
    Ok(state.rk4_combine(&k1, &k2, &k3, &k4, dt))
}

impl<const R: usize, const C: usize> OdeState for nalgebra::SMatrix<f64, R, C> {
    fn add_scaled(&self, k: &Self, h: f64) -> Self {
        self + k * h
    }

    fn rk4_combine(&self, k1: &Self, k2: &Self, k3: &Self, k4: &Self, dt: f64) -> Self {
        self + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    }
}
