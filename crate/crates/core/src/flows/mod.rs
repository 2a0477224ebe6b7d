//! The two flows `Y+` and `Y-` between which a relay system switches.
//!
//! [`AffineOscillatorFlow`] gives the closed-form affine flows of the
//! rescaled unstable oscillator; [`VectorFieldFlow`] integrates arbitrary
//! vector fields with an adaptive Dormand–Prince 5(4) scheme.

mod affine;
mod numeric;

pub use affine::AffineOscillatorFlow;
pub(crate) use affine::to_dvec;
pub use numeric::{integrate_dopri, DopriOptions, VectorFieldFlow};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::relay::Relay;

/// A pair of flows `Y_u^t`, `u = ±1`, generated by `ẏ = f(y, u)`.
pub trait Flow: Send + Sync {
    /// Dimension of the continuous state.
    fn dim(&self) -> usize;

    /// Vector field `f(y, u)`.
    fn field(&self, y: &DVector<f64>, u: Relay) -> DVector<f64>;

    /// `Y_u^t y`; negative `t` flows backwards.
    fn advance(&self, y: &DVector<f64>, u: Relay, t: f64) -> Result<DVector<f64>>;

    /// `∂_y Y_u^t y`. The default uses central differences of [`Flow::advance`].
    fn jacobian(&self, y: &DVector<f64>, u: Relay, t: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * y[j].abs().max(1.0);
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            let col = (self.advance(&yp, u, t)? - self.advance(&ym, u, t)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        Ok(jac)
    }

    /// True when [`Flow::advance`] is exact up to rounding.
    fn is_exact(&self) -> bool {
        false
    }

    /// Largest time step between samples when monitoring a switching signal.
    fn monitor_step(&self) -> f64 {
        0.01
    }
}

/// Swaps the roles of `Y+` and `Y-`; used to build mirrored collision contexts.
pub struct SwappedFlow<F: ?Sized>(pub std::sync::Arc<F>);

impl<F: Flow + ?Sized> Flow for SwappedFlow<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn field(&self, y: &DVector<f64>, u: Relay) -> DVector<f64> {
        self.0.field(y, u.flip())
    }
    fn advance(&self, y: &DVector<f64>, u: Relay, t: f64) -> Result<DVector<f64>> {
        self.0.advance(y, u.flip(), t)
    }
    fn jacobian(&self, y: &DVector<f64>, u: Relay, t: f64) -> Result<DMatrix<f64>> {
        self.0.jacobian(y, u.flip(), t)
    }
    fn is_exact(&self) -> bool {
        self.0.is_exact()
    }
    fn monitor_step(&self) -> f64 {
        self.0.monitor_step()
    }
}
