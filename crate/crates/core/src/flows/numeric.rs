use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::Flow;
use crate::error::{Error, Result};
use crate::relay::Relay;

/// Tolerances for the Dormand–Prince 5(4) integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopriOptions {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for DopriOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, min_step: 1e-13, max_step: 0.25 }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are the embedded fourth-order ones
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `ẏ = f(y)` from `y0` over a signed duration `t` with adaptive
/// Dormand–Prince 5(4) steps.
pub fn integrate_dopri<F>(f: F, y0: &DVector<f64>, t: f64, opts: &DopriOptions) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if t == 0.0 {
        return Ok(y0.clone());
    }
    let dir = t.signum();
    let total = t.abs();
    let mut y = y0.clone();
    let mut done = 0.0;
    let mut h = opts.max_step.min(total);
    let mut k0 = f(&y);
    while done < total {
        if total - done < h {
            h = total - done;
        }
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(k0.clone());
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    ys.axpy(dir * h * A[s][j], kj, 1.0);
                }
            }
            k.push(f(&ys));
        }
        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for s in 0..7 {
            let b5 = if s < 6 { A[6][s] } else { 0.0 };
            if b5 != 0.0 {
                y5.axpy(dir * h * b5, &k[s], 1.0);
            }
            if B4[s] != 0.0 {
                y4.axpy(dir * h * B4[s], &k[s], 1.0);
            }
        }
        let mut err = 0.0f64;
        for i in 0..y.len() {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err = err.max(((y5[i] - y4[i]) / sc).abs());
        }
        if err <= 1.0 || h <= opts.min_step {
            if err > 1.0 {
                return Err(Error::IntegrationFailure {
                    t: dir * done,
                    reason: "step size underflow".into(),
                });
            }
            done += h;
            y = y5;
            // FSAL: the seventh stage is f at the new point
            k0 = k.swap_remove(6);
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::IntegrationFailure { t: dir * done, reason: "non-finite state".into() });
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(opts.max_step).max(opts.min_step);
    }
    Ok(y)
}

type Field = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// Flows of user-supplied vector fields `f(·, +1)` and `f(·, -1)`, integrated
/// numerically.
#[derive(Clone)]
pub struct VectorFieldFlow {
    dim: usize,
    plus: Arc<Field>,
    minus: Arc<Field>,
    pub options: DopriOptions,
}

impl fmt::Debug for VectorFieldFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFieldFlow").field("dim", &self.dim).field("options", &self.options).finish()
    }
}

impl VectorFieldFlow {
    pub fn new<P, M>(dim: usize, plus: P, minus: M) -> Self
    where
        P: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        M: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self { dim, plus: Arc::new(plus), minus: Arc::new(minus), options: DopriOptions::default() }
    }

    pub fn with_options(mut self, options: DopriOptions) -> Self {
        self.options = options;
        self
    }
}

impl Flow for VectorFieldFlow {
    fn dim(&self) -> usize {
        self.dim
    }

    fn field(&self, y: &DVector<f64>, u: Relay) -> DVector<f64> {
        match u {
            Relay::Plus => (self.plus)(y),
            Relay::Minus => (self.minus)(y),
        }
    }

    fn advance(&self, y: &DVector<f64>, u: Relay, t: f64) -> Result<DVector<f64>> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: y.len() });
        }
        match u {
            Relay::Plus => integrate_dopri(|x| (self.plus)(x), y, t, &self.options),
            Relay::Minus => integrate_dopri(|x| (self.minus)(x), y, t, &self.options),
        }
    }
}
