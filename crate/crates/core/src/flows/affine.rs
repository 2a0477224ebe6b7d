use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::Flow;
use crate::error::{Error, Result};
use crate::relay::Relay;

/// Closed-form flows of `ẍ + 2ζẋ + (1+ζ²)x = (1+ζ²)u` in the `(x, ẋ)` plane.
///
/// `Y_±^t y = A(t) y ± v(t)`; each flow rotates with unit frequency around
/// its equilibrium `(±1, 0)` and expands at rate `-ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineOscillatorFlow {
    pub zeta: f64,
}

impl AffineOscillatorFlow {
    pub fn new(zeta: f64) -> Self {
        Self { zeta }
    }

    /// `A(t) = e^{-ζt} cos t · I - e^{-ζt} sin t · [[-ζ, -1], [1+ζ², ζ]]`.
    pub fn flow_matrix(&self, t: f64) -> Matrix2<f64> {
        let z = self.zeta;
        let e = (-z * t).exp();
        let (s, c) = t.sin_cos();
        let m = Matrix2::new(-z, -1.0, 1.0 + z * z, z);
        Matrix2::identity() * (e * c) - m * (e * s)
    }

    /// `v(t) = e^{-ζt} (-ζ sin t - cos t + e^{ζt}, (1+ζ²) sin t)`.
    pub fn flow_offset(&self, t: f64) -> Vector2<f64> {
        let z = self.zeta;
        let e = (-z * t).exp();
        let (s, c) = t.sin_cos();
        // e^{-ζt} e^{ζt} is folded to 1 to avoid cancellation for large |t|
        Vector2::new(1.0 - e * (z * s + c), e * (1.0 + z * z) * s)
    }

    /// `Y_u^t y = A(t) y + u v(t)`.
    pub fn apply(&self, y: &Vector2<f64>, u: Relay, t: f64) -> Vector2<f64> {
        self.flow_matrix(t) * y + self.flow_offset(t) * u.value()
    }

    /// `f(y, u) = (y₂, -2ζy₂ - (1+ζ²)y₁ + (1+ζ²)u)`.
    pub fn vector_field(&self, y: &Vector2<f64>, u: Relay) -> Vector2<f64> {
        let z = self.zeta;
        let w = 1.0 + z * z;
        Vector2::new(y[1], -2.0 * z * y[1] - w * y[0] + w * u.value())
    }

    /// Linear part of the vector field, `[[0, 1], [-(1+ζ²), -2ζ]]`.
    pub fn generator(&self) -> Matrix2<f64> {
        let z = self.zeta;
        Matrix2::new(0.0, 1.0, -(1.0 + z * z), -2.0 * z)
    }

    /// Operator 2-norm of the generator, a Lipschitz constant of `f(·, u)`.
    pub fn lipschitz(&self) -> f64 {
        self.generator().singular_values().max()
    }
}

pub(crate) fn as_vec2(y: &DVector<f64>) -> Result<Vector2<f64>> {
    if y.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: y.len() });
    }
    Ok(Vector2::new(y[0], y[1]))
}

pub(crate) fn to_dvec(y: Vector2<f64>) -> DVector<f64> {
    DVector::from_column_slice(y.as_slice())
}

impl Flow for AffineOscillatorFlow {
    fn dim(&self) -> usize {
        2
    }

    fn field(&self, y: &DVector<f64>, u: Relay) -> DVector<f64> {
        to_dvec(self.vector_field(&Vector2::new(y[0], y[1]), u))
    }

    fn advance(&self, y: &DVector<f64>, u: Relay, t: f64) -> Result<DVector<f64>> {
        Ok(to_dvec(self.apply(&as_vec2(y)?, u, t)))
    }

    fn jacobian(&self, _y: &DVector<f64>, _u: Relay, t: f64) -> Result<DMatrix<f64>> {
        let a = self.flow_matrix(t);
        Ok(DMatrix::from_column_slice(2, 2, a.as_slice()))
    }

    fn is_exact(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Scaling-and-squaring Taylor exponential, independent of the closed form.
    fn expm(m: Matrix2<f64>) -> Matrix2<f64> {
        let norm = m.abs().max();
        let s = (norm.log2().ceil().max(0.0) as i32) + 4;
        let scaled = m / 2f64.powi(s);
        let mut term = Matrix2::identity();
        let mut sum = Matrix2::identity();
        for k in 1..30 {
            term = term * scaled / k as f64;
            sum += term;
        }
        for _ in 0..s {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn identity_at_zero() {
        let fl = AffineOscillatorFlow::new(-0.1);
        assert_eq!(fl.flow_matrix(0.0), Matrix2::identity());
        assert_eq!(fl.flow_offset(0.0), Vector2::zeros());
    }

    #[test]
    fn half_turn_is_scalar() {
        let fl = AffineOscillatorFlow::new(-0.1);
        let a = fl.flow_matrix(PI);
        let expected = Matrix2::identity() * -(0.1 * PI).exp();
        assert!((a - expected).abs().max() < 1e-12);
    }

    #[test]
    fn matches_matrix_exponential() {
        let fl = AffineOscillatorFlow::new(-0.1);
        let a = fl.flow_matrix(1.0);
        let oracle = expm(fl.generator());
        assert!((a - oracle).abs().max() < 1e-10);
    }

    #[test]
    fn equilibria_are_fixed() {
        let fl = AffineOscillatorFlow::new(-0.1);
        for &t in &[-5.0, -0.3, 0.7, 4.2, 6.0] {
            let p = fl.apply(&Vector2::new(1.0, 0.0), Relay::Plus, t);
            let m = fl.apply(&Vector2::new(-1.0, 0.0), Relay::Minus, t);
            assert!((p - Vector2::new(1.0, 0.0)).norm() < 1e-12);
            assert!((m - Vector2::new(-1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn reflection_symmetry() {
        let fl = AffineOscillatorFlow::new(-0.1);
        let y = Vector2::new(0.3, -1.2);
        for &t in &[-2.0, 0.5, 3.3] {
            let lhs = fl.apply(&y, Relay::Minus, t);
            let rhs = -fl.apply(&-y, Relay::Plus, t);
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn backward_offset_identity() {
        let fl = AffineOscillatorFlow::new(-0.1);
        for &t in &[0.4, 2.0, 5.5] {
            let lhs = fl.flow_offset(-t);
            let rhs = -(fl.flow_matrix(-t) * fl.flow_offset(t));
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn determinant_follows_trace() {
        let fl = AffineOscillatorFlow::new(-0.1);
        for &t in &[-3.0, 0.9, 4.2, 6.2] {
            let det = fl.flow_matrix(t).determinant();
            assert!((det - (0.2 * t).exp()).abs() < 1e-10 * det.abs().max(1.0));
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let fl = AffineOscillatorFlow::new(-0.1);
        let y = DVector::from_vec(vec![0.4, 0.9]);
        let t = 2.3;
        let h = 1e-6;
        let a = fl.jacobian(&y, Relay::Plus, t).unwrap();
        for j in 0..2 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            let col = (fl.advance(&yp, Relay::Plus, t).unwrap()
                - fl.advance(&ym, Relay::Plus, t).unwrap())
                / (2.0 * h);
            let rel = (col - a.column(j)).norm() / a.column(j).norm();
            assert!(rel < 1e-6, "column {j}: {rel}");
        }
    }
}
