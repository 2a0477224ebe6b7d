use nalgebra::{DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{newton, NewtonOptions, NewtonReport, ResidualProblem};
use crate::error::{Error, Result};
use crate::oscillator::{df_minus_at, OscillatorParams};
use crate::relay::Relay;

/// A parameter that can be freed in a fixed-point problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    Tau,
    Alpha,
    Epsilon,
}

impl Param {
    pub fn get(self, p: &OscillatorParams) -> f64 {
        match self {
            Param::Tau => p.tau,
            Param::Alpha => p.alpha,
            Param::Epsilon => p.epsilon,
        }
    }

    pub fn set(self, p: &mut OscillatorParams, v: f64) {
        match self {
            Param::Tau => p.tau = v,
            Param::Alpha => p.alpha = v,
            Param::Epsilon => p.epsilon = v,
        }
    }
}

/// `(y₀ + Y+^{τ+t₀} y₀, ε - n·Y-^{t₀} y₀)`: zero at fixed points of `F-`.
pub fn fixed_point_residual(y0: &Vector2<f64>, t0: f64, params: &OscillatorParams) -> Vector3<f64> {
    let flow = params.flow();
    let w = flow.apply(y0, Relay::Plus, params.tau + t0);
    let z = flow.apply(y0, Relay::Minus, t0);
    Vector3::new(y0[0] + w[0], y0[1] + w[1], params.epsilon - params.normal().dot(&z))
}

/// Fixed points of `F-` in the unknowns `(y₀, t₀)`, optionally with one free parameter appended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointProblem {
    pub params: OscillatorParams,
    pub free: Option<Param>,
}

impl FixedPointProblem {
    pub fn params_at(&self, z: &DVector<f64>) -> OscillatorParams {
        let mut p = self.params;
        if let Some(free) = self.free {
            free.set(&mut p, z[3]);
        }
        p
    }
}

impl ResidualProblem for FixedPointProblem {
    fn n_unknowns(&self) -> usize {
        3 + usize::from(self.free.is_some())
    }

    fn n_equations(&self) -> usize {
        3
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.n_unknowns() {
            return Err(Error::DimensionMismatch { expected: self.n_unknowns(), got: z.len() });
        }
        let r = fixed_point_residual(&Vector2::new(z[0], z[1]), z[2], &self.params_at(z));
        Ok(DVector::from_column_slice(r.as_slice()))
    }

    fn parameter_slots(&self) -> Vec<usize> {
        if self.free.is_some() {
            vec![3]
        } else {
            Vec::new()
        }
    }
}

/// Newton solve for the fixed point `(y₀, t₀)` of `F-` at fixed parameters.
pub fn solve_fixed_point(params: &OscillatorParams, y0: Vector2<f64>, t0: f64) -> Result<NewtonReport> {
    let p = FixedPointProblem { params: *params, free: None };
    newton(&p, &DVector::from_vec(vec![y0[0], y0[1], t0]), &NewtonOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsResidual {
    /// Fixed-point residual followed by `det DF- - 1`.
    pub values: [f64; 4],
    pub trace: f64,
    pub det: f64,
    /// `|tr DF-| < 2`: the unit-determinant eigenvalues form a complex pair.
    pub guard: bool,
}

pub fn ns_residual(y0: &Vector2<f64>, t0: f64, params: &OscillatorParams) -> NsResidual {
    let fp = fixed_point_residual(y0, t0, params);
    let df = df_minus_at(params, y0, t0);
    let (trace, det) = (df.trace(), df.determinant());
    NsResidual { values: [fp[0], fp[1], fp[2], det - 1.0], trace, det, guard: trace.abs() < 2.0 }
}

/// Neimark–Sacker points of `F-` in the unknowns `(y₀, t₀, τ, α)` at fixed `(ζ, ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsProblem {
    pub zeta: f64,
    pub epsilon: f64,
}

impl NsProblem {
    pub fn params_at(&self, z: &DVector<f64>) -> OscillatorParams {
        OscillatorParams { zeta: self.zeta, tau: z[3], epsilon: self.epsilon, alpha: z[4] }
    }

    pub fn evaluate(&self, z: &DVector<f64>) -> NsResidual {
        ns_residual(&Vector2::new(z[0], z[1]), z[2], &self.params_at(z))
    }
}

impl ResidualProblem for NsProblem {
    fn n_unknowns(&self) -> usize {
        5
    }

    fn n_equations(&self) -> usize {
        4
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != 5 {
            return Err(Error::DimensionMismatch { expected: 5, got: z.len() });
        }
        Ok(DVector::from_column_slice(&self.evaluate(z).values))
    }

    fn parameter_slots(&self) -> Vec<usize> {
        vec![3, 4]
    }

    fn admissible(&self, z: &DVector<f64>) -> Result<()> {
        let r = self.evaluate(z);
        if r.guard {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("real eigenvalues on the NS curve (trace {})", r.trace)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::{collision_point, OscillatorParams};

    #[test]
    fn collision_orbit_has_zero_residual() {
        let p = OscillatorParams::on_surface(-0.1, 4.2, -0.44).unwrap();
        let y = collision_point(-0.1, 4.2).unwrap();
        assert!(fixed_point_residual(&y, 0.0, &p).norm() < 1e-12);
    }

    #[test]
    fn nudged_epsilon_converges_from_the_collision_point() {
        let surface = OscillatorParams::on_surface(-0.1, 4.2, -0.44).unwrap();
        let y = collision_point(-0.1, 4.2).unwrap();
        let p = OscillatorParams { epsilon: surface.epsilon + 1e-3, ..surface };
        let rep = solve_fixed_point(&p, y, 0.0).unwrap();
        assert!(rep.residual < 1e-10);
        assert!(rep.z[2] != 0.0);
    }

    #[test]
    fn residual_grows_linearly_off_the_solution() {
        let p = OscillatorParams::on_surface(-0.1, 4.2, -0.44).unwrap();
        let y = collision_point(-0.1, 4.2).unwrap();
        let d = Vector2::new(0.3, -0.7);
        let r1 = fixed_point_residual(&(y + d * 1e-4), 0.0, &p).norm();
        let r2 = fixed_point_residual(&(y + d * 2e-4), 0.0, &p).norm();
        assert!(r1 > 1e-6);
        assert!((r2 / r1 - 2.0).abs() < 1e-3);
    }

    #[test]
    fn ns_guard_rejects_real_pairs() {
        let p = OscillatorParams::on_surface(-0.1, 4.2, -0.44).unwrap();
        let y = collision_point(-0.1, 4.2).unwrap();
        let r = ns_residual(&y, 0.0, &p);
        assert_eq!(r.guard, r.trace.abs() < 2.0);
        assert!((r.values[3] - (r.det - 1.0)).abs() == 0.0);
    }
}
