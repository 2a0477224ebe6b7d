//! Newton and pseudo-arclength continuation, with the residual systems of
//! the oscillator: fixed points of `F-`, Neimark–Sacker points and
//! colliding invariant curves in Fourier collocation form.

mod export;
mod fixed_point;
pub mod fourier;
mod invariant_curve;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use export::{read_branch_jsonl, write_branch_jsonl, write_curve_csv, CurveSampleRow};
pub use fixed_point::{
    fixed_point_residual, ns_residual, solve_fixed_point, FixedPointProblem, NsProblem, NsResidual, Param,
};
pub use fourier::FourierCurve;
pub use invariant_curve::{
    collision_closure, continue_colliding_family, fourier_error_estimate, invariance_defect,
    invariant_curve_residual, seed_colliding_family, spectral_tail, CollidingFamily, FamilyOptions,
    FamilyProblem, InvariantCurveProblem,
};

/// Forward-difference step for Jacobians without an analytic form.
pub const FD_STEP: f64 = 1e-7;

/// A system `G(z) = 0`.
///
/// Square systems are solved by [`newton`]; systems with one equation fewer
/// than unknowns define curves for [`continue_branch`].
pub trait ResidualProblem: Sync {
    fn n_unknowns(&self) -> usize;

    fn n_equations(&self) -> usize {
        self.n_unknowns()
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>>;

    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        fd_jacobian(|x| self.residual(x), z, FD_STEP)
    }

    /// Indices of the entries of `z` reported as branch parameters.
    fn parameter_slots(&self) -> Vec<usize> {
        Vec::new()
    }

    /// Discretization error of a solution; `0` for exact systems.
    fn error_estimate(&self, _z: &DVector<f64>) -> f64 {
        0.0
    }

    /// Rejects solutions outside the problem's regular regime.
    fn admissible(&self, _z: &DVector<f64>) -> Result<()> {
        Ok(())
    }
}

/// Forward-difference Jacobian, columns evaluated in parallel.
pub fn fd_jacobian<F>(g: F, z: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let g0 = g(z)?;
    let cols: Vec<DVector<f64>> = (0..z.len())
        .into_par_iter()
        .map(|j| {
            let h = step * z[j].abs().max(1.0);
            let mut zp = z.clone();
            zp[j] += h;
            Ok((g(&zp)? - &g0) / h)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Closure-backed square or underdetermined problem.
pub struct FnProblem<G> {
    pub n_unknowns: usize,
    pub n_equations: usize,
    pub g: G,
}

impl<G> ResidualProblem for FnProblem<G>
where
    G: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }
    fn n_equations(&self) -> usize {
        self.n_equations
    }
    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        (self.g)(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn solve_linear(j: DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = j.lu();
    let u = lu.u();
    let diag = u.diagonal().map(f64::abs);
    let (lo, hi) = (diag.min(), diag.max());
    if !(hi > 0.0) || lo <= 1e-14 * hi {
        return Err(Error::SingularJacobian);
    }
    let dz = lu.solve(r).ok_or(Error::SingularJacobian)?;
    if dz.iter().all(|v| v.is_finite()) {
        Ok(dz)
    } else {
        Err(Error::SingularJacobian)
    }
}

/// Newton iteration for a square system, stopping at `|G(z)| <= tol`.
pub fn newton<P: ResidualProblem + ?Sized>(problem: &P, z0: &DVector<f64>, opts: &NewtonOptions) -> Result<NewtonReport> {
    if problem.n_equations() != problem.n_unknowns() {
        return Err(Error::InvalidParameter(format!(
            "Newton needs a square system, got {} equations in {} unknowns",
            problem.n_equations(),
            problem.n_unknowns()
        )));
    }
    if z0.len() != problem.n_unknowns() {
        return Err(Error::DimensionMismatch { expected: problem.n_unknowns(), got: z0.len() });
    }
    let mut z = z0.clone();
    let mut r = problem.residual(&z)?;
    let mut norm = r.norm();
    for it in 0..=opts.max_iter {
        if norm <= opts.tol {
            return Ok(NewtonReport { z, iterations: it, residual: norm });
        }
        if it == opts.max_iter || !norm.is_finite() {
            break;
        }
        let dz = solve_linear(problem.jacobian(&z)?, &r)?;
        z -= dz;
        r = problem.residual(&z)?;
        norm = r.norm();
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: norm })
}

/// Square extension of an underdetermined problem by `pin(z) = 0`.
struct Extended<'a, P: ?Sized, Q> {
    base: &'a P,
    extra: Q,
}

impl<P, Q> ResidualProblem for Extended<'_, P, Q>
where
    P: ResidualProblem + ?Sized,
    Q: Fn(&DVector<f64>) -> (f64, DVector<f64>) + Sync,
{
    fn n_unknowns(&self) -> usize {
        self.base.n_unknowns()
    }
    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.base.residual(z)?;
        let (e, _) = (self.extra)(z);
        Ok(DVector::from_iterator(g.len() + 1, g.iter().copied().chain(std::iter::once(e))))
    }
    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let j = self.base.jacobian(z)?;
        let (_, row) = (self.extra)(z);
        let rows = j.nrows();
        Ok(j.insert_row(rows, 0.0).set_last_row(&row))
    }
}

trait SetLastRow {
    fn set_last_row(self, row: &DVector<f64>) -> Self;
}

impl SetLastRow for DMatrix<f64> {
    fn set_last_row(mut self, row: &DVector<f64>) -> Self {
        let last = self.nrows() - 1;
        for (k, v) in row.iter().enumerate() {
            self[(last, k)] = *v;
        }
        self
    }
}

/// Solves an underdetermined problem with entry `slot` of `z` held at its value in `z0`.
pub fn newton_pinned<P: ResidualProblem + ?Sized>(
    problem: &P,
    z0: &DVector<f64>,
    slot: usize,
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    if problem.n_equations() + 1 != problem.n_unknowns() {
        return Err(Error::InvalidParameter("pinning needs exactly one free direction".into()));
    }
    let value = z0[slot];
    let n = problem.n_unknowns();
    let pinned = Extended {
        base: problem,
        extra: move |z: &DVector<f64>| {
            let mut row = DVector::zeros(n);
            row[slot] = 1.0;
            (z[slot] - value, row)
        },
    };
    newton(&pinned, z0, opts)
}

/// Step-size control and stopping rules for [`continue_branch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub max_points: usize,
    pub newton: NewtonOptions,
    /// Steps converging within this many iterations double the next step.
    pub easy_iterations: usize,
    /// `(slot, lo, hi)`: the branch stops when `z[slot]` leaves `[lo, hi]`.
    pub bounds: Vec<(usize, f64, f64)>,
    /// `(slot, sign)`: the initial tangent is oriented so that `sign · dz[slot] > 0`.
    pub direction: Option<(usize, f64)>,
    /// The branch stops once a point's error estimate exceeds this.
    pub max_error: Option<f64>,
    /// Accepted steps must have length within `step · (1 ± step_tolerance)`.
    pub step_tolerance: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-2,
            min: 1e-6,
            max: 0.1,
            max_points: 200,
            newton: NewtonOptions { tol: 1e-10, max_iter: 8 },
            easy_iterations: 3,
            bounds: Vec::new(),
            direction: None,
            max_error: None,
            step_tolerance: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub z: Vec<f64>,
    pub parameters: Vec<f64>,
    /// Arclength step that produced the point (`0` for the first one).
    pub step: f64,
    pub residual: f64,
    pub error_estimate: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    MaxPoints,
    Bound { slot: usize, value: f64 },
    StepFloor { last_error: String },
    Breakup { estimate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn z(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.points[i].z)
    }

    /// The breakup error, if the branch stopped at one.
    pub fn breakup(&self) -> Option<Error> {
        match self.termination {
            Termination::Breakup { estimate } => Some(Error::BreakupDetected { estimate }),
            _ => None,
        }
    }
}

/// Unit null vector of the `(n-1) × n` Jacobian.
fn null_tangent(j: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = j.ncols();
    let padded = j.clone().insert_row(n - 1, 0.0);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.ok_or(Error::SingularJacobian)?;
    let (k, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| {
        if s < acc.1 {
            (i, s)
        } else {
            acc
        }
    });
    let t = vt.row(k).transpose();
    if t.len() != n {
        return Err(Error::SingularJacobian);
    }
    Ok(t.normalize())
}

fn make_point<P: ResidualProblem + ?Sized>(problem: &P, z: &DVector<f64>, step: f64, residual: f64, iterations: usize) -> BranchPoint {
    BranchPoint {
        z: z.iter().copied().collect(),
        parameters: problem.parameter_slots().iter().map(|&s| z[s]).collect(),
        step,
        residual,
        error_estimate: problem.error_estimate(z),
        iterations,
    }
}

/// Pseudo-arclength continuation of the solution curve of `problem` through `z0`.
///
/// Newton failures halve the step down to `policy.min`; steps that converge
/// within `policy.easy_iterations` double it up to `policy.max`.
pub fn continue_branch<P: ResidualProblem + ?Sized>(problem: &P, z0: &DVector<f64>, policy: &StepPolicy) -> Result<Branch> {
    let n = problem.n_unknowns();
    if problem.n_equations() + 1 != n {
        return Err(Error::InvalidParameter("continuation needs one more unknown than equations".into()));
    }
    let r0 = problem.residual(z0).map_err(|e| Error::InitialPointFailed(e.to_string()))?.norm();
    if !(r0 <= policy.newton.tol.max(1e-9)) {
        return Err(Error::InitialPointFailed(format!("residual {r0:e}")));
    }
    problem.admissible(z0).map_err(|e| Error::InitialPointFailed(e.to_string()))?;
    let mut tangent = null_tangent(&problem.jacobian(z0)?)?;
    if let Some((slot, sign)) = policy.direction {
        if tangent[slot] * sign < 0.0 {
            tangent = -tangent;
        }
    }
    let mut points = vec![make_point(problem, z0, 0.0, r0, 0)];
    let mut z = z0.clone();
    let mut h = policy.initial;
    let mut last_error = String::new();
    loop {
        if points.len() >= policy.max_points {
            return Ok(Branch { points, termination: Termination::MaxPoints });
        }
        if h < policy.min {
            return Ok(Branch { points, termination: Termination::StepFloor { last_error } });
        }
        let predicted = &z + &tangent * h;
        let (zp, tp) = (z.clone(), tangent.clone());
        let arclength = Extended {
            base: problem,
            extra: |x: &DVector<f64>| (tp.dot(&(x - &zp)) - h, tp.clone()),
        };
        let attempt = newton(&arclength, &predicted, &policy.newton).and_then(|rep| {
            problem.admissible(&rep.z)?;
            let len = (&rep.z - &z).norm();
            if (len - h).abs() > policy.step_tolerance * h {
                return Err(Error::InvalidParameter(format!("step length {len:e} for requested {h:e}")));
            }
            Ok(rep)
        });
        let rep = match attempt {
            Ok(rep) => rep,
            Err(e) => {
                last_error = e.to_string();
                h *= 0.5;
                continue;
            }
        };
        let j = problem.jacobian(&rep.z)?;
        let aug = j.clone().insert_row(n - 1, 0.0).set_last_row(&tangent);
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let next_tangent = match solve_linear(aug, &rhs) {
            Ok(t) => t.normalize(),
            Err(_) => {
                let t = null_tangent(&j)?;
                if t.dot(&tangent) < 0.0 {
                    -t
                } else {
                    t
                }
            }
        };
        let point = make_point(problem, &rep.z, h, rep.residual, rep.iterations);
        let estimate = point.error_estimate;
        points.push(point);
        if let Some(max) = policy.max_error {
            if estimate > max {
                return Ok(Branch { points, termination: Termination::Breakup { estimate } });
            }
        }
        for &(slot, lo, hi) in &policy.bounds {
            let v = rep.z[slot];
            if v < lo || v > hi {
                return Ok(Branch { points, termination: Termination::Bound { slot, value: v } });
            }
        }
        z = rep.z;
        tangent = next_tangent;
        if rep.iterations <= policy.easy_iterations {
            h = (2.0 * h).min(policy.max);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear {
        m: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl ResidualProblem for Linear {
        fn n_unknowns(&self) -> usize {
            self.b.len()
        }
        fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(&self.m * z - &self.b)
        }
        fn jacobian(&self, _z: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(self.m.clone())
        }
    }

    #[test]
    fn linear_problem_converges_in_one_step() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let p = Linear { m: m.clone(), b: b.clone() };
        let rep = newton(&p, &DVector::zeros(3), &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((&m * &rep.z - &b).norm() < 1e-10);
        // the difference-quotient Jacobian still converges, one step later
        let fd = FnProblem { n_unknowns: 3, n_equations: 3, g: |z: &DVector<f64>| p.residual(z) };
        assert!(newton(&fd, &DVector::zeros(3), &NewtonOptions::default()).unwrap().iterations <= 2);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let p = FnProblem {
            n_unknowns: 2,
            n_equations: 2,
            g: |z: &DVector<f64>| Ok(DVector::from_vec(vec![z[0] + z[1] - 1.0, 2.0 * z[0] + 2.0 * z[1] - 3.0])),
        };
        let r = newton(&p, &DVector::zeros(2), &NewtonOptions::default());
        assert_eq!(r, Err(Error::SingularJacobian));
    }

    #[test]
    fn circle_branch_has_controlled_steps() {
        let p = FnProblem { n_unknowns: 2, n_equations: 1, g: |z: &DVector<f64>| Ok(DVector::from_vec(vec![z.norm_squared() - 1.0])) };
        let policy = StepPolicy { initial: 0.05, max: 0.2, max_points: 40, direction: Some((1, 1.0)), ..Default::default() };
        let b = continue_branch(&p, &DVector::from_vec(vec![1.0, 0.0]), &policy).unwrap();
        assert_eq!(b.termination, Termination::MaxPoints);
        assert!(b.points[1].z[1] > 0.0);
        for w in b.points.windows(2) {
            let d = (DVector::from_column_slice(&w[1].z) - DVector::from_column_slice(&w[0].z)).norm();
            assert!((d - w[1].step).abs() <= 0.3 * w[1].step);
            assert!(w[1].residual < 1e-9);
        }
        // the branch goes round the fold in z[0] at (0, 1)
        assert!(b.points.iter().any(|p| p.z[0] < -0.5));
    }

    #[test]
    fn forced_failures_end_at_the_step_floor() {
        let p = FnProblem {
            n_unknowns: 2,
            n_equations: 1,
            g: |z: &DVector<f64>| Ok(DVector::from_vec(vec![(z[0] * 3.0).sin() + z[1].powi(3) - z[1]])),
        };
        let mut policy = StepPolicy { initial: 0.5, min: 1e-3, ..Default::default() };
        policy.newton.max_iter = 0;
        let b = continue_branch(&p, &DVector::from_vec(vec![0.0, 0.0]), &policy).unwrap();
        assert_eq!(b.len(), 1);
        assert!(matches!(b.termination, Termination::StepFloor { .. }));
    }

    #[test]
    fn unconverged_start_is_rejected() {
        let p = FnProblem { n_unknowns: 2, n_equations: 1, g: |z: &DVector<f64>| Ok(DVector::from_vec(vec![z.norm_squared() - 1.0])) };
        let r = continue_branch(&p, &DVector::from_vec(vec![0.5, 0.0]), &StepPolicy::default());
        assert!(matches!(r, Err(Error::InitialPointFailed(_))));
    }
}
