use std::f64::consts::{PI, TAU};

use nalgebra::{DVector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fourier::{mode_energy, nodes, FourierCurve};
use super::{
    continue_branch, fixed_point_residual, newton, newton_pinned, Branch, NewtonOptions, NewtonReport, NsProblem,
    ResidualProblem, StepPolicy,
};
use crate::error::{Error, Result};
use crate::oscillator::{collision_point, df_minus_at, OscillatorParams};
use crate::reduced_map::Branch as MapBranch;
use crate::relay::Relay;

/// `(y(η(φ)) + Y+^{τ+t(φ)} y(φ), ε - n·Y-^{t(φ)} y(φ))` at one angle.
fn point_residual(curve: &FourierCurve, params: &OscillatorParams, phi: f64) -> [f64; 3] {
    let flow = params.flow();
    let y = curve.point(phi);
    let t = curve.t_at(phi).0;
    let image = curve.point(curve.eta(phi));
    let w = flow.apply(&y, Relay::Plus, params.tau + t);
    let z = flow.apply(&y, Relay::Minus, t);
    [image[0] + w[0], image[1] + w[1], params.epsilon - params.normal().dot(&z)]
}

fn residual_unchecked(curve: &FourierCurve, params: &OscillatorParams) -> DVector<f64> {
    let grid = nodes(curve.modes);
    let mut out = Vec::with_capacity(3 * grid.len() + 3);
    for phi in grid {
        out.extend_from_slice(&point_residual(curve, params, phi));
    }
    out.extend_from_slice(fixed_point_residual(&curve.y0, curve.t0, params).as_slice());
    DVector::from_vec(out)
}

/// Collocation residual of the invariance equation at the `2N + 1` nodes,
/// followed by the fixed-point residual of `(y₀, t₀)`.
pub fn invariant_curve_residual(curve: &FourierCurve, params: &OscillatorParams) -> Result<DVector<f64>> {
    for phi in nodes(curve.modes) {
        let r = curve.r_at(phi);
        let d = curve.eta_derivative(phi);
        if r < 0.0 || !(d > 0.0) {
            return Err(Error::ParametrizationBreakdown(format!("r = {r:e}, η' = {d:e} at φ = {phi:.4}")));
        }
    }
    Ok(residual_unchecked(curve, params))
}

/// `(t(φ*), t'(φ*))`, zero when `max t = 0` is attained at `φ*`.
pub fn collision_closure(curve: &FourierCurve, phi_star: f64) -> Result<Vector2<f64>> {
    let (t, d1, d2) = curve.t_at(phi_star);
    if !(d2 < 0.0) {
        return Err(Error::NotAMaximum { second: d2 });
    }
    Ok(Vector2::new(t, d1))
}

/// Fraction of the non-constant energy in the top quartile of modes,
/// maximized over `r`, `p` and `t`.
pub fn spectral_tail(curve: &FourierCurve) -> f64 {
    let n = curve.modes;
    let first = n - n / 4 + 1;
    let mut p = vec![0.0];
    p.extend_from_slice(&curve.p);
    [&curve.r, &p, &curve.t]
        .iter()
        .map(|c| {
            let total: f64 = (1..=n).map(|k| mode_energy(c, k)).sum();
            let tail: f64 = (first..=n).map(|k| mode_energy(c, k)).sum();
            if total > 0.0 {
                tail / total
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Error estimate of a collocation solution: the larger of
/// [`spectral_tail`] and the residual sup-norm halfway between nodes.
pub fn fourier_error_estimate(curve: &FourierCurve, params: &OscillatorParams) -> f64 {
    let m = 2 * curve.modes + 1;
    let off = (0..m)
        .map(|j| {
            let phi = TAU * (j as f64 + 0.5) / m as f64;
            point_residual(curve, params, phi).iter().fold(0.0, |a: f64, v| a.max(v.abs()))
        })
        .fold(0.0, f64::max);
    spectral_tail(curve).max(off)
}

/// Largest distance between `F-` images of `samples` curve points and the curve.
pub fn invariance_defect(curve: &FourierCurve, params: &OscillatorParams, samples: usize) -> Result<f64> {
    let grid = nodes(curve.modes);
    let r_max = grid.iter().map(|&p| curve.r_at(p)).fold(0.0, f64::max);
    let t_max = grid.iter().map(|&p| curve.t_at(p).0.abs()).fold(0.0, f64::max);
    // the working neighbourhood has to contain the whole curve and its switch times
    let ctx = params
        .context_at(curve.y0)?
        .with_radius(2.0 * r_max + 0.5)
        .with_delta((0.1 * params.tau).max(2.0 * t_max))?;
    let mut worst = 0.0f64;
    for k in 0..samples {
        let phi = TAU * k as f64 / samples as f64;
        let y = DVector::from_column_slice(curve.point(phi).as_slice());
        let img = ctx.map_f_branch(&y, MapBranch::Minus)?;
        let d = Vector2::new(img[0], img[1]) - curve.y0;
        let psi = d[1].atan2(d[0]);
        worst = worst.max((d.norm() - curve.r_at(psi)).abs());
    }
    Ok(worst)
}

/// Invariant curve of `F-` at fixed parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantCurveProblem {
    pub params: OscillatorParams,
    pub modes: usize,
}

impl InvariantCurveProblem {
    pub fn curve(&self, z: &DVector<f64>) -> Result<FourierCurve> {
        FourierCurve::from_slice(self.modes, z.as_slice())
    }

    /// Newton solve from `guess`, resized to this problem's mode count.
    pub fn solve(&self, guess: &FourierCurve) -> Result<(FourierCurve, NewtonReport)> {
        let rep = newton(self, &guess.resized(self.modes).to_vector(), &NewtonOptions::default())?;
        Ok((self.curve(&rep.z)?, rep))
    }
}

impl ResidualProblem for InvariantCurveProblem {
    fn n_unknowns(&self) -> usize {
        FourierCurve::len_for(self.modes)
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        invariant_curve_residual(&self.curve(z)?, &self.params)
    }

    fn error_estimate(&self, z: &DVector<f64>) -> f64 {
        self.curve(z).map(|c| fourier_error_estimate(&c, &self.params)).unwrap_or(f64::INFINITY)
    }

    fn admissible(&self, z: &DVector<f64>) -> Result<()> {
        self.curve(z)?.check_regular()
    }
}

/// Invariant curves touching `D₀`, in the unknowns
/// `(curve, φ*, τ, α)` at fixed `(ζ, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyProblem {
    pub zeta: f64,
    pub epsilon: f64,
    pub modes: usize,
}

impl FamilyProblem {
    pub fn curve_len(&self) -> usize {
        FourierCurve::len_for(self.modes)
    }

    pub fn phi_slot(&self) -> usize {
        self.curve_len()
    }

    pub fn tau_slot(&self) -> usize {
        self.curve_len() + 1
    }

    pub fn alpha_slot(&self) -> usize {
        self.curve_len() + 2
    }

    pub fn split(&self, z: &DVector<f64>) -> Result<(FourierCurve, f64, OscillatorParams)> {
        if z.len() != self.n_unknowns() {
            return Err(Error::DimensionMismatch { expected: self.n_unknowns(), got: z.len() });
        }
        let curve = FourierCurve::from_slice(self.modes, z.as_slice())?;
        let params =
            OscillatorParams { zeta: self.zeta, tau: z[self.tau_slot()], epsilon: self.epsilon, alpha: z[self.alpha_slot()] };
        Ok((curve, z[self.phi_slot()], params))
    }

    pub fn join(&self, curve: &FourierCurve, phi_star: f64, tau: f64, alpha: f64) -> DVector<f64> {
        let mut v: Vec<f64> = curve.resized(self.modes).to_vector().iter().copied().collect();
        v.extend_from_slice(&[phi_star, tau, alpha]);
        DVector::from_vec(v)
    }
}

impl ResidualProblem for FamilyProblem {
    fn n_unknowns(&self) -> usize {
        self.curve_len() + 3
    }

    fn n_equations(&self) -> usize {
        self.curve_len() + 2
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let (curve, phi, params) = self.split(z)?;
        let g = invariant_curve_residual(&curve, &params)?;
        let (t, d1, _) = curve.t_at(phi);
        Ok(DVector::from_iterator(g.len() + 2, g.iter().copied().chain([t, d1])))
    }

    fn parameter_slots(&self) -> Vec<usize> {
        vec![self.tau_slot(), self.alpha_slot()]
    }

    fn error_estimate(&self, z: &DVector<f64>) -> f64 {
        match self.split(z) {
            Ok((curve, _, params)) => fourier_error_estimate(&curve, &params),
            Err(_) => f64::INFINITY,
        }
    }

    fn admissible(&self, z: &DVector<f64>) -> Result<()> {
        let (curve, phi, _) = self.split(z)?;
        curve.check_regular()?;
        collision_closure(&curve, phi)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    pub modes: usize,
    /// Offset in `τ` from the NSC point of the seed.
    pub delta_tau: f64,
    pub policy: StepPolicy,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            modes: 32,
            delta_tau: 1e-3,
            policy: StepPolicy {
                initial: 2e-3,
                min: 1e-6,
                max: 2e-2,
                max_points: 400,
                // tighter than the default so that mode refinements are not masked by solver noise
                newton: NewtonOptions { tol: 1e-12, max_iter: 8 },
                max_error: Some(1e-2),
                ..Default::default()
            },
        }
    }
}

/// Complex eigenvalue with positive imaginary part and its eigenvector.
fn complex_eigenpair(m: &Matrix2<f64>) -> Result<(Complex64, [Complex64; 2])> {
    let (tr, det) = (m.trace(), m.determinant());
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        return Err(Error::InvalidParameter(format!("DF- has real eigenvalues (trace {tr}, det {det})")));
    }
    let mu = Complex64::new(tr / 2.0, (-disc).sqrt());
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let v = if b.abs() >= c.abs() {
        [Complex64::new(b, 0.0), mu - a]
    } else {
        [mu - d, Complex64::new(c, 0.0)]
    };
    Ok((mu, v))
}

/// Ellipse seed around the fixed point `(y₀, t₀)` of `F-`, scaled to touch `D₀`.
///
/// Also returns the angle `φ*` where the seed's `t` is largest.
pub fn ellipse_seed(params: &OscillatorParams, y0: Vector2<f64>, t0: f64, modes: usize) -> Result<(FourierCurve, f64)> {
    let flow = params.flow();
    let n = params.normal();
    let (mu, v) = complex_eigenpair(&df_minus_at(params, &y0, t0))?;
    let theta = mu.arg();
    let p = Matrix2::new(v[0].re, -v[0].im, v[1].re, -v[1].im);
    let p_inv = p.try_inverse().ok_or(Error::SingularJacobian)?;
    let nv = Complex64::new(n[0], 0.0) * v[0] + Complex64::new(n[1], 0.0) * v[1];
    let rho = (n.dot(&y0) - params.epsilon).abs() / nv.norm();
    let z = flow.apply(&y0, Relay::Minus, t0);
    let grad_t = -(flow.flow_matrix(t0).transpose() * n) / n.dot(&flow.vector_field(&z, Relay::Minus));
    let grid = nodes(modes);
    let (mut r, mut shift, mut t) = (Vec::new(), Vec::new(), Vec::new());
    let mut prev: Option<f64> = None;
    for &phi in &grid {
        let e = Vector2::new(phi.cos(), phi.sin());
        let c = p_inv * e;
        let rj = rho / c.norm();
        let s = c[1].atan2(c[0]) + theta;
        let img = p * Vector2::new(s.cos(), s.sin());
        let mut d = img[1].atan2(img[0]) - phi;
        let reference = prev.unwrap_or(0.0);
        while d - reference > PI {
            d -= TAU;
        }
        while d - reference < -PI {
            d += TAU;
        }
        prev = Some(d);
        r.push(rj);
        shift.push(d);
        t.push(t0 + grad_t.dot(&(e * rj)));
    }
    let curve = FourierCurve::from_nodes(&r, &shift, &t, y0, t0);
    let samples = 1024;
    let (k, _) = (0..samples)
        .map(|k| curve.t_at(TAU * k as f64 / samples as f64).0)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    let mut phi_star = TAU * k as f64 / samples as f64;
    for _ in 0..20 {
        let (_, d1, d2) = curve.t_at(phi_star);
        if d2 == 0.0 {
            break;
        }
        phi_star -= d1 / d2;
    }
    Ok((curve, phi_star))
}

/// Converged first member of the colliding family near the NSC point `nsc = (τ, α)`.
///
/// The seed sits on the Neimark–Sacker curve at `τ_NSC ± δτ`, on the side
/// where `t₀ < 0`; Newton then solves the family system with `τ` held.
/// Returns the problem, the solution and the orientation of `τ` along the family.
pub fn seed_colliding_family(
    zeta: f64,
    epsilon: f64,
    nsc: (f64, f64),
    opts: &FamilyOptions,
) -> Result<(FamilyProblem, DVector<f64>, f64)> {
    let ns = NsProblem { zeta, epsilon };
    let y = collision_point(zeta, nsc.0)?;
    let mut chosen = None;
    for side in [1.0, -1.0] {
        let z = DVector::from_vec(vec![y[0], y[1], 0.0, nsc.0 + side * opts.delta_tau, nsc.1]);
        if let Ok(rep) = newton_pinned(&ns, &z, 3, &NewtonOptions::default()) {
            if rep.z[2] < 0.0 {
                chosen = Some((rep.z, side));
                break;
            }
        }
    }
    let (zns, side) = chosen.ok_or_else(|| Error::InitialPointFailed("no Neimark–Sacker point with t₀ < 0".into()))?;
    let params = ns.params_at(&zns);
    let (curve, phi_star) = ellipse_seed(&params, Vector2::new(zns[0], zns[1]), zns[2], opts.modes)?;
    let family = FamilyProblem { zeta, epsilon, modes: opts.modes };
    let z0 = family.join(&curve, phi_star, params.tau, params.alpha);
    let rep = newton_pinned(&family, &z0, family.tau_slot(), &NewtonOptions::default())
        .map_err(|e| Error::InitialPointFailed(e.to_string()))?;
    family.admissible(&rep.z).map_err(|e| Error::InitialPointFailed(e.to_string()))?;
    Ok((family, rep.z, side))
}

/// A continued family of colliding invariant curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollidingFamily {
    pub problem: FamilyProblem,
    pub nsc: (f64, f64),
    pub branch: Branch,
}

impl CollidingFamily {
    pub fn curve(&self, i: usize) -> Result<FourierCurve> {
        Ok(self.problem.split(&self.branch.z(i))?.0)
    }

    pub fn params(&self, i: usize) -> Result<OscillatorParams> {
        Ok(self.problem.split(&self.branch.z(i))?.2)
    }

    pub fn phi_star(&self, i: usize) -> f64 {
        self.branch.points[i].z[self.problem.phi_slot()]
    }

    /// Member `i` recomputed with `modes` Fourier modes at the same `τ`.
    pub fn refined(&self, i: usize, modes: usize) -> Result<(FourierCurve, OscillatorParams)> {
        let (curve, phi, params) = self.problem.split(&self.branch.z(i))?;
        let fine = FamilyProblem { modes, ..self.problem };
        let z = fine.join(&curve, phi, params.tau, params.alpha);
        let rep = newton_pinned(&fine, &z, fine.tau_slot(), &NewtonOptions { tol: 1e-12, max_iter: 30 })?;
        let (c, _, p) = fine.split(&rep.z)?;
        Ok((c, p))
    }
}

/// Seeds at the NSC point and continues the colliding family away from it
/// until the error estimate exceeds `opts.policy.max_error`.
pub fn continue_colliding_family(zeta: f64, epsilon: f64, nsc: (f64, f64), opts: &FamilyOptions) -> Result<CollidingFamily> {
    let (problem, z0, side) = seed_colliding_family(zeta, epsilon, nsc, opts)?;
    let mut policy = opts.policy.clone();
    policy.direction = Some((problem.tau_slot(), side));
    let branch = continue_branch(&problem, &z0, &policy)?;
    Ok(CollidingFamily { problem, nsc, branch })
}
