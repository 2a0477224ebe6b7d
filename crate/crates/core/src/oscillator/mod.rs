//! The rescaled unstable oscillator with tilted delayed relay feedback.
//!
//! State `y = (x, ẋ)`, switching function `h(y) = y₁ cos α + y₂ sin α`.
//! A symmetric periodic orbit collides with both switching lines at its
//! switch times when `y = -Y+^τ y` and `h(y) = ±ε`.

mod bifmap;
mod export;

pub use bifmap::{
    bifurcation_map, BifurcationKind, BifurcationMap, CurvePoint, GridSpec, SpecialPoint, SpecialTag,
};
pub use export::{read_bifmap, read_surface_csv, write_bifmap, write_surface_csv, BifmapFiles, CurveRow, SpecialRow, SurfaceSample};

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DVector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::AffineOscillatorFlow;
use crate::reduced_map::CollisionContext;
use crate::relay::{LinearSwitching, Relay, RelaySystem};

/// Largest condition number of `I + A(τ)` accepted by [`collision_point`].
pub const MAX_CONDITION: f64 = 1e12;

/// Parameters `(ζ, τ, ε, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub zeta: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub alpha: f64,
}

impl OscillatorParams {
    pub fn new(zeta: f64, tau: f64, epsilon: f64, alpha: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("τ must be positive, got {tau}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("ε must be positive, got {epsilon}")));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("α must lie in [-π/2, π/2], got {alpha}")));
        }
        Ok(Self { zeta, tau, epsilon, alpha })
    }

    /// The point of the collision surface above `(τ, α)`.
    pub fn on_surface(zeta: f64, tau: f64, alpha: f64) -> Result<Self> {
        let epsilon = collision_epsilon(zeta, tau, alpha)?;
        Self::new(zeta, tau, epsilon, alpha)
    }

    /// True on the branch `τ < π`, which is computed but not validated.
    pub fn is_experimental(&self) -> bool {
        self.tau < PI
    }

    pub fn flow(&self) -> AffineOscillatorFlow {
        AffineOscillatorFlow::new(self.zeta)
    }

    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(self.alpha.cos(), self.alpha.sin())
    }

    pub fn system(&self) -> Result<RelaySystem> {
        RelaySystem::oscillator(self.zeta, self.tau, self.epsilon, self.alpha)
    }

    /// Reduced-map context centred at `y_ref`.
    pub fn context_at(&self, y_ref: Vector2<f64>) -> Result<CollisionContext> {
        CollisionContext::new(
            Arc::new(self.flow()),
            Arc::new(LinearSwitching::tilted(self.alpha)),
            self.tau,
            self.epsilon,
            DVector::from_column_slice(y_ref.as_slice()),
        )
    }

    /// Reduced-map context centred at the collision point for `(ζ, τ)`.
    pub fn context(&self) -> Result<CollisionContext> {
        self.context_at(collision_point(self.zeta, self.tau)?)
    }
}

/// Condition number of `I + A(τ)`, measured against `1 + ‖A(τ)‖`.
pub fn surface_condition(zeta: f64, tau: f64) -> f64 {
    let a = AffineOscillatorFlow::new(zeta).flow_matrix(tau);
    let lo = (Matrix2::identity() + a).singular_values().min();
    // relative to the size of the summands, so that I + A ≈ 0 is caught too
    let scale = 1.0 + a.norm();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        scale / lo
    }
}

/// Switch point `y = -[I + A(τ)]⁻¹ v(τ)` of the symmetric orbit of half-period `τ`.
pub fn collision_point(zeta: f64, tau: f64) -> Result<Vector2<f64>> {
    let flow = AffineOscillatorFlow::new(zeta);
    let m = Matrix2::identity() + flow.flow_matrix(tau);
    let condition = surface_condition(zeta, tau);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularSurface { tau, condition });
    }
    let inv = m.try_inverse().ok_or(Error::SingularSurface { tau, condition })?;
    Ok(-(inv * flow.flow_offset(tau)))
}

/// `ε` of the collision surface: `+h(y)` for `τ > π`, `-h(y)` for `τ < π`.
pub fn collision_epsilon(zeta: f64, tau: f64, alpha: f64) -> Result<f64> {
    let y = collision_point(zeta, tau)?;
    let hval = y[0] * alpha.cos() + y[1] * alpha.sin();
    let epsilon = if tau > PI { hval } else { -hval };
    if !(epsilon > 0.0) {
        return Err(Error::NegativeEpsilon { epsilon });
    }
    Ok(epsilon)
}

/// Angles `α ∈ [-π/2, π/2]` with `collision_epsilon(ζ, τ, α) = ε`, ascending.
pub fn collision_alphas(zeta: f64, tau: f64, epsilon: f64) -> Result<Vec<f64>> {
    let y = collision_point(zeta, tau)?;
    let sign = if tau > PI { 1.0 } else { -1.0 };
    let (r, phi) = (y.norm(), y[1].atan2(y[0]));
    if epsilon > r {
        return Ok(Vec::new());
    }
    // sign · r cos(α - φ) = ε
    let c = (sign * epsilon / r).acos();
    let mut out = Vec::new();
    for base in [phi + c, phi - c] {
        for k in -2..=2 {
            let a = base + 2.0 * PI * k as f64;
            if (-PI / 2.0..=PI / 2.0).contains(&a) && !out.iter().any(|b: &f64| (b - a).abs() < 1e-14) {
                out.push(a);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// The root of [`collision_alphas`] closest to `hint`.
pub fn collision_alpha(zeta: f64, tau: f64, epsilon: f64, hint: f64) -> Result<f64> {
    collision_alphas(zeta, tau, epsilon)?
        .into_iter()
        .min_by(|a, b| (a - hint).abs().total_cmp(&(b - hint).abs()))
        .ok_or_else(|| Error::InvalidParameter(format!("no collision angle for ε = {epsilon} at τ = {tau}")))
}

/// The colliding symmetric periodic orbit at a point of the collision surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionOrbit {
    pub params: OscillatorParams,
    pub y_star: Vector2<f64>,
    pub q: f64,
    /// `h₀' f(y*, +1)`.
    pub g_plus: f64,
    /// `h₀' f(y*, -1)`.
    pub g_minus: f64,
    pub period: f64,
}

impl CollisionOrbit {
    pub fn new(zeta: f64, tau: f64, alpha: f64) -> Result<Self> {
        let params = OscillatorParams::on_surface(zeta, tau, alpha)?;
        let y_star = collision_point(zeta, tau)?;
        let flow = params.flow();
        let n = params.normal();
        let g_plus = n.dot(&flow.vector_field(&y_star, Relay::Plus));
        let g_minus = n.dot(&flow.vector_field(&y_star, Relay::Minus));
        Ok(Self { params, y_star, q: g_plus * g_minus, g_plus, g_minus, period: 2.0 * tau })
    }

    pub fn context(&self) -> Result<CollisionContext> {
        self.params.context_at(self.y_star)
    }

    /// `y*(s)`: `Y+` on `[0, τ)`, `Y-` on `[τ, 2τ)`, extended periodically.
    pub fn point_at(&self, s: f64) -> Vector2<f64> {
        let tau = self.params.tau;
        let s = s.rem_euclid(2.0 * tau);
        let flow = self.params.flow();
        if s < tau {
            flow.apply(&self.y_star, Relay::Plus, s)
        } else {
            -flow.apply(&self.y_star, Relay::Plus, s - tau)
        }
    }

    /// `u*(s)`, right-continuous.
    pub fn relay_at(&self, s: f64) -> Relay {
        if s.rem_euclid(2.0 * self.params.tau) < self.params.tau {
            Relay::Plus
        } else {
            Relay::Minus
        }
    }

    /// Phase-space point `(y*(s + ·), u*(s))` with history horizon `horizon`.
    pub fn state_at(&self, s: f64, horizon: f64) -> Result<crate::relay::HybridState> {
        use crate::relay::{BreakpointPath, HistorySegment, Path, PathRepr};
        let tau = self.params.tau;
        let start = s - horizon;
        // switch times of u* in (start, s]
        let first = (start / tau).floor() as i64 + 1;
        let mut times = Vec::new();
        let mut k = first;
        while (k as f64) * tau <= s {
            times.push(k as f64 * tau - s);
            k += 1;
        }
        let mut labels = vec![self.relay_at(start)];
        labels.extend(times.iter().map(|&t| self.relay_at(t + s)));
        let anchor = crate::flows::to_dvec(self.point_at(start));
        let mut p = BreakpointPath::single(-horizon, anchor, labels[0]);
        for (i, &t) in times.iter().enumerate() {
            p.push_piece(t, crate::flows::to_dvec(self.point_at(t + s)), labels[i + 1]);
        }
        p.set_end(0.0);
        let history = HistorySegment::from_path(horizon, Path::new(PathRepr::Breakpoints(p)))?;
        // the relay output at s - τ is the value of u* at s
        Ok(crate::relay::HybridState::new(history, self.relay_at(s)))
    }
}

/// Linearizations of `F±` at a collision point and their spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionStability {
    pub df_plus: Matrix2<f64>,
    pub df_minus: Matrix2<f64>,
    /// The nonzero eigenvalue of `DF+`, equal to its trace.
    pub lambda_plus: f64,
    pub eig_minus: [Complex64; 2],
    pub trace_minus: f64,
    pub det_minus: f64,
    pub stable_plus: bool,
    pub stable_minus: bool,
    pub g_plus: f64,
    pub g_minus: f64,
}

impl CollisionStability {
    pub fn fold_plus(&self) -> f64 {
        self.lambda_plus - 1.0
    }
    pub fn flip_plus(&self) -> f64 {
        self.lambda_plus + 1.0
    }
    /// `det(I - DF-)`.
    pub fn fold_minus(&self) -> f64 {
        1.0 - self.trace_minus + self.det_minus
    }
    /// `det(I + DF-)`.
    pub fn flip_minus(&self) -> f64 {
        1.0 + self.trace_minus + self.det_minus
    }
    pub fn ns_minus(&self) -> f64 {
        self.det_minus - 1.0
    }
    /// Rotation angle `arccos(tr / 2)` of an eigenvalue pair on the unit circle.
    pub fn ns_angle(&self) -> Option<f64> {
        let c = self.trace_minus / 2.0;
        (c.abs() < 1.0).then(|| c.acos())
    }
}

/// `-A(τ)[I - f₂ h₀ᵀ / g]`.
fn projected_linearization(a: &Matrix2<f64>, f2: &Vector2<f64>, h0: &Vector2<f64>, g: f64) -> Matrix2<f64> {
    -(a * (Matrix2::identity() - f2 * h0.transpose() / g))
}

/// Eigenvalues of a real 2×2 matrix.
pub fn eigenvalues2(m: &Matrix2<f64>) -> [Complex64; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    [Complex64::new(tr / 2.0, 0.0) + disc, Complex64::new(tr / 2.0, 0.0) - disc]
}

/// Closed-form `DF±(y*)` from the collision point of `(ζ, τ)` and the angle `α`.
pub fn stability_at(zeta: f64, tau: f64, alpha: f64) -> Result<CollisionStability> {
    let y = collision_point(zeta, tau)?;
    let flow = AffineOscillatorFlow::new(zeta);
    let a = flow.flow_matrix(tau);
    let h0 = Vector2::new(alpha.cos(), alpha.sin());
    let f1 = flow.vector_field(&y, Relay::Minus);
    let f2 = flow.vector_field(&y, Relay::Plus);
    let (g_plus, g_minus) = (h0.dot(&f2), h0.dot(&f1));
    if g_plus == 0.0 || g_minus == 0.0 {
        return Err(Error::NotStrictlyTransversal { q: g_plus * g_minus });
    }
    let df_plus = projected_linearization(&a, &f2, &h0, g_plus);
    let df_minus = projected_linearization(&a, &f2, &h0, g_minus);
    let lambda_plus = df_plus.trace();
    let eig_minus = eigenvalues2(&df_minus);
    Ok(CollisionStability {
        df_plus,
        df_minus,
        lambda_plus,
        eig_minus,
        trace_minus: df_minus.trace(),
        det_minus: df_minus.determinant(),
        stable_plus: lambda_plus.abs() < 1.0,
        stable_minus: eig_minus.iter().all(|l| l.norm() < 1.0),
        g_plus,
        g_minus,
    })
}

/// Stability at collision for parameters on the collision surface.
pub fn stability_at_collision(orbit: &CollisionOrbit) -> Result<CollisionStability> {
    if !(orbit.q > 0.0) {
        return Err(Error::NotStrictlyTransversal { q: orbit.q });
    }
    stability_at(orbit.params.zeta, orbit.params.tau, orbit.params.alpha)
}

/// `DF-` at a fixed point `y₀` of `F-` with crossing time `t₀`:
/// `-[A(τ + t₀) + f(Y+^{τ+t₀} y₀, +1) ∇t]`.
pub fn df_minus_at(params: &OscillatorParams, y0: &Vector2<f64>, t0: f64) -> Matrix2<f64> {
    let flow = params.flow();
    let n = params.normal();
    let z = flow.apply(y0, Relay::Minus, t0);
    let rate = n.dot(&flow.vector_field(&z, Relay::Minus));
    let grad_t = -(flow.flow_matrix(t0).transpose() * n) / rate;
    let w = flow.apply(y0, Relay::Plus, params.tau + t0);
    let fw = flow.vector_field(&w, Relay::Plus);
    -(flow.flow_matrix(params.tau + t0) + fw * grad_t.transpose())
}

/// Neimark–Sacker point of `F-` on the collision curve `ε = const`:
/// solves `det DF-(y*) = 1` together with `collision_epsilon = ε`,
/// starting from the angle branch nearest `alpha_hint` and a bracket in `τ`.
pub fn find_nsc(zeta: f64, epsilon: f64, tau_lo: f64, tau_hi: f64, alpha_hint: f64) -> Result<(f64, f64)> {
    let det_on_curve = |tau: f64| -> Result<(f64, f64)> {
        let alpha = collision_alpha(zeta, tau, epsilon, alpha_hint)?;
        Ok((stability_at(zeta, tau, alpha)?.det_minus - 1.0, alpha))
    };
    let (flo, _) = det_on_curve(tau_lo)?;
    let (fhi, _) = det_on_curve(tau_hi)?;
    if flo.signum() == fhi.signum() {
        return Err(Error::NoRootInBracket { lo: tau_lo, hi: tau_hi });
    }
    let (mut lo, mut hi, mut f_lo) = (tau_lo, tau_hi, flo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (fm, _) = det_on_curve(mid)?;
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let (_, alpha) = det_on_curve(tau)?;
    Ok((tau, alpha))
}
