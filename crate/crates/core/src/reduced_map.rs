//! The reduced return map `F` near a symmetric corner collision.
//!
//! For a reflection-symmetric relay system whose symmetric periodic orbit
//! hits both switching lines exactly at its switch times, the switch point
//! of the next half-period depends only on the current switch point `y`:
//!
//! `F(y) = -Y+^{τ + t(y)} y`, where `t(y)` solves `h(Y_u^t y) = ε` with
//! `u = -1` if `h(y) >= ε` (domain `D-`) and `u = +1` otherwise (`D+`).
//!
//! The full return map is `F ∘ F`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{Flow, SwappedFlow};
use crate::relay::{BreakpointPath, HistorySegment, HybridState, NegatedSwitching, Path, PathRepr, Relay, SwitchingFunction};
use crate::roots::newton_bracketed;

/// Subdomain of the working neighbourhood; the line `h = ε` belongs to `D-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainTag {
    DPlus,
    DMinus,
}

/// Smooth piece of `F`: `F+` solves the time equation along `Y+`, `F-` along `Y-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn relay(self) -> Relay {
        match self {
            Branch::Plus => Relay::Plus,
            Branch::Minus => Relay::Minus,
        }
    }
}

impl From<DomainTag> for Branch {
    fn from(d: DomainTag) -> Self {
        match d {
            DomainTag::DPlus => Branch::Plus,
            DomainTag::DMinus => Branch::Minus,
        }
    }
}

/// Jacobian of a branch of `F` together with its derivative in `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchJacobian {
    pub dy: DMatrix<f64>,
    pub dtau: DVector<f64>,
}

/// Everything needed to evaluate `F` near one collision.
#[derive(Clone)]
pub struct CollisionContext {
    pub flow: Arc<dyn Flow>,
    pub switching: Arc<dyn SwitchingFunction>,
    pub tau: f64,
    pub epsilon: f64,
    /// Half-width of the bracket for the implicit times.
    pub delta: f64,
    /// Centre of the working neighbourhood, close to the collision point.
    pub y_ref: DVector<f64>,
    pub radius: f64,
    /// `f(y_ref, +1)`, normal of the section `Σ`.
    pub f2: DVector<f64>,
    /// `Y+^Δ y_ref`, the point of `Σ` on the reference orbit.
    pub section_point: DVector<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl std::fmt::Debug for CollisionContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CollisionContext")
            .field("tau", &self.tau)
            .field("epsilon", &self.epsilon)
            .field("delta", &self.delta)
            .field("y_ref", &self.y_ref.as_slice())
            .field("radius", &self.radius)
            .finish()
    }
}

impl CollisionContext {
    /// Builds a context with `Δ = 0.1 τ` and neighbourhood radius `0.5`.
    ///
    /// If `y_ref` lies on `h = ε` the collision must be strictly transversal.
    pub fn new(
        flow: Arc<dyn Flow>,
        switching: Arc<dyn SwitchingFunction>,
        tau: f64,
        epsilon: f64,
        y_ref: DVector<f64>,
    ) -> Result<Self> {
        if !(tau > 0.0) || !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("need τ > 0 and ε > 0, got {tau}, {epsilon}")));
        }
        if y_ref.len() != flow.dim() {
            return Err(Error::DimensionMismatch { expected: flow.dim(), got: y_ref.len() });
        }
        let h0 = switching.checked_gradient(&y_ref)?;
        let f1 = flow.field(&y_ref, Relay::Minus);
        let f2 = flow.field(&y_ref, Relay::Plus);
        if (switching.value(&y_ref) - epsilon).abs() <= 1e-8 {
            let q = h0.dot(&f1) * h0.dot(&f2);
            if !(q > 0.0) {
                return Err(Error::NotStrictlyTransversal { q });
            }
        }
        let delta = 0.1 * tau;
        let section_point = flow.advance(&y_ref, Relay::Plus, delta)?;
        Ok(Self {
            flow,
            switching,
            tau,
            epsilon,
            delta,
            y_ref,
            radius: 0.5,
            f2,
            section_point,
            tol: 1e-12,
            max_iter: 30,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!("Δ must be positive, got {delta}")));
        }
        self.delta = delta;
        self.section_point = self.flow.advance(&self.y_ref, Relay::Plus, delta)?;
        Ok(self)
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// `h'(y_ref)`.
    pub fn h0(&self) -> DVector<f64> {
        self.switching.gradient(&self.y_ref)
    }

    /// `f(y_ref, -1)`.
    pub fn f1(&self) -> DVector<f64> {
        self.flow.field(&self.y_ref, Relay::Minus)
    }

    fn guard(&self, y: &DVector<f64>) -> Result<()> {
        let distance = (y - &self.y_ref).norm();
        if !(distance <= self.radius) {
            return Err(Error::OutsideNeighborhood { distance, radius: self.radius });
        }
        Ok(())
    }

    pub fn classify(&self, y: &DVector<f64>) -> DomainTag {
        if self.switching.value(y) >= self.epsilon {
            DomainTag::DMinus
        } else {
            DomainTag::DPlus
        }
    }

    /// `t±(y)`: the time in `(-Δ, Δ)` with `h(Y_±^t y) = ε`.
    pub fn crossing_time_branch(&self, y: &DVector<f64>, branch: Branch) -> Result<f64> {
        self.guard(y)?;
        let u = branch.relay();
        let g = |t: f64| match self.flow.advance(y, u, t) {
            Ok(z) => (self.switching.value(&z) - self.epsilon, self.switching.gradient(&z).dot(&self.flow.field(&z, u))),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let t = newton_bracketed(g, 0.0, -self.delta, self.delta, self.tol, self.max_iter)?;
        let (_, d) = g(t);
        if !(d.abs() >= 1e-10) {
            return Err(Error::DegenerateDerivative { derivative: d });
        }
        Ok(t)
    }

    /// `t(y)`, using the branch selected by the domain of `y`.
    pub fn crossing_time(&self, y: &DVector<f64>) -> Result<f64> {
        self.crossing_time_branch(y, self.classify(y).into())
    }

    pub fn map_f_branch(&self, y: &DVector<f64>, branch: Branch) -> Result<DVector<f64>> {
        let t = self.crossing_time_branch(y, branch)?;
        Ok(-self.flow.advance(y, Relay::Plus, self.tau + t)?)
    }

    pub fn map_f(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.map_f_branch(y, self.classify(y).into())
    }

    /// Domain tag of `y` and `F(y)`.
    pub fn step(&self, y: &DVector<f64>) -> Result<(DomainTag, DVector<f64>)> {
        let tag = self.classify(y);
        Ok((tag, self.map_f_branch(y, tag.into())?))
    }

    /// `DF±(y)` by the chain rule through the implicit time, and `∂F±/∂τ`.
    pub fn jacobian_f_branch(&self, y: &DVector<f64>, branch: Branch) -> Result<BranchJacobian> {
        let t = self.crossing_time_branch(y, branch)?;
        let u = branch.relay();
        let z = self.flow.advance(y, u, t)?;
        let hz = self.switching.gradient(&z);
        let rate = hz.dot(&self.flow.field(&z, u));
        // ∇t = -h'(z) ∂_y Y_u^t / (h'(z) f(z, u))
        let grad_t = -(self.flow.jacobian(y, u, t)?.transpose() * &hz) / rate;
        let w = self.flow.advance(y, Relay::Plus, self.tau + t)?;
        let fw = self.flow.field(&w, Relay::Plus);
        let dy = -(self.flow.jacobian(y, Relay::Plus, self.tau + t)? + &fw * grad_t.transpose());
        Ok(BranchJacobian { dy, dtau: -fw })
    }

    /// `θ(y)`: travel time along `Y+` from `y` to `Σ`, in `[0, 2Δ]`.
    pub fn theta(&self, y: &DVector<f64>) -> Result<f64> {
        self.guard(y)?;
        let g = |s: f64| match self.flow.advance(y, Relay::Plus, s) {
            Ok(z) => (self.f2.dot(&(&z - &self.section_point)), self.f2.dot(&self.flow.field(&z, Relay::Plus))),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let (lo, hi) = (-self.delta, 3.0 * self.delta);
        let th = newton_bracketed(g, self.delta, lo, hi, self.tol, self.max_iter)?;
        let slack = 1e-12 * self.delta.max(1.0);
        if th < -slack || th > 2.0 * self.delta + slack {
            return Err(Error::NoRootInBracket { lo: 0.0, hi: 2.0 * self.delta });
        }
        Ok(th.max(0.0))
    }

    /// The history whose switch point is `y`: it follows `Y-` up to `-θ(y)`,
    /// switches there to `Y+` and reaches `Σ` at time `0`; `u = +1`.
    pub fn reconstruct_history(&self, y: &DVector<f64>, horizon: f64) -> Result<HybridState> {
        if horizon < self.tau {
            return Err(Error::InvalidParameter(format!("horizon {horizon} shorter than τ = {}", self.tau)));
        }
        let th = self.theta(y)?;
        let anchor = self.flow.advance(y, Relay::Minus, th - horizon)?;
        let mut p = BreakpointPath::single(-horizon, anchor, Relay::Minus);
        p.push_piece(-th, y.clone(), Relay::Plus);
        p.set_end(0.0);
        let history = HistorySegment::from_path(horizon, Path::new(PathRepr::Breakpoints(p)))?;
        Ok(HybridState::new(history, Relay::Plus))
    }

    /// Context of the mirrored system `(Y+ ↔ Y-, h ↦ -h)` around `-y_ref`.
    ///
    /// For reflection-symmetric systems its map `F̃` satisfies `F̃(-y) = -F(y)`.
    pub fn mirrored(&self) -> Result<Self> {
        let flow: Arc<dyn Flow> = Arc::new(SwappedFlow(self.flow.clone()));
        let switching: Arc<dyn SwitchingFunction> = Arc::new(NegatedSwitching(self.switching.clone()));
        let mut ctx = Self::new(flow, switching, self.tau, self.epsilon, -&self.y_ref)?.with_delta(self.delta)?;
        ctx.radius = self.radius;
        ctx.tol = self.tol;
        ctx.max_iter = self.max_iter;
        Ok(ctx)
    }
}
