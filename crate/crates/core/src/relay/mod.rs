//! Delayed hysteretic relay systems and their forward evolution.
//!
//! The continuous state follows `ẏ = f(y, u)`; the discrete state `u`
//! is the output of a relay with dead band `(-ε, ε)` applied to
//! `h(y(t - τ))`.

mod diagnostics;
mod evolve;
mod export;
mod hysteron;
mod path;

pub use diagnostics::{
    lemma1_min_gap, lemma1_switch_bound, strict_transversality_q, CrossingClass, Transversality,
    WeakTransversality,
};
pub use evolve::{Crossing, Switch, Trajectory};
pub use export::{read_events, read_trajectory_csv, write_events, write_trajectory_csv, EventFile};
pub use hysteron::{hysteron, Hysteron, Line, RelayOutput, ScanOptions};
pub use path::{BreakpointPath, Interpolation, Path, PathRepr, SampledPath};

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{AffineOscillatorFlow, Flow};

/// Discrete relay state `u ∈ {-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Relay {
    Plus,
    Minus,
}

impl Relay {
    pub fn value(self) -> f64 {
        match self {
            Relay::Plus => 1.0,
            Relay::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Relay::Plus => Relay::Minus,
            Relay::Minus => Relay::Plus,
        }
    }

    pub fn from_sign(s: f64) -> Result<Self> {
        if s == 1.0 {
            Ok(Relay::Plus)
        } else if s == -1.0 {
            Ok(Relay::Minus)
        } else {
            Err(Error::InvalidParameter(format!("relay value must be +1 or -1, got {s}")))
        }
    }
}

impl From<Relay> for i8 {
    fn from(r: Relay) -> i8 {
        match r {
            Relay::Plus => 1,
            Relay::Minus => -1,
        }
    }
}

impl TryFrom<i8> for Relay {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Relay::Plus),
            -1 => Ok(Relay::Minus),
            _ => Err(format!("relay value must be 1 or -1, got {v}")),
        }
    }
}

impl fmt::Display for Relay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", i8::from(*self))
    }
}

/// Scalar switching function `h` with its gradient.
pub trait SwitchingFunction: Send + Sync {
    fn value(&self, y: &DVector<f64>) -> f64;
    fn gradient(&self, y: &DVector<f64>) -> DVector<f64>;

    /// Gradient, rejecting points where it vanishes.
    fn checked_gradient(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.gradient(y);
        if g.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroGradient);
        }
        Ok(g)
    }

    /// Upper bound for `|h'|` if known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

/// `h(y) = n · y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSwitching {
    pub normal: DVector<f64>,
}

impl LinearSwitching {
    pub fn new(normal: DVector<f64>) -> Result<Self> {
        if normal.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroGradient);
        }
        Ok(Self { normal })
    }

    /// Planar feedback `h(y) = y₁ cos α + y₂ sin α`.
    pub fn tilted(alpha: f64) -> Self {
        Self { normal: DVector::from_vec(vec![alpha.cos(), alpha.sin()]) }
    }
}

impl SwitchingFunction for LinearSwitching {
    fn value(&self, y: &DVector<f64>) -> f64 {
        self.normal.dot(y)
    }
    fn gradient(&self, _y: &DVector<f64>) -> DVector<f64> {
        self.normal.clone()
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.normal.norm())
    }
}

/// `-h`; together with [`crate::flows::SwappedFlow`] it describes the
/// mirrored system of a reflection-symmetric one.
pub struct NegatedSwitching<S: ?Sized>(pub Arc<S>);

impl<S: SwitchingFunction + ?Sized> SwitchingFunction for NegatedSwitching<S> {
    fn value(&self, y: &DVector<f64>) -> f64 {
        -self.0.value(y)
    }
    fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        -self.0.gradient(y)
    }
    fn lipschitz(&self) -> Option<f64> {
        self.0.lipschitz()
    }
}

/// A delayed relay system: flows `Y±`, switching function `h`, delay `τ`
/// and hysteresis half-width `ε`.
#[derive(Clone)]
pub struct RelaySystem {
    pub flow: Arc<dyn Flow>,
    pub switching: Arc<dyn SwitchingFunction>,
    pub tau: f64,
    pub epsilon: f64,
    /// Lipschitz bound of the field, in the norm used for `y_max` in
    /// [`lemma1_switch_bound`].
    pub lipschitz_f: Option<f64>,
    pub lipschitz_h: Option<f64>,
    /// Crossings with `|d/dt h(y(t))|` below this are reported as degenerate.
    pub tangency_tol: f64,
    /// Crossing times are refined until `|h(y) ∓ ε| <=` this.
    pub root_tol: f64,
}

impl fmt::Debug for RelaySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RelaySystem")
            .field("dim", &self.flow.dim())
            .field("tau", &self.tau)
            .field("epsilon", &self.epsilon)
            .field("lipschitz_f", &self.lipschitz_f)
            .field("lipschitz_h", &self.lipschitz_h)
            .finish()
    }
}

impl RelaySystem {
    pub fn new(flow: Arc<dyn Flow>, switching: Arc<dyn SwitchingFunction>, tau: f64, epsilon: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("delay must be positive, got {tau}")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("hysteresis half-width must be positive, got {epsilon}")));
        }
        let lipschitz_h = switching.lipschitz();
        Ok(Self {
            flow,
            switching,
            tau,
            epsilon,
            lipschitz_f: None,
            lipschitz_h,
            tangency_tol: 1e-8,
            root_tol: 1e-12,
        })
    }

    /// The rescaled oscillator with feedback `h(y) = y₁ cos α + y₂ sin α`.
    ///
    /// The field is affine, `f(y, u) = G y + u w`, so `|f| <= ‖[G w]‖ · |(y, u)|`;
    /// `lipschitz_f` is set to `‖[G w]‖₂` and `y_max` must be measured as
    /// `max sqrt(|y|² + 1)` (see [`Trajectory::augmented_sup_norm`]).
    pub fn oscillator(zeta: f64, tau: f64, epsilon: f64, alpha: f64) -> Result<Self> {
        let flow = AffineOscillatorFlow::new(zeta);
        let g = flow.generator();
        let w = 1.0 + zeta * zeta;
        let aug = nalgebra::Matrix2x3::new(g[(0, 0)], g[(0, 1)], 0.0, g[(1, 0)], g[(1, 1)], w);
        let lip = aug.singular_values().max();
        let mut sys = Self::new(Arc::new(flow), Arc::new(LinearSwitching::tilted(alpha)), tau, epsilon)?;
        sys.lipschitz_f = Some(lip);
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.flow.dim()
    }

    pub fn h(&self, y: &DVector<f64>) -> f64 {
        self.switching.value(y)
    }

    /// `d/dt h(y(t))` along `ẏ = f(y, u)`.
    pub fn h_rate(&self, y: &DVector<f64>, u: Relay) -> Result<f64> {
        Ok(self.switching.checked_gradient(y)?.dot(&self.flow.field(y, u)))
    }
}

/// An initial or current history `ξ` on `[-Θ, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    pub horizon: f64,
    pub path: Path,
}

impl HistorySegment {
    pub fn from_path(horizon: f64, path: Path) -> Result<Self> {
        let (a, b) = path.domain();
        let scale = horizon.max(1.0);
        if (a + horizon).abs() > 1e-12 * scale || b.abs() > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "history path covers [{a}, {b}], expected [-{horizon}, 0]"
            )));
        }
        Ok(Self { horizon, path })
    }

    /// Constant history `ξ ≡ value`.
    pub fn constant(value: DVector<f64>, horizon: f64) -> Result<Self> {
        let p = SampledPath::uniform(-horizon, 0.0, vec![value.clone(), value], Interpolation::Linear)?;
        Self::from_path(horizon, Path::new(PathRepr::Samples(p)))
    }

    /// History following the flows: starts at `anchor` at `-horizon` and
    /// switches flow at `switch_times` (in `(-horizon, 0]`).
    pub fn from_breakpoints(
        flow: &dyn Flow,
        horizon: f64,
        anchor: DVector<f64>,
        switch_times: &[f64],
        labels: &[Relay],
    ) -> Result<Self> {
        let p = BreakpointPath::new(flow, -horizon, 0.0, anchor, switch_times, labels)?;
        Self::from_path(horizon, Path::new(PathRepr::Breakpoints(p)))
    }

    /// History from uniformly spaced samples on `[-horizon, 0]`.
    pub fn from_samples(horizon: f64, values: Vec<DVector<f64>>, order: Interpolation) -> Result<Self> {
        let p = SampledPath::uniform(-horizon, 0.0, values, order)?;
        Self::from_path(horizon, Path::new(PathRepr::Samples(p)))
    }

    pub fn eval(&self, flow: &dyn Flow, s: f64) -> Result<DVector<f64>> {
        self.path.eval(flow, s)
    }

    /// `ξ(0)`.
    pub fn headpoint(&self, flow: &dyn Flow) -> Result<DVector<f64>> {
        self.path.eval(flow, 0.0)
    }
}

/// Phase-space point `(ξ, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub history: HistorySegment,
    pub u: Relay,
}

impl HybridState {
    pub fn new(history: HistorySegment, u: Relay) -> Self {
        Self { history, u }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relay_serializes_as_sign() {
        assert_eq!(serde_json::to_string(&Relay::Minus).unwrap(), "-1");
        let r: Relay = serde_json::from_str("1").unwrap();
        assert_eq!(r, Relay::Plus);
        assert!(serde_json::from_str::<Relay>("0").is_err());
    }

    #[test]
    fn system_validates_parameters() {
        assert!(RelaySystem::oscillator(-0.1, 0.0, 0.1, 0.0).is_err());
        assert!(RelaySystem::oscillator(-0.1, 4.2, -0.1, 0.0).is_err());
        assert!(RelaySystem::oscillator(-0.1, 4.2, 0.1, 0.0).is_ok());
    }

    #[test]
    fn zero_gradient_is_rejected() {
        assert_eq!(LinearSwitching::new(DVector::zeros(2)).unwrap_err(), Error::ZeroGradient);
    }

    #[test]
    fn history_domain_is_checked() {
        let flow = AffineOscillatorFlow::new(-0.1);
        let p = BreakpointPath::new(&flow, -1.0, 0.0, DVector::zeros(2), &[], &[Relay::Plus]).unwrap();
        assert!(HistorySegment::from_path(2.0, Path::new(PathRepr::Breakpoints(p))).is_err());
    }
}
