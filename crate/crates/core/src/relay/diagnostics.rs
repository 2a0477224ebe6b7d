use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::evolve::{Crossing, Trajectory};
use super::{Relay, RelaySystem};
use crate::error::{Error, Result};

impl Trajectory {
    /// Crossings `(time, line, direction)` in time order.
    pub fn crossing_times(&self) -> &[Crossing] {
        &self.crossings
    }
}

/// Outcome of the local monotonicity check at one crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakTransversality {
    pub time: f64,
    pub transversal: bool,
    /// Smallest forward difference of `|h(y(·))|` over the window samples.
    pub margin: f64,
}

impl RelaySystem {
    /// Checks that `|h(y(·))|` is strictly increasing on `[t - window, t + window]`
    /// around every crossing `t` of `traj`.
    pub fn check_weak_transversality(&self, traj: &Trajectory, window: f64) -> Result<Vec<WeakTransversality>> {
        const SAMPLES: usize = 64;
        let (lo, hi) = traj.path.domain();
        let times: Vec<f64> = traj.crossings.iter().map(|c| c.time).collect();
        let mut out = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            for nb in [k.checked_sub(1).map(|j| times[j]), times.get(k + 1).copied()].into_iter().flatten() {
                if (nb - t).abs() <= window {
                    return Err(Error::WindowTooLarge { window, neighbour: nb });
                }
            }
            let a = (t - window).max(lo);
            let b = (t + window).min(hi);
            let mut prev = self.h(&traj.eval(a)?).abs();
            let mut margin = f64::INFINITY;
            for i in 1..=SAMPLES {
                let s = a + (b - a) * i as f64 / SAMPLES as f64;
                let cur = self.h(&traj.eval(s)?).abs();
                margin = margin.min(cur - prev);
                prev = cur;
            }
            out.push(WeakTransversality { time: t, transversal: margin > 0.0, margin });
        }
        Ok(out)
    }
}

/// Classification of a corner collision by the sign of `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingClass {
    /// `q > 0`: both flows cross the line in the same direction.
    Strict,
    /// `q = 0` within tolerance: one flow is tangent.
    Degenerate,
    /// `q < 0`: the corner touches the line from one side; no local reduction.
    OneSided,
}

/// Normal speeds of both flows at a point on a switching line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transversality {
    /// `h'(y) f(y, -1)`.
    pub g_minus: f64,
    /// `h'(y) f(y, +1)`.
    pub g_plus: f64,
    pub q: f64,
    pub class: CrossingClass,
}

/// `q = (h'(y) f(y, -1)) (h'(y) f(y, +1))`; `tol` decides when `q` counts as zero.
pub fn strict_transversality_q(sys: &RelaySystem, y: &DVector<f64>, tol: f64) -> Result<Transversality> {
    let g_minus = sys.h_rate(y, Relay::Minus)?;
    let g_plus = sys.h_rate(y, Relay::Plus)?;
    let q = g_minus * g_plus;
    let class = if q.abs() <= tol {
        CrossingClass::Degenerate
    } else if q > 0.0 {
        CrossingClass::Strict
    } else {
        CrossingClass::OneSided
    };
    Ok(Transversality { g_minus, g_plus, q, class })
}

/// Upper bound `1 + (t_E - t_0) L H y_max / (2ε)` on the number of switches
/// in `[t_0, t_E]` when `t_0 >= τ`.
pub fn lemma1_switch_bound(t0: f64, t_end: f64, l_max: f64, h_max: f64, y_max: f64, epsilon: f64) -> f64 {
    1.0 + (t_end - t0) * l_max * h_max * y_max / (2.0 * epsilon)
}

/// Lower bound `2ε / (H L y_max)` on the time between switches after `τ`.
pub fn lemma1_min_gap(l_max: f64, h_max: f64, y_max: f64, epsilon: f64) -> f64 {
    2.0 * epsilon / (h_max * l_max * y_max)
}
