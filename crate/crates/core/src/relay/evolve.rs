use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::hysteron::{scan, Hysteron, Line, ScanOptions};
use super::path::{BreakpointPath, Path, PathRepr, SampledPath};
use super::{HistorySegment, HybridState, Relay, RelaySystem};
use crate::error::{Error, Result};
use crate::flows::Flow;
use crate::roots::refine_bracket;

/// A time where `h(y(t)) = ±ε` and a switch is scheduled `τ` later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub time: f64,
    pub line: Line,
    /// Sign of `d/dt h(y(t))` at the crossing.
    pub direction: f64,
}

/// A change of the discrete state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Switch {
    pub time: f64,
    /// Value of `u` from this time on.
    pub u: Relay,
    /// Crossing time that caused the switch.
    pub crossing: f64,
}

/// Result of [`RelaySystem::evolve`].
#[derive(Clone)]
pub struct Trajectory {
    pub(crate) flow: Arc<dyn Flow>,
    /// `y(t)` on `[-Θ, T]`; `[0, T]` is the headpoint path.
    pub path: Path,
    pub duration: f64,
    /// Crossings in `[-τ, T]` ordered by time; those in `[-τ, 0]` come from
    /// the initial history.
    pub crossings: Vec<Crossing>,
    pub switches: Vec<Switch>,
    /// `(time, u)` pairs; `u` holds from each time until the next.
    pub u_path: Vec<(f64, Relay)>,
}

impl std::fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trajectory")
            .field("duration", &self.duration)
            .field("crossings", &self.crossings)
            .field("switches", &self.switches)
            .finish()
    }
}

impl Trajectory {
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        self.path.eval(&*self.flow, t)
    }

    /// Right-continuous discrete state at `t >= 0`.
    pub fn u_at(&self, t: f64) -> Relay {
        let k = self.u_path.partition_point(|&(s, _)| s <= t);
        self.u_path[k.saturating_sub(1)].1
    }

    /// Headpoints at the switch times.
    pub fn switch_points(&self) -> Result<Vec<DVector<f64>>> {
        self.switches.iter().map(|s| self.eval(s.time)).collect()
    }

    /// Uniform samples of the headpoint path on `[0, T]`, including `T`.
    pub fn sample(&self, n: usize) -> Result<Vec<(f64, DVector<f64>)>> {
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let t = if i == n { self.duration } else { self.duration * i as f64 / n as f64 };
                self.eval(t).map(|y| (t, y))
            })
            .collect()
    }

    /// Sampled `max |y(t)|` on `[a, b]`, with switch and crossing times included.
    pub fn sup_norm(&self, a: f64, b: f64, n: usize) -> Result<f64> {
        self.sup_by(a, b, n, |y| y.norm())
    }

    /// Sampled `max sqrt(|y(t)|² + 1)`, the norm of `(y, u)` used for affine fields.
    pub fn augmented_sup_norm(&self, a: f64, b: f64, n: usize) -> Result<f64> {
        self.sup_by(a, b, n, |y| (y.norm_squared() + 1.0).sqrt())
    }

    fn sup_by<N: Fn(&DVector<f64>) -> f64>(&self, a: f64, b: f64, n: usize, norm: N) -> Result<f64> {
        let mut best = 0.0f64;
        let n = n.max(1);
        for i in 0..=n {
            let t = a + (b - a) * i as f64 / n as f64;
            best = best.max(norm(&self.eval(t)?));
        }
        for s in &self.switches {
            if s.time >= a && s.time <= b {
                best = best.max(norm(&self.eval(s.time)?));
            }
        }
        Ok(best)
    }
}

enum Recorder {
    Exact(BreakpointPath),
    Sampled { times: Vec<f64>, values: Vec<DVector<f64>>, slopes: Vec<DVector<f64>> },
}

impl Recorder {
    fn new(flow: &dyn Flow, y0: &DVector<f64>, u: Relay) -> Self {
        if flow.is_exact() {
            Recorder::Exact(BreakpointPath::single(0.0, y0.clone(), u))
        } else {
            Recorder::Sampled { times: vec![0.0], values: vec![y0.clone()], slopes: vec![flow.field(y0, u)] }
        }
    }

    fn knot(&mut self, flow: &dyn Flow, t: f64, y: &DVector<f64>, u: Relay) {
        if let Recorder::Sampled { times, values, slopes } = self {
            if times.last() == Some(&t) {
                return;
            }
            times.push(t);
            values.push(y.clone());
            slopes.push(flow.field(y, u));
        }
    }

    fn switch(&mut self, flow: &dyn Flow, t: f64, y: &DVector<f64>, u: Relay) {
        match self {
            Recorder::Exact(p) => p.push_piece(t, y.clone(), u),
            Recorder::Sampled { times, values, slopes } => {
                // duplicate knot with the new slope marks the kink
                times.push(t);
                values.push(y.clone());
                slopes.push(flow.field(y, u));
            }
        }
    }

    fn finish(self, end: f64) -> Result<PathRepr> {
        Ok(match self {
            Recorder::Exact(mut p) => {
                p.set_end(end);
                PathRepr::Breakpoints(p)
            }
            Recorder::Sampled { times, values, slopes } => PathRepr::Samples(SampledPath::hermite(times, values, slopes)?),
        })
    }
}

impl RelaySystem {
    /// Forward evolution `E^T(ξ, u)`.
    ///
    /// Crossings are located by monitoring `h(y) ∓ ε` on steps of at most
    /// the flow's monitor step and refined to `root_tol`; each crossing
    /// schedules a switch `τ` later and the integration stops exactly at
    /// scheduled switches.
    pub fn evolve(&self, state: &HybridState, duration: f64) -> Result<(HybridState, Trajectory)> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidParameter(format!("evolution time must be positive, got {duration}")));
        }
        let horizon = state.history.horizon;
        if horizon < self.tau * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "history horizon {horizon} shorter than the delay {}",
                self.tau
            )));
        }
        let flow = &*self.flow;
        let tau = self.tau;
        let hist = &state.history;
        let opts = ScanOptions { max_step: flow.monitor_step(), tol: self.root_tol };

        // relay output on the history window gives u(0) and the pending switches
        let signal = |s: f64| hist.eval(flow, s).map(|y| self.h(&y)).unwrap_or(f64::NAN);
        let mut relay = Hysteron::start(self.epsilon, state.u, signal(-tau));
        let u_start = relay.state;
        let mut crossings = Vec::new();
        let mut pending: VecDeque<(f64, Relay, f64)> = VecDeque::new();
        let mut history_events = Vec::new();
        scan(&signal, -tau, 0.0, &mut relay, opts, |c, r| history_events.push((c, r)));
        for (c, r) in history_events {
            let rate = self.history_rate(hist, c)?;
            if !rate.is_finite() || rate.abs() < self.tangency_tol {
                return Err(Error::DegenerateCrossing { t: c, rate });
            }
            crossings.push(Crossing { time: c, line: line_of(r), direction: rate.signum() });
            pending.push_back((c + tau, r, c));
        }

        let mut u = u_start;
        let mut t = 0.0;
        let mut y = hist.headpoint(flow)?;
        let mut recorder = Recorder::new(flow, &y, u);
        let mut switches = Vec::new();
        let mut u_path = vec![(0.0, u)];

        while t < duration {
            let mut target = pending.front().map_or(duration, |p| p.0.min(duration));
            let mut g = relay.trigger(self.h(&y));
            while t < target {
                let step = opts.max_step;
                let te = if target - t <= step * 1.000001 { target } else { t + step };
                let ye = flow.advance(&y, u, te - t)?;
                let ge = relay.trigger(self.h(&ye));
                if ge >= 0.0 {
                    let (y_lo, t_lo, r) = (y.clone(), t, relay);
                    let trig = |s: f64| match flow.advance(&y_lo, u, s - t_lo) {
                        Ok(z) => r.trigger(self.h(&z)),
                        Err(_) => f64::NAN,
                    };
                    let c = refine_bracket(trig, t, te, g, ge, self.root_tol);
                    let yc = flow.advance(&y, u, c - t)?;
                    let rate = self.h_rate(&yc, u)?;
                    if rate.abs() < self.tangency_tol {
                        return Err(Error::DegenerateCrossing { t: c, rate });
                    }
                    let new = relay.toggle();
                    crossings.push(Crossing { time: c, line: line_of(new), direction: rate.signum() });
                    pending.push_back((c + tau, new, c));
                    recorder.knot(flow, c, &yc, u);
                    t = c;
                    y = yc;
                    g = relay.trigger(self.h(&y));
                    target = target.min(c + tau);
                    continue;
                }
                recorder.knot(flow, te, &ye, u);
                t = te;
                y = ye;
                g = ge;
            }
            while let Some(&(ts, r, c)) = pending.front() {
                if ts > t {
                    break;
                }
                pending.pop_front();
                if r != u {
                    u = r;
                    switches.push(Switch { time: ts, u, crossing: c });
                    u_path.push((ts, u));
                    recorder.switch(flow, ts, &y, u);
                }
            }
        }

        let mut path = hist.path.clone();
        path.append(recorder.finish(duration)?);
        let new_history = path.window(flow, duration - horizon, duration)?.shifted(-duration);
        // u(T) is the relay output at T - τ, which is what the next run starts from
        let next = HybridState { history: HistorySegment { horizon, path: new_history }, u };
        let traj = Trajectory { flow: self.flow.clone(), path, duration, crossings, switches, u_path };
        Ok((next, traj))
    }

    fn history_rate(&self, hist: &HistorySegment, c: f64) -> Result<f64> {
        let flow = &*self.flow;
        let d = hist.path.derivative(flow, c)?;
        let y = hist.eval(flow, c)?;
        let right = self.switching.checked_gradient(&y)?.dot(&d);
        if c > -hist.horizon {
            // use the left derivative too: at a kink both sides must be transversal
            let dl = hist.path.derivative(flow, c - 1e-9 * c.abs().max(1.0))?;
            let left = self.switching.gradient(&y).dot(&dl);
            if left.signum() != right.signum() {
                return Ok(0.0);
            }
            return Ok(if left.abs() < right.abs() { left } else { right });
        }
        Ok(right)
    }
}

fn line_of(new: Relay) -> Line {
    // switching to -1 happens on the upper line h = ε
    match new {
        Relay::Minus => Line::Upper,
        Relay::Plus => Line::Lower,
    }
}
