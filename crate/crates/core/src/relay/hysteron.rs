use serde::{Deserialize, Serialize};

use super::Relay;
use crate::roots::refine_bracket;

/// Switching line of a crossing: `h = +ε` or `h = -ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Line {
    Upper,
    Lower,
}

/// Relay with hysteresis acting on a scalar signal.
///
/// Output is `-1` while the signal is `>= ε`, `+1` while it is `<= -ε`, and
/// holds its previous value inside the dead band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hysteron {
    pub epsilon: f64,
    pub state: Relay,
}

impl Hysteron {
    /// Initial output for signal value `value` and held state `u0`.
    pub fn start(epsilon: f64, u0: Relay, value: f64) -> Self {
        let state = Self::forced(epsilon, value).unwrap_or(u0);
        Self { epsilon, state }
    }

    /// Output imposed by `value`, if it lies outside the dead band.
    pub fn forced(epsilon: f64, value: f64) -> Option<Relay> {
        if value >= epsilon {
            Some(Relay::Minus)
        } else if value <= -epsilon {
            Some(Relay::Plus)
        } else {
            None
        }
    }

    /// Signed distance to the next switch; the switch fires when this is `>= 0`.
    pub fn trigger(&self, value: f64) -> f64 {
        match self.state {
            Relay::Plus => value - self.epsilon,
            Relay::Minus => -value - self.epsilon,
        }
    }

    /// Line the output is currently waiting for.
    pub fn watched_line(&self) -> Line {
        match self.state {
            Relay::Plus => Line::Upper,
            Relay::Minus => Line::Lower,
        }
    }

    pub fn toggle(&mut self) -> Relay {
        self.state = self.state.flip();
        self.state
    }
}

/// Options for scanning a signal for relay switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub max_step: f64,
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { max_step: 1e-2, tol: 1e-12 }
    }
}

/// Output of [`hysteron`]: the value at the left end and the switches.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayOutput {
    pub initial: Relay,
    /// `(time, new value)`, strictly increasing in time.
    pub switches: Vec<(f64, Relay)>,
}

impl RelayOutput {
    /// Right-continuous output at `t`.
    pub fn at(&self, t: f64) -> Relay {
        let k = self.switches.partition_point(|&(s, _)| s <= t);
        if k == 0 {
            self.initial
        } else {
            self.switches[k - 1].1
        }
    }
}

/// Applies the relay to a continuous signal on `[a, b]`.
///
/// Switch times are located by monitoring the trigger function on a grid of
/// at most `opts.max_step` and refining each sign change to `|g| <= opts.tol`.
pub fn hysteron<S>(signal: S, a: f64, b: f64, u0: Relay, epsilon: f64, opts: ScanOptions) -> RelayOutput
where
    S: Fn(f64) -> f64,
{
    let mut relay = Hysteron::start(epsilon, u0, signal(a));
    let initial = relay.state;
    let mut switches = Vec::new();
    scan(&signal, a, b, &mut relay, opts, |t, r| switches.push((t, r)));
    RelayOutput { initial, switches }
}

/// Scans `(a, b]` for switches of `relay`, calling `on_switch` for each.
pub(crate) fn scan<S, C>(signal: &S, a: f64, b: f64, relay: &mut Hysteron, opts: ScanOptions, mut on_switch: C)
where
    S: Fn(f64) -> f64,
    C: FnMut(f64, Relay),
{
    if b <= a {
        return;
    }
    let mut t = a;
    let mut g = relay.trigger(signal(a));
    while t < b {
        let te = if b - t <= opts.max_step * 1.000001 { b } else { t + opts.max_step };
        let ge = relay.trigger(signal(te));
        if ge >= 0.0 {
            let r = *relay;
            let c = refine_bracket(|s| r.trigger(signal(s)), t, te, g, ge, opts.tol);
            let new = relay.toggle();
            on_switch(c, new);
            t = c;
            g = relay.trigger(signal(c));
            continue;
        }
        t = te;
        g = ge;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dead_band_holds_value() {
        let out = hysteron(|_| 0.0, 0.0, 5.0, Relay::Plus, 0.1, ScanOptions::default());
        assert_eq!(out.initial, Relay::Plus);
        assert!(out.switches.is_empty());
    }

    #[test]
    fn boundary_value_counts_as_switched() {
        let out = hysteron(|_| 0.1, 0.0, 5.0, Relay::Plus, 0.1, ScanOptions::default());
        assert_eq!(out.initial, Relay::Minus);
        assert!(out.switches.is_empty());
        assert_eq!(out.at(0.0), Relay::Minus);
    }

    #[test]
    fn sine_switches_match_bisection_oracle() {
        let eps = 0.1;
        let out = hysteron(f64::sin, 0.0, 4.0 * PI, Relay::Plus, eps, ScanOptions::default());
        // independent oracle: plain bisection on sin(s) = ±ε in hand-picked brackets
        let bisect = |target: f64, mut lo: f64, mut hi: f64| {
            let g = |s: f64| s.sin() - target;
            let glo = g(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid).signum() == glo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let expected = [
            (bisect(eps, 0.0, 0.5 * PI), Relay::Minus),
            (bisect(-eps, PI, 1.5 * PI), Relay::Plus),
            (bisect(eps, 2.0 * PI, 2.5 * PI), Relay::Minus),
            (bisect(-eps, 3.0 * PI, 3.5 * PI), Relay::Plus),
        ];
        assert_eq!(out.switches.len(), 4);
        for (got, want) in out.switches.iter().zip(expected.iter()) {
            assert!((got.0 - want.0).abs() < 1e-11, "{got:?} vs {want:?}");
            assert_eq!(got.1, want.1);
        }
    }

    #[test]
    fn output_is_right_continuous() {
        let out = hysteron(f64::sin, 0.0, 4.0, Relay::Plus, 0.5, ScanOptions::default());
        let (s, r) = out.switches[0];
        assert_eq!(out.at(s), r);
        assert_eq!(out.at(s - 1e-9), Relay::Plus);
    }
}
