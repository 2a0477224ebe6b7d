use nalgebra::{DVector, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{iterate_attractor, Envelope, IterateOptions};
use crate::continuation::{newton_pinned, CollidingFamily, NewtonOptions, NsProblem};
use crate::error::{Error, Result};
use crate::oscillator::{collision_alpha, collision_point, OscillatorParams};

/// Regions around the NSC point, in the order met when moving from the
/// collision curve of `L` towards the Neimark–Sacker curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// Beyond the collision of `L`: a single stable fixed point.
    D,
    /// Invariant polygons visiting `D+` and `D-`.
    C,
    /// Smooth invariant curve in `D-`.
    B,
    /// `L` stable in `D-`.
    A,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::D => "d",
            Region::C => "c",
            Region::B => "b",
            Region::A => "a",
        }
    }
}

/// Values of `α` where a sweep at fixed `τ` crosses the collision curve of `L`
/// (SPC), the colliding family (ICC) and the Neimark–Sacker curve (NS).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    pub spc: f64,
    pub icc: Option<f64>,
    pub ns: Option<f64>,
}

impl Landmarks {
    /// SPC from the collision surface, NS by a Newton solve at fixed `τ`,
    /// ICC by interpolating `family` in `τ`.
    pub fn compute(zeta: f64, tau: f64, epsilon: f64, alpha_hint: f64, family: Option<&CollidingFamily>) -> Result<Self> {
        let spc = collision_alpha(zeta, tau, epsilon, alpha_hint)?;
        let y = collision_point(zeta, tau)?;
        let z = DVector::from_vec(vec![y[0], y[1], 0.0, tau, spc]);
        let ns = newton_pinned(&NsProblem { zeta, epsilon }, &z, 3, &NewtonOptions::default()).ok().map(|r| r.z[4]);
        let icc = family.and_then(|f| {
            let pts = &f.branch.points;
            pts.windows(2).find_map(|w| {
                let (t0, a0) = (w[0].parameters[0], w[0].parameters[1]);
                let (t1, a1) = (w[1].parameters[0], w[1].parameters[1]);
                ((t0 - tau) * (t1 - tau) <= 0.0 && t0 != t1).then(|| a0 + (a1 - a0) * (tau - t0) / (t1 - t0))
            })
        });
        Ok(Self { spc, icc, ns })
    }

    pub fn region(&self, alpha: f64) -> Region {
        let toward = self.ns.or(self.icc).map_or(1.0, |a| (a - self.spc).signum());
        let u = toward * (alpha - self.spc);
        if u < 0.0 {
            return Region::D;
        }
        match (self.icc, self.ns) {
            (Some(icc), _) if u < toward * (icc - self.spc) => Region::C,
            (None, Some(ns)) if u >= toward * (ns - self.spc) => Region::A,
            (None, _) => Region::C,
            (Some(_), Some(ns)) if u < toward * (ns - self.spc) => Region::B,
            (Some(_), Some(_)) => Region::A,
            (Some(_), None) => Region::B,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub zeta: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub alpha_start: f64,
    pub alpha_end: f64,
    /// Number of `α` values, endpoints included.
    pub steps: usize,
    pub warm_start: bool,
    pub iterate: IterateOptions,
    /// Number of trailing samples kept per record.
    pub keep: usize,
    /// Start of the first run (and of every run without warm start);
    /// defaults to a point next to the collision point.
    pub y_start: Option<Vector2<f64>>,
}

impl SweepSpec {
    pub fn alpha(&self, i: usize) -> f64 {
        if self.steps <= 1 {
            self.alpha_start
        } else {
            self.alpha_start + (self.alpha_end - self.alpha_start) * i as f64 / (self.steps - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub envelope: Envelope,
    pub samples: Vec<Vector2<f64>>,
    pub visited_plus: bool,
    pub visited_minus: bool,
    /// The orbit escaped the working neighbourhood; the envelope is empty.
    pub escaped: bool,
    pub region: Option<Region>,
}

fn run_one(spec: &SweepSpec, alpha: f64, y0: Vector2<f64>, marks: Option<&Landmarks>) -> Result<(SweepRecord, Option<Vector2<f64>>)> {
    let params = OscillatorParams::new(spec.zeta, spec.tau, spec.epsilon, alpha)?;
    let ctx = params.context()?;
    let region = marks.map(|m| m.region(alpha));
    match iterate_attractor(&ctx, y0, &spec.iterate) {
        Ok(run) => {
            let skip = run.samples.len().saturating_sub(spec.keep);
            Ok((
                SweepRecord {
                    alpha,
                    envelope: run.envelope,
                    samples: run.samples[skip..].to_vec(),
                    visited_plus: run.visited_plus,
                    visited_minus: run.visited_minus,
                    escaped: false,
                    region,
                },
                Some(run.next),
            ))
        }
        Err(Error::LeftNeighborhood { .. }) => Ok((
            SweepRecord {
                alpha,
                envelope: Envelope::of(&[]),
                samples: Vec::new(),
                visited_plus: false,
                visited_minus: false,
                escaped: true,
                region,
            },
            None,
        )),
        Err(e) => Err(e),
    }
}

/// Envelopes of the attractor of `F` along a line in `α`.
///
/// With warm start each run begins at the last iterate of the previous one
/// (or at `y_start` after an escape); without it the runs are independent
/// and are computed in parallel.
pub fn sweep(spec: &SweepSpec, landmarks: Option<&Landmarks>) -> Result<Vec<SweepRecord>> {
    if spec.steps == 0 {
        return Ok(Vec::new());
    }
    let start = match spec.y_start {
        Some(y) => y,
        None => collision_point(spec.zeta, spec.tau)? + Vector2::new(1e-3, 0.0),
    };
    if !spec.warm_start {
        return (0..spec.steps)
            .into_par_iter()
            .map(|i| run_one(spec, spec.alpha(i), start, landmarks).map(|(r, _)| r))
            .collect();
    }
    let mut out = Vec::with_capacity(spec.steps);
    let mut y = start;
    for i in 0..spec.steps {
        let (rec, next) = run_one(spec, spec.alpha(i), y, landmarks)?;
        y = next.unwrap_or(start);
        out.push(rec);
    }
    Ok(out)
}
