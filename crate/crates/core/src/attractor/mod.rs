//! Attractors of the reduced map by brute-force iteration: envelopes,
//! parameter sweeps, circle maps and arc structure of invariant polygons.

mod circle_map;
mod export;
mod sweep;

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduced_map::{CollisionContext, DomainTag};

pub use circle_map::{extract_circle_map, polygon_arcs, turning_corners, PolygonArcs, PolygonDescription};
pub use export::{read_polygon_csv, read_sweep_csv, write_polygon_csv, write_sweep_csv, PolygonRow, SweepRow};
pub use sweep::{sweep, Landmarks, Region, SweepRecord, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterateOptions {
    /// Iterates before this index are discarded.
    pub n_transient: usize,
    pub n_total: usize,
}

impl Default for IterateOptions {
    fn default() -> Self {
        Self { n_transient: 40, n_total: 400 }
    }
}

/// Coordinatewise bounds of a set of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Envelope {
    pub fn of(points: &[Vector2<f64>]) -> Self {
        let mut e = Envelope { min: [f64::INFINITY; 2], max: [f64::NEG_INFINITY; 2] };
        for p in points {
            for k in 0..2 {
                e.min[k] = e.min[k].min(p[k]);
                e.max[k] = e.max[k].max(p[k]);
            }
        }
        e
    }

    pub fn width(&self, k: usize) -> f64 {
        self.max[k] - self.min[k]
    }

    /// Larger of the two coordinate widths.
    pub fn max_width(&self) -> f64 {
        self.width(0).max(self.width(1))
    }
}

/// Largest pairwise distance.
pub fn diameter(points: &[Vector2<f64>]) -> f64 {
    let mut d = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

/// Orbit window of `F` after the transient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorRun {
    /// Iterates `n_transient..n_total`.
    pub samples: Vec<Vector2<f64>>,
    /// Domain of each sample, which selects the branch of `F` applied to it.
    pub tags: Vec<DomainTag>,
    pub envelope: Envelope,
    pub visited_plus: bool,
    pub visited_minus: bool,
    /// `F` of the last sample, for warm starts.
    pub next: Vector2<f64>,
}

/// Iterates `F` from `y0` and records iterates `n_transient..n_total`.
pub fn iterate_attractor(ctx: &CollisionContext, y0: Vector2<f64>, opts: &IterateOptions) -> Result<AttractorRun> {
    if opts.n_transient >= opts.n_total {
        return Err(Error::InvalidParameter(format!(
            "transient {} must be shorter than the run {}",
            opts.n_transient, opts.n_total
        )));
    }
    let mut y = DVector::from_column_slice(y0.as_slice());
    let mut samples = Vec::with_capacity(opts.n_total - opts.n_transient);
    let mut tags = Vec::with_capacity(samples.capacity());
    for j in 0..opts.n_total {
        let (tag, next) = ctx.step(&y).map_err(|e| match e {
            Error::OutsideNeighborhood { .. } => Error::LeftNeighborhood { iteration: j },
            other => other,
        })?;
        if j >= opts.n_transient {
            samples.push(Vector2::new(y[0], y[1]));
            tags.push(tag);
        }
        y = next;
    }
    Ok(AttractorRun {
        envelope: Envelope::of(&samples),
        visited_plus: tags.contains(&DomainTag::DPlus),
        visited_minus: tags.contains(&DomainTag::DMinus),
        samples,
        tags,
        next: Vector2::new(y[0], y[1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::solve_fixed_point;
    use crate::oscillator::{collision_point, OscillatorParams};

    #[test]
    fn envelope_and_diameter_bounds() {
        let pts: Vec<_> = (0..50).map(|k| Vector2::new((k as f64 * 0.7).cos(), 0.5 * (k as f64 * 0.7).sin())).collect();
        let e = Envelope::of(&pts);
        let d = diameter(&pts);
        assert!(e.max_width() <= d + 1e-15);
        assert!(d <= 2f64.sqrt() * e.max_width());
    }

    #[test]
    fn stable_fixed_point_has_zero_width() {
        // region (a): L lies in D- and is linearly stable
        let params = OscillatorParams::new(-0.1, 4.0, 0.1, -0.45).unwrap();
        let y = collision_point(-0.1, 4.0).unwrap();
        let rep = solve_fixed_point(&params, y, 0.0).unwrap();
        let y0 = Vector2::new(rep.z[0], rep.z[1]);
        let ctx = params.context().unwrap();
        let run = iterate_attractor(&ctx, y0, &IterateOptions::default()).unwrap();
        assert!(run.envelope.max_width() < 1e-10);
        assert!(run.visited_minus && !run.visited_plus);
    }

    #[test]
    fn escaping_orbits_are_reported() {
        let params = OscillatorParams::new(-0.1, 4.2, 0.1, -0.44).unwrap();
        let ctx = params.context().unwrap().with_radius(1e-3);
        let y = collision_point(-0.1, 4.2).unwrap() + Vector2::new(5e-4, 0.0);
        let r = iterate_attractor(&ctx, y, &IterateOptions::default());
        assert!(matches!(r, Err(Error::LeftNeighborhood { .. })));
    }
}
