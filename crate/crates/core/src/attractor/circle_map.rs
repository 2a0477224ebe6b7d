use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::diameter;
use crate::error::{Error, Result};
use crate::reduced_map::{CollisionContext, DomainTag};

/// An attractor on a closed curve, seen from its centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonDescription {
    /// Samples sorted by angle about the centroid.
    pub points: Vec<Vector2<f64>>,
    /// Angles in `[0, 2π)` of `points`.
    pub angles: Vec<f64>,
    pub centroid: Vector2<f64>,
    /// Indices into `points` where the turning angle is large.
    pub corners: Vec<usize>,
    pub arc_count: usize,
    /// `(φ_k, φ_{k+1})` along the orbit.
    pub pairs: Vec<(f64, f64)>,
    /// The sampled circle map is a strictly increasing degree-one map.
    pub monotone: bool,
    /// Smallest period `q ≤ 64` of the angle sequence, if it is periodic.
    pub locking_period: Option<usize>,
}

fn angle_of(d: Vector2<f64>) -> f64 {
    d[1].atan2(d[0]).rem_euclid(TAU)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Indices of a closed polyline whose turning angle exceeds ten times the median.
pub fn turning_corners(points: &[Vector2<f64>]) -> Vec<usize> {
    let m = points.len();
    if m < 3 {
        return Vec::new();
    }
    let turn: Vec<f64> = (0..m)
        .map(|i| {
            let a = points[i] - points[(i + m - 1) % m];
            let b = points[(i + 1) % m] - points[i];
            let cross = a[0] * b[1] - a[1] * b[0];
            cross.atan2(a.dot(&b)).abs()
        })
        .collect();
    let threshold = (10.0 * median(turn.clone())).max(1e-12);
    (0..m).filter(|&i| turn[i] > threshold).collect()
}

fn is_strictly_monotone(pairs: &[(f64, f64)]) -> bool {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // repeated inputs (periodic orbits) must have a single image
    let mut distinct: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        match distinct.last() {
            Some(q) if circular_distance(p.0, q.0) < 1e-9 => {
                if circular_distance(p.1, q.1) >= 1e-9 {
                    return false;
                }
            }
            _ => distinct.push(p),
        }
    }
    let m = distinct.len();
    if m < 2 {
        return false;
    }
    let mut descents = 0;
    for i in 0..m {
        let (a, b) = (distinct[i].1, distinct[(i + 1) % m].1);
        if (b - a).abs() < 1e-12 {
            return false;
        }
        if b < a {
            descents += 1;
        }
    }
    descents == 1
}

fn locking_period(angles: &[f64], max_q: usize, tol: f64) -> Option<usize> {
    (1..=max_q.min(angles.len() / 2)).find(|&q| (0..angles.len() - q).all(|k| circular_distance(angles[k + q], angles[k]) < tol))
}

/// Circle map of an orbit on a closed curve, in angles about the sample mean.
pub fn extract_circle_map(samples: &[Vector2<f64>]) -> Result<PolygonDescription> {
    if samples.len() < 200 {
        return Err(Error::InsufficientSamples(format!("{} samples, need at least 200", samples.len())));
    }
    let centroid = samples.iter().sum::<Vector2<f64>>() / samples.len() as f64;
    let dist: Vec<f64> = samples.iter().map(|p| (p - centroid).norm()).collect();
    let far = dist.iter().cloned().fold(0.0, f64::max);
    let near = dist.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(far > 1e-10 * (1.0 + centroid.norm())) {
        return Err(Error::InsufficientSamples(format!("orbit has collapsed to a point (spread {far:e})")));
    }
    if near <= 1e-9 * far {
        return Err(Error::CentroidOnCurve);
    }
    let orbit_angles: Vec<f64> = samples.iter().map(|p| angle_of(p - centroid)).collect();
    let pairs: Vec<(f64, f64)> = orbit_angles.windows(2).map(|w| (w[0], w[1])).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| orbit_angles[a].total_cmp(&orbit_angles[b]));
    let points: Vec<Vector2<f64>> = order.iter().map(|&i| samples[i]).collect();
    let angles: Vec<f64> = order.iter().map(|&i| orbit_angles[i]).collect();
    let corners = turning_corners(&points);
    Ok(PolygonDescription {
        arc_count: corners.len().max(1),
        monotone: is_strictly_monotone(&pairs),
        locking_period: locking_period(&orbit_angles, 64, 1e-6),
        points,
        angles,
        centroid,
        corners,
        pairs,
    })
}

/// Arc structure of an invariant polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonArcs {
    /// Iterations since the last visit of `D+`; `None` before the first visit.
    pub age: Vec<Option<usize>>,
    pub arc_count: usize,
    /// Two endpoints per arc, in increasing age.
    pub endpoints: Vec<[Vector2<f64>; 2]>,
}

/// Splits an orbit into arcs `F-^k(rg F+)` by the number `k` of steps since
/// the orbit last left `D+`. Samples must be consecutive iterates.
pub fn polygon_arcs(samples: &[Vector2<f64>], ctx: &CollisionContext) -> Result<PolygonArcs> {
    if samples.len() < 3 || diameter(samples) < 1e-9 {
        return Err(Error::InsufficientSamples("orbit is a single point".into()));
    }
    let tags: Vec<DomainTag> = samples.iter().map(|p| ctx.classify(&DVector::from_column_slice(p.as_slice()))).collect();
    if !tags.contains(&DomainTag::DPlus) {
        let ends = [samples[0], samples[0]];
        return Ok(PolygonArcs { age: vec![Some(0); samples.len()], arc_count: 1, endpoints: vec![ends] });
    }
    let mut age = Vec::with_capacity(samples.len());
    let mut current: Option<usize> = None;
    for j in 0..tags.len() {
        if j > 0 {
            current = if tags[j - 1] == DomainTag::DPlus { Some(0) } else { current.map(|a| a + 1) };
        }
        age.push(current);
    }
    let mut groups: BTreeMap<usize, Vec<Vector2<f64>>> = BTreeMap::new();
    for (p, a) in samples.iter().zip(&age) {
        if let Some(a) = a {
            groups.entry(*a).or_default().push(*p);
        }
    }
    let centroid = samples.iter().sum::<Vector2<f64>>() / samples.len() as f64;
    let endpoints = groups
        .values()
        .map(|pts| {
            let mut by_angle: Vec<(f64, Vector2<f64>)> = pts.iter().map(|p| (angle_of(p - centroid), *p)).collect();
            by_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
            let m = by_angle.len();
            // the arc's ends sit on either side of the largest angular gap
            let gap = |i: usize| (by_angle[(i + 1) % m].0 - by_angle[i].0).rem_euclid(TAU);
            let k = (0..m).max_by(|&a, &b| gap(a).total_cmp(&gap(b))).unwrap_or(0);
            if m == 1 || gap(k) < PI / 180.0 {
                [by_angle[0].1, by_angle[0].1]
            } else {
                [by_angle[(k + 1) % m].1, by_angle[k].1]
            }
        })
        .collect::<Vec<_>>();
    Ok(PolygonArcs { age, arc_count: groups.len(), endpoints })
}
