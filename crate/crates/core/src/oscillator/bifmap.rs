//! Bifurcation curves of `F±` projected onto the collision surface.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{collision_epsilon, stability_at, CollisionStability};

/// Test function whose zero set forms a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BifurcationKind {
    /// `λ₊ = 1`.
    FoldPlus,
    /// `λ₊ = -1`.
    FlipPlus,
    /// `det(I - DF-) = 0`.
    FoldMinus,
    /// `det(I + DF-) = 0`.
    FlipMinus,
    /// `det DF- = 1` with `|tr DF-| < 2`.
    NeimarkSacker,
}

impl BifurcationKind {
    pub const ALL: [BifurcationKind; 5] = [
        BifurcationKind::FoldPlus,
        BifurcationKind::FlipPlus,
        BifurcationKind::FoldMinus,
        BifurcationKind::FlipMinus,
        BifurcationKind::NeimarkSacker,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BifurcationKind::FoldPlus => "fold_plus",
            BifurcationKind::FlipPlus => "flip_plus",
            BifurcationKind::FoldMinus => "fold_minus",
            BifurcationKind::FlipMinus => "flip_minus",
            BifurcationKind::NeimarkSacker => "ns_minus",
        }
    }

    pub fn test_value(self, s: &CollisionStability) -> f64 {
        match self {
            BifurcationKind::FoldPlus => s.fold_plus(),
            BifurcationKind::FlipPlus => s.flip_plus(),
            BifurcationKind::FoldMinus => s.fold_minus(),
            BifurcationKind::FlipMinus => s.flip_minus(),
            BifurcationKind::NeimarkSacker => s.ns_minus(),
        }
    }

    fn admissible(self, s: &CollisionStability) -> bool {
        match self {
            BifurcationKind::NeimarkSacker => s.trace_minus.abs() < 2.0,
            _ => true,
        }
    }
}

/// Codimension-two points located along the curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpecialTag {
    /// Eigenvalues `-1, -1` on the Neimark–Sacker curve.
    Resonance12,
    /// Eigenvalues `exp(±2πi/3)`.
    Resonance13,
    /// Eigenvalues `±i`.
    Resonance14,
    /// Eigenvalues `-1` and `+1` together.
    PdSn,
}

impl SpecialTag {
    pub fn label(self) -> &'static str {
        match self {
            SpecialTag::Resonance12 => "1:2",
            SpecialTag::Resonance13 => "1:3",
            SpecialTag::Resonance14 => "1:4",
            SpecialTag::PdSn => "PD-SN",
        }
    }
}

/// One point of a bifurcation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Value of the curve's test function at the point.
    pub residual: f64,
    pub trace_minus: f64,
    pub det_minus: f64,
    pub lambda_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialPoint {
    pub tag: SpecialTag,
    pub point: CurvePoint,
}

/// Uniform grid over `(τ, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_tau: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub n_alpha: usize,
}

impl GridSpec {
    pub fn tau(&self, i: usize) -> f64 {
        self.tau_min + (self.tau_max - self.tau_min) * i as f64 / (self.n_tau - 1) as f64
    }
    pub fn alpha(&self, j: usize) -> f64 {
        self.alpha_min + (self.alpha_max - self.alpha_min) * j as f64 / (self.n_alpha - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationMap {
    pub zeta: f64,
    pub grid: GridSpec,
    /// Polylines per kind.
    pub curves: Vec<(BifurcationKind, Vec<Vec<CurvePoint>>)>,
    pub special: Vec<SpecialPoint>,
}

impl BifurcationMap {
    pub fn polylines(&self, kind: BifurcationKind) -> &[Vec<CurvePoint>] {
        self.curves.iter().find(|(k, _)| *k == kind).map_or(&[], |(_, c)| c.as_slice())
    }

    pub fn points(&self, kind: BifurcationKind) -> impl Iterator<Item = &CurvePoint> {
        self.polylines(kind).iter().flatten()
    }
}

fn evaluate(zeta: f64, tau: f64, alpha: f64) -> Option<(f64, CollisionStability)> {
    let eps = collision_epsilon(zeta, tau, alpha).ok()?;
    let s = stability_at(zeta, tau, alpha).ok()?;
    (s.g_plus * s.g_minus > 0.0).then_some((eps, s))
}

fn point(zeta: f64, kind: BifurcationKind, tau: f64, alpha: f64) -> Option<CurvePoint> {
    let (epsilon, s) = evaluate(zeta, tau, alpha)?;
    Some(CurvePoint {
        tau,
        alpha,
        epsilon,
        residual: kind.test_value(&s),
        trace_minus: s.trace_minus,
        det_minus: s.det_minus,
        lambda_plus: s.lambda_plus,
    })
}

/// Root of `kind`'s test function on the segment `a → b` by bisection.
fn bisect_segment(zeta: f64, kind: BifurcationKind, a: (f64, f64), b: (f64, f64), fa: f64) -> Option<CurvePoint> {
    let lerp = |s: f64| (a.0 + (b.0 - a.0) * s, a.1 + (b.1 - a.1) * s);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (t, al) = lerp(mid);
        let (_, s) = evaluate(zeta, t, al)?;
        let fm = kind.test_value(&s);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == fa.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // take the end with the smaller residual
    let pl = point(zeta, kind, lerp(lo).0, lerp(lo).1)?;
    let ph = point(zeta, kind, lerp(hi).0, lerp(hi).1)?;
    Some(if pl.residual.abs() <= ph.residual.abs() { pl } else { ph })
}

type EdgeKey = (usize, usize, u8);

/// Grid scan of the five test functions on the collision surface, with
/// sign changes refined along grid edges and joined cell by cell into
/// polylines. Only points with `ε > 0` are considered.
pub fn bifurcation_map(zeta: f64, grid: GridSpec) -> BifurcationMap {
    assert!(grid.n_tau >= 2 && grid.n_alpha >= 2, "grid needs at least 2×2 nodes");
    let nodes: Vec<Vec<Option<(f64, CollisionStability)>>> = (0..grid.n_tau)
        .into_par_iter()
        .map(|i| (0..grid.n_alpha).map(|j| evaluate(zeta, grid.tau(i), grid.alpha(j))).collect())
        .collect();

    let mut curves = Vec::new();
    let mut special = Vec::new();
    for kind in BifurcationKind::ALL {
        // edges: dir 0 along τ from (i, j) to (i+1, j), dir 1 along α to (i, j+1)
        let mut edges: Vec<(EdgeKey, (usize, usize), (usize, usize))> = Vec::new();
        for i in 0..grid.n_tau {
            for j in 0..grid.n_alpha {
                if i + 1 < grid.n_tau {
                    edges.push(((i, j, 0), (i, j), (i + 1, j)));
                }
                if j + 1 < grid.n_alpha {
                    edges.push(((i, j, 1), (i, j), (i, j + 1)));
                }
            }
        }
        let roots: HashMap<EdgeKey, CurvePoint> = edges
            .par_iter()
            .filter_map(|&(key, p, q)| {
                let (_, sp) = nodes[p.0][p.1]?;
                let (_, sq) = nodes[q.0][q.1]?;
                let (fa, fb) = (kind.test_value(&sp), kind.test_value(&sq));
                if fa.signum() == fb.signum() || fa == 0.0 {
                    return None;
                }
                let a = (grid.tau(p.0), grid.alpha(p.1));
                let b = (grid.tau(q.0), grid.alpha(q.1));
                let pt = bisect_segment(zeta, kind, a, b, fa)?;
                let (_, s) = evaluate(zeta, pt.tau, pt.alpha)?;
                (kind.admissible(&s) && pt.residual.abs() < 1e-8).then_some((key, pt))
            })
            .collect();
        let lines = join_cells(&grid, &roots);
        if kind == BifurcationKind::NeimarkSacker {
            for line in &lines {
                special.extend(ns_resonances(zeta, line));
            }
        }
        if kind == BifurcationKind::FlipMinus {
            for line in &lines {
                special.extend(pd_sn(zeta, line));
            }
        }
        curves.push((kind, lines));
    }
    BifurcationMap { zeta, grid, curves, special }
}

fn join_cells(grid: &GridSpec, roots: &HashMap<EdgeKey, CurvePoint>) -> Vec<Vec<CurvePoint>> {
    let mut adj: HashMap<EdgeKey, Vec<EdgeKey>> = HashMap::new();
    for i in 0..grid.n_tau.saturating_sub(1) {
        for j in 0..grid.n_alpha.saturating_sub(1) {
            let cell = [(i, j, 0), (i, j + 1, 0), (i, j, 1), (i + 1, j, 1)];
            let hit: Vec<EdgeKey> = cell.iter().copied().filter(|k| roots.contains_key(k)).collect();
            for pair in hit.chunks(2) {
                if let [a, b] = pair {
                    adj.entry(*a).or_default().push(*b);
                    adj.entry(*b).or_default().push(*a);
                }
            }
        }
    }
    let mut keys: Vec<EdgeKey> = roots.keys().copied().collect();
    keys.sort();
    let mut seen = std::collections::HashSet::new();
    let mut lines = Vec::new();
    // start at chain ends first so open curves come out in one piece
    let degree = |k: &EdgeKey| adj.get(k).map_or(0, |v| v.len());
    let mut starts: Vec<EdgeKey> = keys.iter().copied().filter(|k| degree(k) <= 1).collect();
    starts.extend(keys.iter().copied().filter(|k| degree(k) > 1));
    for start in starts {
        if seen.contains(&start) {
            continue;
        }
        let mut line = Vec::new();
        let mut cur = Some(start);
        while let Some(k) = cur {
            seen.insert(k);
            line.push(roots[&k]);
            cur = adj.get(&k).and_then(|nb| nb.iter().copied().find(|n| !seen.contains(n)));
        }
        lines.push(line);
    }
    lines
}

/// Refines a root of `target(point)` between two consecutive polyline points,
/// projecting each trial point back onto the curve along `α`.
fn locate_on_curve<F>(zeta: f64, kind: BifurcationKind, a: &CurvePoint, b: &CurvePoint, target: F) -> Option<CurvePoint>
where
    F: Fn(&CurvePoint) -> f64,
{
    let project = |s: f64| -> Option<CurvePoint> {
        let tau = a.tau + (b.tau - a.tau) * s;
        let alpha0 = a.alpha + (b.alpha - a.alpha) * s;
        // secant iteration on the test function in α
        let mut x0 = alpha0;
        let mut x1 = alpha0 + 1e-6;
        let mut f0 = point(zeta, kind, tau, x0)?.residual;
        for _ in 0..50 {
            let f1 = point(zeta, kind, tau, x1)?.residual;
            if f1.abs() < 1e-13 || f1 == f0 {
                break;
            }
            let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
            x0 = x1;
            f0 = f1;
            x1 = x2;
        }
        point(zeta, kind, tau, x1)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let fa = target(&project(lo)?);
    let fb = target(&project(hi)?);
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = target(&project(mid)?);
        if fm.signum() == fa.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    project(0.5 * (lo + hi))
}

fn ns_resonances(zeta: f64, line: &[CurvePoint]) -> Vec<SpecialPoint> {
    let targets = [
        (SpecialTag::Resonance12, PI),
        (SpecialTag::Resonance13, 2.0 * PI / 3.0),
        (SpecialTag::Resonance14, PI / 2.0),
    ];
    let angle = |p: &CurvePoint| (p.trace_minus / 2.0).clamp(-1.0, 1.0).acos();
    let mut out = Vec::new();
    for w in line.windows(2) {
        for (tag, theta) in targets {
            // 1:2 sits at tr = -2 where the angle stops being monotone; use the trace there
            let f = |p: &CurvePoint| {
                if tag == SpecialTag::Resonance12 {
                    p.trace_minus + 2.0
                } else {
                    angle(p) - theta
                }
            };
            if f(&w[0]).signum() != f(&w[1]).signum() {
                if let Some(point) = locate_on_curve(zeta, BifurcationKind::NeimarkSacker, &w[0], &w[1], f) {
                    if (angle(&point) - theta).abs() < 1e-3 {
                        out.push(SpecialPoint { tag, point });
                    }
                }
            }
        }
    }
    out
}

fn pd_sn(zeta: f64, line: &[CurvePoint]) -> Vec<SpecialPoint> {
    let mut out = Vec::new();
    for w in line.windows(2) {
        if w[0].trace_minus.signum() != w[1].trace_minus.signum() {
            if let Some(point) = locate_on_curve(zeta, BifurcationKind::FlipMinus, &w[0], &w[1], |p| p.trace_minus) {
                out.push(SpecialPoint { tag: SpecialTag::PdSn, point });
            }
        }
    }
    out
}
