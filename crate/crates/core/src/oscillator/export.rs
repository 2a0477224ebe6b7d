use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bifmap::{BifurcationMap, GridSpec};
use super::{collision_epsilon, stability_at};
use crate::error::Result;

/// One node of the collision surface `ε(τ, α) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub tau: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub q: f64,
    pub lambda_plus: f64,
    pub trace_minus: f64,
    pub det_minus: f64,
    pub stable_plus: bool,
    pub stable_minus: bool,
}

impl SurfaceSample {
    /// Samples of the positive-`ε` sheet on `grid`, in row-major order.
    pub fn grid(zeta: f64, grid: &GridSpec) -> Vec<SurfaceSample> {
        let rows: Vec<Vec<SurfaceSample>> = (0..grid.n_tau)
            .into_par_iter()
            .map(|i| {
                (0..grid.n_alpha)
                    .filter_map(|j| {
                        let (tau, alpha) = (grid.tau(i), grid.alpha(j));
                        let epsilon = collision_epsilon(zeta, tau, alpha).ok()?;
                        let s = stability_at(zeta, tau, alpha).ok()?;
                        Some(SurfaceSample {
                            tau,
                            alpha,
                            epsilon,
                            q: s.g_plus * s.g_minus,
                            lambda_plus: s.lambda_plus,
                            trace_minus: s.trace_minus,
                            det_minus: s.det_minus,
                            stable_plus: s.stable_plus,
                            stable_minus: s.stable_minus,
                        })
                    })
                    .collect()
            })
            .collect();
        rows.into_iter().flatten().collect()
    }
}

pub fn write_surface_csv(samples: &[SurfaceSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_surface_csv(path: &Path) -> Result<Vec<SurfaceSample>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub kind: String,
    pub polyline: usize,
    pub tau: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub residual: f64,
    pub trace_minus: f64,
    pub det_minus: f64,
    pub lambda_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialRow {
    pub tag: String,
    pub tau: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub trace_minus: f64,
    pub det_minus: f64,
}

/// Contents of a directory written by [`write_bifmap`].
#[derive(Debug, Clone, PartialEq)]
pub struct BifmapFiles {
    pub curves: Vec<CurveRow>,
    pub special: Vec<SpecialRow>,
    pub manifest: serde_json::Value,
}

/// Writes `curves.csv`, `special.csv` and `bifmap.json` (ζ, grid and counts) into `dir`.
pub fn write_bifmap(map: &BifurcationMap, dir: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("curves.csv"))?));
    let mut counts = serde_json::Map::new();
    for (kind, lines) in &map.curves {
        let mut n = 0;
        for (id, line) in lines.iter().enumerate() {
            for p in line {
                n += 1;
                w.serialize(CurveRow {
                    kind: kind.label().into(),
                    polyline: id,
                    tau: p.tau,
                    alpha: p.alpha,
                    epsilon: p.epsilon,
                    residual: p.residual,
                    trace_minus: p.trace_minus,
                    det_minus: p.det_minus,
                    lambda_plus: p.lambda_plus,
                })?;
            }
        }
        counts.insert(kind.label().into(), n.into());
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("special.csv"))?));
    for s in &map.special {
        w.serialize(SpecialRow {
            tag: s.tag.label().into(),
            tau: s.point.tau,
            alpha: s.point.alpha,
            epsilon: s.point.epsilon,
            trace_minus: s.point.trace_minus,
            det_minus: s.point.det_minus,
        })?;
    }
    w.flush()?;
    let manifest = serde_json::json!({
        "zeta": map.zeta,
        "grid": map.grid,
        "points_per_curve": counts,
        "special_points": map.special.len(),
    });
    let mut f = BufWriter::new(File::create(dir.join("bifmap.json"))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_bifmap(dir: &Path) -> Result<BifmapFiles> {
    let mut curves = Vec::new();
    for rec in csv::Reader::from_reader(BufReader::new(File::open(dir.join("curves.csv"))?)).deserialize() {
        curves.push(rec?);
    }
    let mut special = Vec::new();
    for rec in csv::Reader::from_reader(BufReader::new(File::open(dir.join("special.csv"))?)).deserialize() {
        special.push(rec?);
    }
    let manifest = serde_json::from_reader(BufReader::new(File::open(dir.join("bifmap.json"))?))?;
    Ok(BifmapFiles { curves, special, manifest })
}
