use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PolygonArcs, PolygonDescription, Region, SweepRecord};
use crate::error::Result;

/// One line of a sweep file. Escaped runs carry the empty envelope (`min = inf`, `max = -inf`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub env_min_x: f64,
    pub env_max_x: f64,
    pub env_min_xdot: f64,
    pub env_max_xdot: f64,
    pub visited_plus: bool,
    pub visited_minus: bool,
    pub escaped: bool,
    pub region: Option<Region>,
}

pub fn write_sweep_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in records {
        w.serialize(SweepRow {
            alpha: r.alpha,
            env_min_x: r.envelope.min[0],
            env_max_x: r.envelope.max[0],
            env_min_xdot: r.envelope.min[1],
            env_max_xdot: r.envelope.max[1],
            visited_plus: r.visited_plus,
            visited_minus: r.visited_minus,
            escaped: r.escaped,
            region: r.region,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    read_rows(path)
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolygonRow {
    pub phi: f64,
    pub phi_next: f64,
    pub x: f64,
    pub xdot: f64,
    pub arc_id: Option<usize>,
}

/// One row per orbit sample: its angle, the angle of its image, the point and its arc.
pub fn write_polygon_csv(
    samples: &[nalgebra::Vector2<f64>],
    description: &PolygonDescription,
    arcs: Option<&PolygonArcs>,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for (k, p) in samples.iter().enumerate() {
        let d = p - description.centroid;
        let angle = d[1].atan2(d[0]).rem_euclid(std::f64::consts::TAU);
        let next = description.pairs.get(k).map_or(f64::NAN, |pair| pair.1);
        w.serialize(PolygonRow { phi: angle, phi_next: next, x: p[0], xdot: p[1], arc_id: arcs.and_then(|a| a.age.get(k).copied().flatten()) })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_polygon_csv(path: &Path) -> Result<Vec<PolygonRow>> {
    read_rows(path)
}
