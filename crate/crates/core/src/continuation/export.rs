use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fourier::FourierCurve;
use super::{Branch, BranchPoint, Termination};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Point(BranchPoint),
    End { termination: Termination },
}

/// One JSON object per branch point, closed by a line with the termination reason.
pub fn write_branch_jsonl(branch: &Branch, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in &branch.points {
        serde_json::to_writer(&mut w, &Line::Point(p.clone()))?;
        w.write_all(b"\n")?;
    }
    serde_json::to_writer(&mut w, &Line::End { termination: branch.termination.clone() })?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_branch_jsonl(path: &Path) -> Result<Branch> {
    let mut points = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line)? {
            Line::Point(p) => points.push(p),
            Line::End { termination } => return Ok(Branch { points, termination }),
        }
    }
    Err(Error::Io(format!("{}: missing termination line", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSampleRow {
    pub phi: f64,
    pub r: f64,
    pub eta: f64,
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
}

/// Samples `(φ, r, η, t, x, ẋ)` of a curve at `samples` equispaced angles.
pub fn write_curve_csv(curve: &FourierCurve, samples: usize, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for k in 0..samples {
        let phi = TAU * k as f64 / samples as f64;
        let y = curve.point(phi);
        w.serialize(CurveSampleRow { phi, r: curve.r_at(phi), eta: curve.eta(phi), t: curve.t_at(phi).0, x: y[0], xdot: y[1] })?;
    }
    w.flush()?;
    Ok(())
}
