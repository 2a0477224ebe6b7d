use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path as FsPath;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::evolve::{Crossing, Switch, Trajectory};
use super::Relay;
use crate::error::{Error, Result};

/// JSON sidecar of a trajectory's events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFile {
    pub duration: f64,
    pub crossings: Vec<Crossing>,
    pub switches: Vec<Switch>,
}

/// Writes `t, y_1..y_n, u` rows for `n + 1` uniform samples on `[0, T]`
/// plus both sides of every switch.
pub fn write_trajectory_csv(traj: &Trajectory, samples: usize, path: &FsPath) -> Result<()> {
    let mut rows: Vec<(f64, DVector<f64>, Relay)> = Vec::new();
    for (t, y) in traj.sample(samples)? {
        rows.push((t, y, traj.u_at(t)));
    }
    for s in &traj.switches {
        let y = traj.eval(s.time)?;
        rows.push((s.time, y.clone(), s.u.flip()));
        rows.push((s.time, y, s.u));
    }
    // stable sort keeps the pre-switch row first
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dim = rows.first().map_or(0, |r| r.1.len());
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["t".to_string()];
    header.extend((1..=dim).map(|i| format!("y_{i}")));
    header.push("u".into());
    w.write_record(&header)?;
    for (t, y, u) in rows {
        let mut rec = vec![format!("{t:.17e}")];
        rec.extend(y.iter().map(|v| format!("{v:.17e}")));
        rec.push(u.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_trajectory_csv`].
pub fn read_trajectory_csv(path: &FsPath) -> Result<Vec<(f64, DVector<f64>, Relay)>> {
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Io(format!("bad number {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() < 3 {
            return Err(Error::Io("trajectory row too short".into()));
        }
        let u = Relay::from_sign(vals[vals.len() - 1])?;
        out.push((vals[0], DVector::from_column_slice(&vals[1..vals.len() - 1]), u));
    }
    Ok(out)
}

pub fn write_events(traj: &Trajectory, path: &FsPath) -> Result<()> {
    let ev = EventFile { duration: traj.duration, crossings: traj.crossings.clone(), switches: traj.switches.clone() };
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, &ev)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_events(path: &FsPath) -> Result<EventFile> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
