use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hysteretic_relay::attractor::{
    extract_circle_map, iterate_attractor, polygon_arcs, sweep, write_polygon_csv, write_sweep_csv, IterateOptions, Landmarks, SweepSpec,
};
use hysteretic_relay::continuation::{
    continue_branch, continue_colliding_family, write_branch_jsonl, write_curve_csv, FamilyOptions, NewtonOptions,
    NsProblem, ResidualProblem, StepPolicy, Termination,
};
use hysteretic_relay::oscillator::{
    bifurcation_map, collision_alpha, collision_point, find_nsc, stability_at, write_bifmap, write_surface_csv, CollisionOrbit,
    OscillatorParams, SurfaceSample,
};
use hysteretic_relay::relay::{write_events, write_trajectory_csv};
use hysteretic_relay::{DomainTag, HistorySegment, HybridState, Relay, RelaySystem};
use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{HistoryKind, RunConfig};
use crate::error::CliError;

type CmdResult = Result<(), CliError>;

/// Output directory of one run; records every file written for the manifest.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    /// Creates `dir` and checks that it is writable.
    pub fn prepare(dir: &Path) -> Result<Self, CliError> {
        let fail = |e: std::io::Error| CliError::Config(format!("output directory {}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(fail)?;
        let probe = dir.join(".relay-write-check");
        File::create(&probe).map_err(fail)?;
        fs::remove_file(&probe).map_err(fail)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(name.to_string());
        Ok(p)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> CmdResult {
        let mut w = BufWriter::new(File::create(self.path(name)?)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Writes `manifest.json`: command, build id, effective configuration, files and results.
    fn finish(mut self, command: &str, config: &RunConfig, results: Value) -> CmdResult {
        let files = std::mem::take(&mut self.files);
        let manifest = json!({
            "command": command,
            "build": env!("RELAY_BUILD_ID"),
            "config": config,
            "outputs": files,
            "results": results,
        });
        self.write_json("manifest.json", &manifest)
    }
}

pub fn simulate(config: &RunConfig, mut out: Output) -> CmdResult {
    let s = &config.simulate;
    let (zeta, eps) = (config.system.zeta, config.system.epsilon);
    let (alpha, state) = match s.history {
        HistoryKind::Collision => {
            let alpha = collision_alpha(zeta, s.tau, eps, s.alpha)?;
            let orbit = CollisionOrbit::new(zeta, s.tau, alpha)?;
            (alpha, orbit.state_at(s.phase, s.tau)?)
        }
        HistoryKind::Constant => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut point = s.point;
            if s.perturbation > 0.0 {
                for v in &mut point {
                    *v += rng.gen_range(-s.perturbation..=s.perturbation);
                }
            }
            let history = HistorySegment::constant(DVector::from_column_slice(&point), s.tau)?;
            (s.alpha, HybridState::new(history, Relay::from_sign(s.relay as f64)?))
        }
    };
    let sys = RelaySystem::oscillator(zeta, s.tau, eps, alpha)?;
    let (_, traj) = sys.evolve(&state, s.duration)?;
    // every switch follows its crossing by exactly one delay
    for sw in &traj.switches {
        if (sw.time - sw.crossing - s.tau).abs() > 1e-9 * s.tau.max(1.0) {
            return Err(CliError::Invariant(format!("switch at {} does not follow its crossing at {} by τ", sw.time, sw.crossing)));
        }
    }
    write_trajectory_csv(&traj, s.samples, &out.path("trajectory.csv")?)?;
    write_events(&traj, &out.path("events.json")?)?;
    let results = json!({ "alpha": alpha, "crossings": traj.crossings.len(), "switches": traj.switches.len() });
    out.finish("simulate", config, results)
}

pub fn surface(config: &RunConfig, mut out: Output) -> CmdResult {
    let samples = SurfaceSample::grid(config.system.zeta, &config.surface.grid.spec());
    if let Some(bad) = samples.iter().find(|s| !(s.epsilon > 0.0)) {
        return Err(CliError::Invariant(format!("surface sample at ({}, {}) has ε = {}", bad.tau, bad.alpha, bad.epsilon)));
    }
    write_surface_csv(&samples, &out.path("surface.csv")?)?;
    let results = json!({ "samples": samples.len(), "grid": config.surface.grid.spec() });
    out.finish("surface", config, results)
}

pub fn bifmap(config: &RunConfig, mut out: Output) -> CmdResult {
    let map = bifurcation_map(config.system.zeta, config.bifmap.grid.spec());
    for (kind, lines) in &map.curves {
        for p in lines.iter().flatten() {
            if !(p.epsilon > 0.0) {
                return Err(CliError::Invariant(format!("{} point at ({}, {}) has ε = {}", kind.label(), p.tau, p.alpha, p.epsilon)));
            }
        }
    }
    // the three files share a directory; register them for the manifest
    for name in ["curves.csv", "special.csv", "bifmap.json"] {
        out.path(name)?;
    }
    write_bifmap(&map, &out.dir)?;
    let counts: serde_json::Map<String, Value> =
        map.curves.iter().map(|(k, lines)| (k.label().to_string(), lines.iter().map(Vec::len).sum::<usize>().into())).collect();
    out.finish("bifmap", config, json!({ "points_per_curve": counts, "special_points": map.special.len() }))
}

/// Contents of `nsc.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NscFile {
    pub zeta: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub alpha: f64,
}

fn locate_nsc(config: &RunConfig) -> Result<(f64, f64), CliError> {
    let u = &config.unfold;
    Ok(find_nsc(config.system.zeta, config.system.epsilon, u.tau_min, u.tau_max, u.alpha_hint)?)
}

#[derive(Serialize)]
struct NsRow {
    tau: f64,
    alpha: f64,
    x: f64,
    xdot: f64,
    /// Crossing time of the fixed point; the point is admissible in `D-` where it is negative.
    t0: f64,
}

#[derive(Serialize)]
struct CollisionRow {
    tau: f64,
    alpha: f64,
    lambda_plus: f64,
    trace_minus: f64,
    det_minus: f64,
}

pub fn unfold(config: &RunConfig, mut out: Output) -> CmdResult {
    let (zeta, eps) = (config.system.zeta, config.system.epsilon);
    let u = &config.unfold;
    let (tau, alpha) = locate_nsc(config)?;
    let ns = NsProblem { zeta, epsilon: eps };
    let y = collision_point(zeta, tau)?;
    let z0 = DVector::from_vec(vec![y[0], y[1], 0.0, tau, alpha]);
    let residual = ns.residual(&z0)?.amax();
    if residual > 1e-8 {
        return Err(CliError::Invariant(format!("NSC residual {residual:e}")));
    }
    out.write_json("nsc.json", &NscFile { zeta, epsilon: eps, tau, alpha })?;

    let mut rows = Vec::new();
    for sign in [-1.0, 1.0] {
        let policy = StepPolicy {
            initial: 2e-3,
            max: 1e-2,
            max_points: 2000,
            bounds: vec![(3, u.curve_tau_min, u.curve_tau_max)],
            direction: Some((3, sign)),
            ..StepPolicy::default()
        };
        let branch = continue_branch(&ns, &z0, &policy)?;
        let mut part: Vec<NsRow> =
            branch.points.iter().map(|p| NsRow { tau: p.z[3], alpha: p.z[4], x: p.z[0], xdot: p.z[1], t0: p.z[2] }).collect();
        if sign < 0.0 {
            part.reverse();
            part.pop();
        }
        rows.extend(part);
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(out.path("ns_curve.csv")?)?));
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(out.path("collision_curve.csv")?)?));
    // march outwards from the NSC point so that each solve starts from its neighbour
    let n = u.curve_points;
    let taus: Vec<f64> = (0..n).map(|i| u.curve_tau_min + (u.curve_tau_max - u.curve_tau_min) * i as f64 / (n - 1) as f64).collect();
    let start = taus.iter().position(|&t| t >= tau).unwrap_or(n - 1);
    let mut curve: Vec<Option<CollisionRow>> = (0..n).map(|_| None).collect();
    for order in [(start..n).collect::<Vec<_>>(), (0..start).rev().collect()] {
        let mut hint = alpha;
        for i in order {
            if let Ok(a) = collision_alpha(zeta, taus[i], eps, hint) {
                let s = stability_at(zeta, taus[i], a)?;
                curve[i] = Some(CollisionRow { tau: taus[i], alpha: a, lambda_plus: s.lambda_plus, trace_minus: s.trace_minus, det_minus: s.det_minus });
                hint = a;
            }
        }
    }
    for r in curve.iter().flatten() {
        w.serialize(r)?;
    }
    w.flush()?;
    out.finish("unfold", config, json!({ "nsc": { "tau": tau, "alpha": alpha, "residual": residual }, "ns_points": rows.len() }))
}

#[derive(Serialize)]
struct FamilyRow {
    index: usize,
    tau: f64,
    alpha: f64,
    /// Mean radius about the collision point.
    r0: f64,
    r_max: f64,
    error_estimate: f64,
    residual: f64,
}

pub fn family(config: &RunConfig, mut out: Output) -> CmdResult {
    let (zeta, eps) = (config.system.zeta, config.system.epsilon);
    let f = &config.family;
    let nsc = match &f.nsc_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let file: NscFile = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if file.zeta != zeta || file.epsilon != eps {
                return Err(CliError::Config(format!(
                    "{} was computed for ζ = {}, ε = {}, not ζ = {zeta}, ε = {eps}",
                    path.display(),
                    file.zeta,
                    file.epsilon
                )));
            }
            (file.tau, file.alpha)
        }
        None => locate_nsc(config)?,
    };
    let opts = FamilyOptions {
        modes: f.modes,
        delta_tau: f.delta_tau,
        policy: StepPolicy {
            initial: f.initial_step,
            min: f.min_step,
            max: f.max_step,
            max_points: f.max_points,
            newton: NewtonOptions { tol: f.newton_tol, max_iter: 8 },
            max_error: Some(f.max_error),
            ..StepPolicy::default()
        },
    };
    let fam = continue_colliding_family(zeta, eps, nsc, &opts)?;
    let limit = 10.0 * f.newton_tol;
    if let Some((i, p)) = fam.branch.points.iter().enumerate().find(|(_, p)| !(p.residual <= limit)) {
        return Err(CliError::Invariant(format!("family point {i} has residual {:e} above {limit:e}", p.residual)));
    }
    write_branch_jsonl(&fam.branch, &out.path("family.jsonl")?)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(out.path("family.csv")?)?));
    for (i, p) in fam.branch.points.iter().enumerate() {
        let curve = fam.curve(i)?;
        let r_max = (0..f.curve_samples).map(|k| curve.r_at(std::f64::consts::TAU * k as f64 / f.curve_samples as f64)).fold(0.0, f64::max);
        w.serialize(FamilyRow {
            index: i,
            tau: p.parameters[0],
            alpha: p.parameters[1],
            r0: curve.radius(),
            r_max,
            error_estimate: p.error_estimate,
            residual: p.residual,
        })?;
        if i % f.curve_every == 0 || i + 1 == fam.branch.len() {
            write_curve_csv(&curve, f.curve_samples, &out.path(&format!("curves/curve_{i:04}.csv"))?)?;
        }
    }
    w.flush()?;
    let results = json!({
        "nsc": { "tau": nsc.0, "alpha": nsc.1 },
        "points": fam.branch.len(),
        "termination": fam.branch.termination,
        "breakup": matches!(fam.branch.termination, Termination::Breakup { .. }),
    });
    out.finish("family", config, results)
}

#[derive(Serialize)]
struct SampleRow {
    alpha: f64,
    k: usize,
    x: f64,
    xdot: f64,
}

pub fn sweep_cmd(config: &RunConfig, mut out: Output) -> CmdResult {
    let (zeta, eps) = (config.system.zeta, config.system.epsilon);
    let s = &config.sweep;
    let fam = if s.family_landmarks {
        let nsc = locate_nsc(config)?;
        Some(continue_colliding_family(zeta, eps, nsc, &FamilyOptions::default())?)
    } else {
        None
    };
    let marks = Landmarks::compute(zeta, s.tau, eps, s.alpha_hint, fam.as_ref())?;
    let spec = SweepSpec {
        zeta,
        tau: s.tau,
        epsilon: eps,
        alpha_start: s.alpha_start,
        alpha_end: s.alpha_end,
        steps: s.steps,
        warm_start: s.warm_start,
        iterate: IterateOptions { n_transient: s.n_transient, n_total: s.n_total },
        keep: s.keep,
        y_start: None,
    };
    let records = sweep(&spec, Some(&marks))?;
    for r in records.iter().filter(|r| !r.escaped) {
        let e = &r.envelope;
        if !(0..2).all(|k| e.min[k].is_finite() && e.max[k].is_finite() && e.min[k] <= e.max[k]) {
            return Err(CliError::Invariant(format!("envelope at α = {} is not a box: {e:?}", r.alpha)));
        }
    }
    write_sweep_csv(&records, &out.path("sweep.csv")?)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(out.path("samples.csv")?)?));
    for r in &records {
        for (k, p) in r.samples.iter().enumerate() {
            w.serialize(SampleRow { alpha: r.alpha, k, x: p[0], xdot: p[1] })?;
        }
    }
    w.flush()?;
    out.write_json("landmarks.json", &marks)?;
    let escaped = records.iter().filter(|r| r.escaped).count();
    out.finish("sweep", config, json!({ "landmarks": marks, "steps": records.len(), "escaped": escaped }))
}

pub fn polygon(config: &RunConfig, mut out: Output) -> CmdResult {
    let p = &config.polygon;
    let params = OscillatorParams::new(config.system.zeta, p.tau, config.system.epsilon, p.alpha)?;
    let ctx = params.context()?;
    let y0 = collision_point(params.zeta, p.tau)? + Vector2::new(p.offset[0], p.offset[1]);
    let run = iterate_attractor(&ctx, y0, &IterateOptions { n_transient: p.n_transient, n_total: p.n_total })?;
    // images of D+ samples lie on the delayed switching manifold
    let flow = params.flow();
    let n = params.normal();
    for k in 0..run.samples.len().saturating_sub(1) {
        if run.tags[k] == DomainTag::DPlus {
            let back = flow.apply(&-run.samples[k + 1], Relay::Plus, -p.tau);
            let gap = (n.dot(&back) - params.epsilon).abs();
            if gap > 1e-8 {
                return Err(CliError::Invariant(format!("image of sample {k} is {gap:e} off the delayed switching manifold")));
            }
        }
    }
    let map = extract_circle_map(&run.samples)?;
    let arcs = polygon_arcs(&run.samples, &ctx)?;
    write_polygon_csv(&run.samples, &map, Some(&arcs), &out.path("polygon.csv")?)?;
    let summary = json!({
        "visited_plus": run.visited_plus,
        "visited_minus": run.visited_minus,
        "arc_count": arcs.arc_count,
        "corners": map.corners.len(),
        "monotone": map.monotone,
        "locking_period": map.locking_period,
        "centroid": [map.centroid[0], map.centroid[1]],
        "envelope": run.envelope,
    });
    out.write_json("polygon.json", &summary)?;
    out.finish("polygon", config, summary)
}
