use hysteretic_relay::attractor::{
    diameter, extract_circle_map, iterate_attractor, polygon_arcs, read_polygon_csv, read_sweep_csv, sweep, write_polygon_csv,
    write_sweep_csv, IterateOptions, Landmarks, SweepSpec,
};
use hysteretic_relay::oscillator::{collision_point, OscillatorParams};
use hysteretic_relay::{DomainTag, Error, Relay};
use nalgebra::Vector2;

const ZETA: f64 = -0.1;
const EPS: f64 = 0.1;

fn polygon_run() -> (OscillatorParams, hysteretic_relay::attractor::AttractorRun) {
    let tau = 4.25;
    let params = OscillatorParams::new(ZETA, tau, EPS, -0.44).unwrap();
    let ctx = params.context().unwrap();
    let y0 = collision_point(ZETA, tau).unwrap() + Vector2::new(1e-3, 0.0);
    let run = iterate_attractor(&ctx, y0, &IterateOptions { n_transient: 400, n_total: 1400 }).unwrap();
    (params, run)
}

fn sweep_spec(alpha_start: f64, alpha_end: f64) -> SweepSpec {
    SweepSpec {
        zeta: ZETA,
        tau: 4.2,
        epsilon: EPS,
        alpha_start,
        alpha_end,
        steps: 21,
        warm_start: true,
        // locked orbits of long period attract slowly and quasi-periodic ones fill
        // the polygon corners slowly, so both the transient and the record are long
        iterate: IterateOptions { n_transient: 20000, n_total: 60000 },
        keep: 200,
        y_start: None,
    }
}

#[test]
fn reversed_sweep_finds_the_same_envelopes_between_the_collisions() {
    let marks = Landmarks::compute(ZETA, 4.2, EPS, -0.47, None).unwrap();
    let ns = marks.ns.unwrap();
    // stays inside (SPC, ICC): the colliding family meets τ = 4.2 within 1e-3 of NS
    let (lo, hi) = (marks.spc + 0.003, ns - 0.01);
    let forward = sweep(&sweep_spec(lo, hi), None).unwrap();
    let mut backward = sweep(&sweep_spec(hi, lo), None).unwrap();
    backward.reverse();
    for (f, b) in forward.iter().zip(&backward) {
        assert!((f.alpha - b.alpha).abs() < 1e-12);
        assert!(!f.escaped && !b.escaped);
        for k in 0..2 {
            assert!((f.envelope.min[k] - b.envelope.min[k]).abs() < 1e-4, "α {}: {:?} vs {:?}", f.alpha, f.envelope, b.envelope);
            assert!((f.envelope.max[k] - b.envelope.max[k]).abs() < 1e-4, "α {}: {:?} vs {:?}", f.alpha, f.envelope, b.envelope);
        }
    }
}

#[test]
fn plus_steps_of_the_polygon_land_on_the_delayed_manifold() {
    let (params, run) = polygon_run();
    let flow = params.flow();
    let n = params.normal();
    assert!(run.visited_plus && run.visited_minus);
    let mut checked = 0;
    for k in 0..run.samples.len() - 1 {
        if run.tags[k] == DomainTag::DPlus {
            let img = run.samples[k + 1];
            let back = flow.apply(&-img, Relay::Plus, -params.tau);
            assert!((n.dot(&back) - EPS).abs() < 1e-8, "sample {k}");
            checked += 1;
        }
    }
    assert!(checked > 10);
}

#[test]
fn iteration_is_deterministic() {
    let (_, a) = polygon_run();
    let (_, b) = polygon_run();
    let worst = a.samples.iter().zip(&b.samples).map(|(p, q)| (p - q).amax()).fold(0.0, f64::max);
    assert!(worst < 1e-8);
}

#[test]
fn smooth_invariant_curve_is_a_single_arc() {
    // between the colliding family and the Neimark–Sacker curve at τ = 4.2
    let params = OscillatorParams::new(ZETA, 4.2, EPS, -0.4306).unwrap();
    let ctx = params.context().unwrap();
    let y0 = collision_point(ZETA, 4.2).unwrap() + Vector2::new(1e-3, 0.0);
    let run = iterate_attractor(&ctx, y0, &IterateOptions { n_transient: 4000, n_total: 5000 }).unwrap();
    assert!(!run.visited_plus);
    let map = extract_circle_map(&run.samples).unwrap();
    assert!(map.monotone);
    let arcs = polygon_arcs(&run.samples, &ctx).unwrap();
    assert_eq!(arcs.arc_count, 1);
}

#[test]
fn stable_fixed_point_has_no_circle_map() {
    let params = OscillatorParams::new(ZETA, 4.0, EPS, -0.45).unwrap();
    let ctx = params.context().unwrap();
    let y0 = collision_point(ZETA, 4.0).unwrap() + Vector2::new(1e-3, 0.0);
    let run = iterate_attractor(&ctx, y0, &IterateOptions { n_transient: 2000, n_total: 2400 }).unwrap();
    assert!(run.envelope.max_width() < 1e-8);
    assert!(matches!(extract_circle_map(&run.samples), Err(Error::InsufficientSamples(_))));
}

#[test]
fn envelope_width_bounds_the_diameter() {
    let (_, run) = polygon_run();
    let w = run.envelope.max_width();
    let d = diameter(&run.samples);
    assert!(w <= d + 1e-15 && d <= std::f64::consts::SQRT_2 * w + 1e-15, "width {w} diameter {d}");
}

#[test]
fn sweep_and_polygon_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = sweep_spec(-0.50, -0.44);
    spec.steps = 7;
    let marks = Landmarks::compute(ZETA, 4.2, EPS, -0.47, None).unwrap();
    let records = sweep(&spec, Some(&marks)).unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&records, &path).unwrap();
    let rows = read_sweep_csv(&path).unwrap();
    assert_eq!(rows.len(), records.len());
    for (r, row) in records.iter().zip(&rows) {
        assert_eq!((row.alpha, row.env_min_x, row.env_max_xdot), (r.alpha, r.envelope.min[0], r.envelope.max[1]));
        assert_eq!((row.visited_plus, row.visited_minus, row.escaped, row.region), (r.visited_plus, r.visited_minus, r.escaped, r.region));
    }

    let (params, run) = polygon_run();
    let map = extract_circle_map(&run.samples).unwrap();
    let arcs = polygon_arcs(&run.samples, &params.context().unwrap()).unwrap();
    let path = dir.path().join("polygon.csv");
    write_polygon_csv(&run.samples, &map, Some(&arcs), &path).unwrap();
    let rows = read_polygon_csv(&path).unwrap();
    assert_eq!(rows.len(), run.samples.len());
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(Vector2::new(row.x, row.xdot), run.samples[k]);
        assert_eq!(row.arc_id, arcs.age[k]);
    }
}
