use std::f64::consts::PI;

use hysteretic_relay::oscillator::{bifurcation_map, read_bifmap, read_surface_csv, write_bifmap, write_surface_csv, CollisionOrbit, GridSpec, SurfaceSample};
use hysteretic_relay::relay::{read_events, read_trajectory_csv, write_events, write_trajectory_csv};

#[test]
fn trajectory_and_events_round_trip() {
    let orbit = CollisionOrbit::new(-0.1, 4.2, -0.44).unwrap();
    let sys = orbit.params.system().unwrap();
    let state = orbit.state_at(0.5, 8.4).unwrap();
    let (_, traj) = sys.evolve(&state, 12.0).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let path = dir.path().join("trajectory.csv");
    write_trajectory_csv(&traj, 300, &path).unwrap();
    let rows = read_trajectory_csv(&path).unwrap();
    assert_eq!(rows.len(), 301 + 2 * traj.switches.len());
    for (t, y, u) in &rows {
        assert_eq!(y, &traj.eval(*t).unwrap());
        if !traj.switches.iter().any(|s| s.time == *t) {
            assert_eq!(*u, traj.u_at(*t));
        }
    }

    let path = dir.path().join("events.json");
    write_events(&traj, &path).unwrap();
    let ev = read_events(&path).unwrap();
    assert_eq!(ev.duration, traj.duration);
    assert_eq!(ev.crossings, traj.crossings);
    assert_eq!(ev.switches, traj.switches);
}

#[test]
fn surface_and_bifurcation_map_round_trip() {
    let grid = GridSpec { tau_min: PI + 0.05, tau_max: 2.0 * PI - 0.05, n_tau: 40, alpha_min: -1.5, alpha_max: 1.5, n_alpha: 40 };
    let dir = tempfile::tempdir().unwrap();

    let samples = SurfaceSample::grid(-0.1, &grid);
    let path = dir.path().join("surface.csv");
    write_surface_csv(&samples, &path).unwrap();
    assert_eq!(read_surface_csv(&path).unwrap(), samples);

    let map = bifurcation_map(-0.1, grid);
    write_bifmap(&map, dir.path()).unwrap();
    let files = read_bifmap(dir.path()).unwrap();
    let total: usize = map.curves.iter().map(|(_, lines)| lines.iter().map(Vec::len).sum::<usize>()).sum();
    assert_eq!(files.curves.len(), total);
    assert_eq!(files.special.len(), map.special.len());
    assert_eq!(files.manifest["zeta"], -0.1);
    for row in &files.curves {
        assert!(row.epsilon > 0.0);
    }
}
