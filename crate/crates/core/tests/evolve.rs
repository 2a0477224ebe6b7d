use hysteretic_relay::flows::{integrate_dopri, DopriOptions};
use hysteretic_relay::oscillator::CollisionOrbit;
use hysteretic_relay::relay::{strict_transversality_q, CrossingClass};
use hysteretic_relay::{AffineOscillatorFlow, Flow, HistorySegment, HybridState, Relay, RelaySystem};
use nalgebra::{DVector, Vector2};

fn dvec(y: Vector2<f64>) -> DVector<f64> {
    DVector::from_column_slice(y.as_slice())
}

#[test]
fn colliding_orbit_repeats_after_two_delays() {
    let orbit = CollisionOrbit::new(-0.1, 4.2, -0.44).unwrap();
    let tau = orbit.params.tau;
    let sys = orbit.params.system().unwrap();
    for s in [0.3, 1.7, 5.0] {
        let state = orbit.state_at(s, 2.0 * tau).unwrap();
        let (_, traj) = sys.evolve(&state, 2.0 * tau).unwrap();
        let mut worst = 0.0f64;
        for k in 0..=200 {
            let t = 2.0 * tau * k as f64 / 200.0;
            worst = worst.max((traj.eval(t).unwrap() - dvec(orbit.point_at(s + t))).amax());
        }
        assert!(worst < 1e-8, "s = {s}: deviation {worst:e}");
        let back = traj.eval(2.0 * tau).unwrap();
        assert!((back - dvec(orbit.point_at(s))).amax() < 1e-8);
        assert_eq!(traj.u_at(2.0 * tau), orbit.relay_at(s));
    }
}

#[test]
fn colliding_orbit_has_two_crossings_a_delay_apart() {
    let orbit = CollisionOrbit::new(-0.1, 4.2, -0.44).unwrap();
    let tau = orbit.params.tau;
    let sys = orbit.params.system().unwrap();
    let state = orbit.state_at(0.5, 2.0 * tau).unwrap();
    let (_, traj) = sys.evolve(&state, 4.0 * tau).unwrap();
    let inside: Vec<f64> = traj.crossing_times().iter().map(|c| c.time).filter(|&t| (0.0..2.0 * tau).contains(&t)).collect();
    assert_eq!(inside.len(), 2, "{inside:?}");
    assert!((inside[1] - inside[0] - tau).abs() < 1e-8);
}

#[test]
fn slowly_oscillating_orbits_cross_more_than_a_delay_apart() {
    let sys = RelaySystem::oscillator(-0.1, 1.0, 0.3, 0.2).unwrap();
    let state = HybridState::new(HistorySegment::constant(DVector::from_vec(vec![0.2, 0.0]), 1.0).unwrap(), Relay::Plus);
    let (_, traj) = sys.evolve(&state, 12.0).unwrap();
    let times: Vec<f64> = traj.crossing_times().iter().map(|c| c.time).filter(|&t| t >= 0.0).collect();
    assert!(times.len() >= 4, "{times:?}");
    for w in times.windows(2) {
        assert!(w[1] - w[0] > 1.0, "crossings {} and {} closer than τ", w[0], w[1]);
    }
    let weak = sys.check_weak_transversality(&traj, 0.01).unwrap();
    assert!(weak.iter().all(|w| w.transversal));
}

#[test]
fn collision_corner_is_strictly_transversal() {
    let orbit = CollisionOrbit::new(-0.1, 4.2, -0.44).unwrap();
    let sys = orbit.params.system().unwrap();
    let tr = strict_transversality_q(&sys, &dvec(orbit.y_star), 1e-12).unwrap();
    assert!(tr.q > 0.0);
    assert_eq!(tr.class, CrossingClass::Strict);
    assert!((tr.q - orbit.q).abs() < 1e-12);
}

/// Point on `h = ε` where `c(y) = 0`, for `c` affine in `y`.
fn on_line_where<C: Fn(&DVector<f64>) -> f64>(sys: &RelaySystem, c: C) -> DVector<f64> {
    let g = |y: &DVector<f64>| Vector2::new(sys.h(y) - sys.epsilon, c(y));
    let y0 = DVector::zeros(2);
    let g0 = g(&y0);
    let mut jac = nalgebra::Matrix2::zeros();
    for j in 0..2 {
        let mut e = y0.clone();
        e[j] = 1.0;
        jac.set_column(j, &(g(&e) - g0));
    }
    let y = -jac.try_inverse().unwrap() * g0;
    dvec(y)
}

#[test]
fn grazing_and_one_sided_corners_are_not_strict() {
    let sys = RelaySystem::oscillator(-0.1, 4.2, 0.1, 0.3).unwrap();
    let grazing = on_line_where(&sys, |y| sys.h_rate(y, Relay::Plus).unwrap());
    assert!((sys.h(&grazing) - 0.1).abs() < 1e-12);
    let tr = strict_transversality_q(&sys, &grazing, 1e-12).unwrap();
    assert_eq!(tr.class, CrossingClass::Degenerate);

    // the linear parts of both normal speeds cancel, leaving opposite signs
    let corner = on_line_where(&sys, |y| sys.h_rate(y, Relay::Plus).unwrap() + sys.h_rate(y, Relay::Minus).unwrap());
    let tr = strict_transversality_q(&sys, &corner, 1e-12).unwrap();
    assert!(tr.q < 0.0);
    assert_eq!(tr.class, CrossingClass::OneSided);
}

#[test]
fn exact_touching_is_not_a_crossing() {
    // Y+ has a minimum of x on h = -ε while the relay already outputs +1
    let sys = RelaySystem::oscillator(-0.1, 0.5, 0.1, 0.0).unwrap();
    let flow = AffineOscillatorFlow::new(-0.1);
    let start = flow.apply(&Vector2::new(-0.1, 0.0), Relay::Plus, -0.2);
    let state = HybridState::new(HistorySegment::constant(dvec(start), 0.5).unwrap(), Relay::Plus);
    let (_, traj) = sys.evolve(&state, 0.4).unwrap();
    assert!(traj.crossing_times().is_empty());
    assert!((traj.eval(0.2).unwrap()[0] + 0.1).abs() < 1e-12);
}

#[test]
fn closed_form_flow_matches_integration_from_the_origin() {
    let flow = AffineOscillatorFlow::new(-0.1);
    let y0 = DVector::zeros(2);
    let opts = DopriOptions { rtol: 1e-12, atol: 1e-12, ..DopriOptions::default() };
    let rk = integrate_dopri(|z| flow.field(z, Relay::Plus), &y0, 4.2, &opts).unwrap();
    let exact = flow.advance(&y0, Relay::Plus, 4.2).unwrap();
    assert!((rk - exact).amax() < 1e-9);
}
