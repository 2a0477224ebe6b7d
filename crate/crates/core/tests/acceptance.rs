//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p hysteretic-relay --test acceptance -- --nocapture`.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use hysteretic_relay::attractor::{extract_circle_map, iterate_attractor, polygon_arcs, sweep, IterateOptions, Landmarks, SweepSpec};
use hysteretic_relay::continuation::{
    continue_branch, continue_colliding_family, invariance_defect, newton_pinned, CollidingFamily, FamilyOptions, NewtonOptions,
    NsProblem, StepPolicy, Termination,
};
use hysteretic_relay::flows::{integrate_dopri, DopriOptions};
use hysteretic_relay::oscillator::{collision_alpha, collision_epsilon, collision_point, find_nsc, OscillatorParams};
use hysteretic_relay::relay::lemma1_switch_bound;
use hysteretic_relay::{AffineOscillatorFlow, Flow, HistorySegment, HybridState, MapBranch, Relay, RelaySystem};
use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZETA: f64 = -0.1;
const EPS: f64 = 0.1;

fn report(id: u32, name: &str, ok: bool, elapsed: Duration, limit: Duration, detail: String) {
    let within = elapsed <= limit;
    let verdict = if ok && within { "PASS" } else { "FAIL" };
    println!("[{verdict}] criterion {id} {name}: {detail}; {:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs());
    assert!(ok, "criterion {id} failed: {detail}");
    assert!(within, "criterion {id} exceeded its runtime limit");
}

fn dvec(y: Vector2<f64>) -> DVector<f64> {
    DVector::from_column_slice(y.as_slice())
}

struct FamilyRun {
    nsc: (f64, f64),
    family: CollidingFamily,
    elapsed: Duration,
}

fn family() -> &'static FamilyRun {
    static RUN: OnceLock<FamilyRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let t = Instant::now();
        let nsc = find_nsc(ZETA, EPS, 4.0, 4.3, -0.5).unwrap();
        let family = continue_colliding_family(ZETA, EPS, nsc, &FamilyOptions::default()).unwrap();
        FamilyRun { nsc, family, elapsed: t.elapsed() }
    })
}

fn ns_alpha(tau: f64, guess: &DVector<f64>) -> DVector<f64> {
    let mut z = guess.clone();
    z[3] = tau;
    newton_pinned(&NsProblem { zeta: ZETA, epsilon: EPS }, &z, 3, &NewtonOptions::default()).unwrap().z
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope, sxy * sxy / (sxx * syy))
}

#[test]
fn criterion_1_closed_form_flows_match_adaptive_integration() {
    let t = Instant::now();
    let flow = AffineOscillatorFlow::new(ZETA);
    let opts = DopriOptions { rtol: 1e-13, atol: 1e-13, ..DopriOptions::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let y = DVector::from_vec(vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]);
        for u in [Relay::Plus, Relay::Minus] {
            for k in -8..=8 {
                let s = std::f64::consts::FRAC_PI_4 * k as f64;
                let exact = flow.advance(&y, u, s).unwrap();
                let rk = integrate_dopri(|z| flow.field(z, u), &y, s, &opts).unwrap();
                worst = worst.max((exact - rk).amax());
            }
        }
    }
    report(1, "flow correctness", worst < 1e-8, t.elapsed(), Duration::from_secs(5), format!("sup error {worst:.2e}"));
}

#[test]
fn criterion_2_collision_identity_on_the_surface() {
    let t = Instant::now();
    let flow = AffineOscillatorFlow::new(ZETA);
    let n = 50;
    let (mut valid, mut worst_sym, mut worst_fix) = (0, 0.0f64, 0.0f64);
    for i in 0..n {
        let tau = std::f64::consts::PI * (1.0 + (i as f64 + 0.5) / n as f64);
        let Ok(y) = collision_point(ZETA, tau) else { continue };
        worst_sym = worst_sym.max((y + flow.apply(&y, Relay::Plus, tau)).norm());
        for j in 0..n {
            let alpha = -1.2 + 2.4 * (j as f64 + 0.5) / n as f64;
            let Ok(eps) = collision_epsilon(ZETA, tau, alpha) else { continue };
            if eps <= 0.0 {
                continue;
            }
            // the reduction needs strict transversality; other surface points are not valid
            let Ok(ctx) = OscillatorParams::new(ZETA, tau, eps, alpha).and_then(|p| p.context()) else { continue };
            let f = ctx.map_f(&dvec(y)).unwrap();
            worst_fix = worst_fix.max((f - dvec(y)).amax());
            valid += 1;
        }
    }
    let ok = valid > 0 && worst_sym < 1e-10 && worst_fix < 1e-10;
    report(2, "collision identity", ok, t.elapsed(), Duration::from_secs(30), format!("{valid} surface points, |y*+Y+ y*| {worst_sym:.2e}, |F(y*)-y*| {worst_fix:.2e}"));
}

#[test]
fn criterion_3_switch_points_follow_the_reduced_map() {
    let t = Instant::now();
    let tau = 4.2;
    let alpha = collision_alpha(ZETA, tau, EPS, -0.47).unwrap();
    let params = OscillatorParams::new(ZETA, tau, EPS, alpha).unwrap();
    let ctx = params.context().unwrap();
    let sys = params.system().unwrap();
    let ys = collision_point(ZETA, tau).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (r, a) = (rng.gen_range(0.0..1e-2), rng.gen_range(0.0..std::f64::consts::TAU));
        let y = dvec(ys + r * Vector2::new(a.cos(), a.sin()));
        let state = ctx.reconstruct_history(&y, 2.0 * tau).unwrap();
        let (_, traj) = sys.evolve(&state, 6.5 * tau).unwrap();
        // the history switches at y itself; later switches alternate in sign
        let mut points = vec![y.clone()];
        points.extend(traj.switch_points().unwrap());
        let mut f = y.clone();
        for (k, p) in points.iter().take(7).enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            worst = worst.max((p - sign * &f).amax());
            f = ctx.map_f(&f).unwrap();
        }
        assert!(points.len() >= 7, "only {} switches", points.len());
    }
    report(3, "reduction theorem", worst < 1e-6, t.elapsed(), Duration::from_secs(60), format!("max |switch - (-1)^k F^k| {worst:.2e}"));
}

#[test]
fn criterion_4_linearization_matches_central_differences() {
    let t = Instant::now();
    let tau = 4.2;
    let ys = collision_point(ZETA, tau).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let spc = collision_alpha(ZETA, tau, EPS, -0.47).unwrap();
    for (alpha, eps) in [(spc, EPS), (0.0, collision_epsilon(ZETA, tau, 0.0).unwrap())] {
        let ctx = OscillatorParams::new(ZETA, tau, eps, alpha).unwrap().context().unwrap();
        for branch in [MapBranch::Plus, MapBranch::Minus] {
            for _ in 0..20 {
                let y = dvec(ys + Vector2::new(rng.gen_range(-1e-2..1e-2), rng.gen_range(-1e-2..1e-2)));
                let jac = ctx.jacobian_f_branch(&y, branch).unwrap().dy;
                let h = 1e-6;
                let mut fd = nalgebra::DMatrix::zeros(2, 2);
                for j in 0..2 {
                    let (mut p, mut m) = (y.clone(), y.clone());
                    p[j] += h;
                    m[j] -= h;
                    let col = (ctx.map_f_branch(&p, branch).unwrap() - ctx.map_f_branch(&m, branch).unwrap()) / (2.0 * h);
                    fd.set_column(j, &col);
                }
                worst = worst.max((&jac - &fd).norm() / jac.norm().max(1e-12));
            }
        }
    }
    let ctx0 = OscillatorParams::new(ZETA, tau, collision_epsilon(ZETA, tau, 0.0).unwrap(), 0.0).unwrap().context().unwrap();
    let y = dvec(ys);
    let coincide = (ctx0.jacobian_f_branch(&y, MapBranch::Plus).unwrap().dy - ctx0.jacobian_f_branch(&y, MapBranch::Minus).unwrap().dy).amax();
    let ok = worst < 1e-5 && coincide < 1e-10;
    report(4, "linearization", ok, t.elapsed(), Duration::from_secs(5), format!("relative error {worst:.2e}, |DF+ - DF-| at α=0 {coincide:.2e}"));
}

#[test]
fn criterion_5_switch_counts_respect_the_lemma_bound() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut runs, mut worst_ratio, mut max_switches) = (0, 0.0f64, 0);
    while runs < 50 {
        let zeta = rng.gen_range(-0.2..0.2);
        let tau = rng.gen_range(0.5..6.0);
        let eps = rng.gen_range(0.02..0.5);
        let alpha = rng.gen_range(-1.0..1.0);
        let sys = RelaySystem::oscillator(zeta, tau, eps, alpha).unwrap();
        let y0 = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let u = if rng.gen_bool(0.5) { Relay::Plus } else { Relay::Minus };
        let state = HybridState::new(HistorySegment::constant(y0, tau).unwrap(), u);
        let t_end = tau + rng.gen_range(5.0..20.0);
        let (_, traj) = sys.evolve(&state, t_end).unwrap();
        let (t0, ymax) = (tau, traj.augmented_sup_norm(0.0, t_end, 4000).unwrap());
        let count = traj.switches.iter().filter(|s| s.time >= t0 && s.time <= t_end).count();
        let bound = lemma1_switch_bound(t0, t_end, sys.lipschitz_f.unwrap(), sys.lipschitz_h.unwrap(), ymax, eps);
        worst_ratio = worst_ratio.max(count as f64 / bound);
        max_switches = max_switches.max(count);
        runs += 1;
    }
    report(5, "switch-count bound", worst_ratio <= 1.0, t.elapsed(), Duration::from_secs(60), format!("{runs} runs, up to {max_switches} switches, max count/bound {worst_ratio:.3}"));
}

#[test]
fn criterion_6_invariant_polygon() {
    let t = Instant::now();
    let tau = 4.25;
    let params = OscillatorParams::new(ZETA, tau, EPS, -0.44).unwrap();
    let ctx = params.context().unwrap();
    let y0 = collision_point(ZETA, tau).unwrap() + Vector2::new(1e-3, 0.0);
    let run = iterate_attractor(&ctx, y0, &IterateOptions { n_transient: 400, n_total: 1400 }).unwrap();
    let map = extract_circle_map(&run.samples).unwrap();
    let arcs = polygon_arcs(&run.samples, &ctx).unwrap();
    let ok = run.visited_plus && run.visited_minus && map.monotone && arcs.arc_count < run.samples.len() / 10;
    let detail = format!("D+ {} D- {}, {} arcs, monotone {}", run.visited_plus, run.visited_minus, arcs.arc_count, map.monotone);
    report(6, "invariant polygon", ok, t.elapsed(), Duration::from_secs(10), detail);
}

#[test]
fn criterion_7_sweep_envelope() {
    let run = family();
    let t = Instant::now();
    let tau = 4.2;
    let marks = Landmarks::compute(ZETA, tau, EPS, -0.47, Some(&run.family)).unwrap();
    let icc = marks.icc.expect("family crosses τ = 4.2");
    let spec = SweepSpec {
        zeta: ZETA,
        tau,
        epsilon: EPS,
        alpha_start: -0.52,
        alpha_end: -0.40,
        steps: 241,
        warm_start: true,
        iterate: IterateOptions::default(),
        keep: 360,
        y_start: None,
    };
    let records = sweep(&spec, Some(&marks)).unwrap();
    let before = records.iter().filter(|r| r.alpha < marks.spc).map(|r| r.envelope.max_width()).fold(0.0, f64::max);
    let half = marks.spc + 0.5 * (icc - marks.spc);
    let (x, y): (Vec<f64>, Vec<f64>) = records.iter().filter(|r| r.alpha > marks.spc && r.alpha <= half).map(|r| (r.alpha, r.envelope.width(0))).unzip();
    let (_, slope, r2) = least_squares(&x, &y);
    let ok = before < 1e-6 && r2 > 0.99 && slope.abs() > 0.0 && x.len() >= 5;
    let detail = format!("SPC {:.5}, ICC {icc:.5}, width before SPC {before:.2e}, linear fit over {} points slope {slope:.3} R² {r2:.5}", marks.spc, x.len());
    report(7, "sweep envelope", ok, t.elapsed(), Duration::from_secs(120), detail);
}

#[test]
fn criterion_8_colliding_family() {
    let run = family();
    let t = Instant::now();
    let fam = &run.family;
    let n = fam.branch.len();

    // NS curve through the NSC point
    let y = collision_point(ZETA, run.nsc.0).unwrap();
    let z0 = DVector::from_vec(vec![y[0], y[1], 0.0, run.nsc.0, run.nsc.1]);
    let policy = StepPolicy { max_points: 60, bounds: vec![(3, 4.0, 4.8)], direction: Some((3, 1.0)), ..StepPolicy::default() };
    let ns = continue_branch(&NsProblem { zeta: ZETA, epsilon: EPS }, &z0, &policy).unwrap();

    // tangency: α distance to the NS curve against τ distance to NSC
    let mut guess = z0.clone();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for i in 0..n {
        let p = fam.params(i).unwrap();
        let dtau = p.tau - run.nsc.0;
        if dtau > 0.05 {
            break;
        }
        guess = ns_alpha(p.tau, &guess);
        lx.push(dtau.abs().ln());
        ly.push((p.alpha - guess[4]).abs().ln());
    }
    let (_, exponent, _) = least_squares(&lx, &ly);

    // radius against τ over the middle half of the branch
    let mid: Vec<usize> = (n / 4..3 * n / 4).collect();
    let taus: Vec<f64> = mid.iter().map(|&i| fam.params(i).unwrap().tau).collect();
    let radii: Vec<f64> = mid.iter().map(|&i| fam.curve(i).unwrap().radius()).collect();
    let (a, b, _) = least_squares(&taus, &radii);
    let affine_dev = taus.iter().zip(&radii).map(|(t, r)| ((r - (a + b * t)) / (a + b * t)).abs()).fold(0.0, f64::max);

    // 32 → 64 modes on the first member with radius ≥ 0.1
    let healthy = (0..n).find(|&i| fam.curve(i).unwrap().radius() >= 0.1).expect("family grows past radius 0.1");
    let coarse = fam.curve(healthy).unwrap();
    let (fine, _) = fam.refined(healthy, 64).unwrap();
    let refinement = coarse.sup_distance(&fine, 1024);

    let breakup = matches!(fam.branch.termination, Termination::Breakup { estimate } if estimate > 1e-2);
    let ok = ns.len() > 5 && (exponent - 2.0).abs() <= 0.2 && affine_dev < 0.05 && refinement < 1e-8 && breakup;
    let detail = format!(
        "{n} family points, NS curve {} points, tangency exponent {exponent:.3} ({} points), radius affine deviation {:.2}%, refinement at point {healthy} {refinement:.2e}, termination {:?}",
        ns.len(),
        lx.len(),
        100.0 * affine_dev,
        fam.branch.termination
    );
    report(8, "colliding family", ok, run.elapsed + t.elapsed(), Duration::from_secs(600), detail);
}

#[test]
fn criterion_9_family_curves_are_invariant() {
    let run = family();
    let t = Instant::now();
    let fam = &run.family;
    let mut worst = (0.0f64, 0usize);
    let mut failures = Vec::new();
    for i in (0..fam.branch.len()).step_by(5) {
        let d = invariance_defect(&fam.curve(i).unwrap(), &fam.params(i).unwrap(), 64).unwrap();
        if d > worst.0 {
            worst = (d, i);
        }
        if d >= 1e-6 {
            failures.push(i);
        }
    }
    let detail = format!("max defect {:.2e} at point {}, points over 1e-6: {failures:?}", worst.0, worst.1);
    report(9, "curve invariance", failures.is_empty(), run.elapsed + t.elapsed(), Duration::from_secs(600), detail);
}
