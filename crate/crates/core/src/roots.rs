//! Scalar root finding used for crossing times and implicit map times.

use crate::error::{Error, Result};

/// Refines a root of `f` inside a bracket `[a, b]` with `f(a) < 0 <= f(b)`
/// (or the mirrored signs). Secant steps are taken while they shrink the
/// bracket fast enough, bisection otherwise (Illinois variant of false
/// position).
///
/// Stops when `|f| <= ftol` or the bracket is narrower than a few ulps.
/// Returns the bracket end on the `f >= 0` side when the bracket collapses,
/// so the returned point is never "before" the sign change.
pub fn refine_bracket<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, ftol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(fa.signum() != fb.signum() || fa == 0.0 || fb == 0.0);
    if fb == 0.0 {
        return b;
    }
    if fa == 0.0 {
        return a;
    }
    // keep `lo` on the side of fa's sign, `hi` on fb's side
    let (mut lo, mut hi, mut flo, mut fhi) = (a, b, fa, fb);
    let mut side = 0i8;
    for _ in 0..200 {
        let width = (hi - lo).abs();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        if width <= 4.0 * f64::EPSILON * scale {
            break;
        }
        let mut c = hi - fhi * (hi - lo) / (fhi - flo);
        if !c.is_finite() || (c - lo) * (c - hi) >= 0.0 {
            c = 0.5 * (lo + hi);
        }
        let fc = f(c);
        if fc.abs() <= ftol {
            return c;
        }
        if fc.signum() == fhi.signum() {
            hi = c;
            fhi = fc;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = c;
            flo = fc;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
    }
    hi
}

/// Newton iteration for a simple root near `t0`, confined to `[lo, hi]`,
/// falling back to bracketed refinement when Newton leaves the interval,
/// stalls, or runs out of iterations.
///
/// `g` returns `(value, derivative)`.
pub fn newton_bracketed<G>(
    mut g: G,
    t0: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    G: FnMut(f64) -> (f64, f64),
{
    let mut t = t0;
    for _ in 0..max_iter {
        let (v, d) = g(t);
        if v.abs() <= tol {
            return Ok(t);
        }
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = t - v / d;
        if !(lo..=hi).contains(&next) || !next.is_finite() {
            break;
        }
        t = next;
    }
    let (t_last, (v_last, _)) = (t, g(t));
    if v_last.abs() <= tol {
        return Ok(t_last);
    }
    // bisection fallback over the whole bracket
    let (flo, fhi) = (g(lo).0, g(hi).0);
    if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    let root = refine_bracket(|s| g(s).0, lo, hi, flo, fhi, tol);
    // polish with a few Newton steps; bracket refinement may stop on width
    let mut t = root;
    for _ in 0..4 {
        let (v, d) = g(t);
        if v.abs() <= tol || d == 0.0 {
            break;
        }
        t -= v / d;
    }
    Ok(t)
}

/// Scans `[a, b]` on a uniform grid of at most `step` and returns the first
/// bracket in which `f` changes sign, refined to a root.
pub fn first_root<F>(mut f: F, a: f64, b: f64, step: f64, ftol: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let n = (((b - a) / step).ceil() as usize).max(1);
    let h = (b - a) / n as f64;
    let mut t_prev = a;
    let mut f_prev = f(a);
    if f_prev == 0.0 {
        return Some(a);
    }
    for i in 1..=n {
        let t = if i == n { b } else { a + h * i as f64 };
        let ft = f(t);
        if ft == 0.0 || ft.signum() != f_prev.signum() {
            return Some(refine_bracket(&mut f, t_prev, t, f_prev, ft, ftol));
        }
        t_prev = t;
        f_prev = ft;
    }
    None
}
