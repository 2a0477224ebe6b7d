//! Real trigonometric series and the angle-parametrized invariant curve.
//!
//! A series of order `N` is stored as `[a₀, a₁, b₁, …, a_N, b_N]` and means
//! `a₀ + Σ a_k cos kφ + b_k sin kφ`.

use std::f64::consts::TAU;

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The `2N + 1` equispaced collocation angles.
pub fn nodes(n: usize) -> Vec<f64> {
    let m = 2 * n + 1;
    (0..m).map(|j| TAU * j as f64 / m as f64).collect()
}

/// `(f, f', f'')` of the series `c` at `phi`.
pub fn eval_series(c: &[f64], phi: f64) -> (f64, f64, f64) {
    let n = (c.len() - 1) / 2;
    let (mut v, mut d1, mut d2) = (c[0], 0.0, 0.0);
    let (s1, c1) = phi.sin_cos();
    let (mut sk, mut ck) = (0.0, 1.0);
    for k in 1..=n {
        // angle addition keeps this at two products per mode
        let (s, c_) = (sk * c1 + ck * s1, ck * c1 - sk * s1);
        sk = s;
        ck = c_;
        let (a, b) = (c[2 * k - 1], c[2 * k]);
        let kf = k as f64;
        v += a * ck + b * sk;
        d1 += kf * (b * ck - a * sk);
        d2 -= kf * kf * (a * ck + b * sk);
    }
    (v, d1, d2)
}

/// Interpolating series of order `N` through values at [`nodes(N)`](nodes).
pub fn fit_series(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let n = (m - 1) / 2;
    let mut c = vec![0.0; m];
    c[0] = values.iter().sum::<f64>() / m as f64;
    for k in 1..=n {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let (s, co) = (TAU * (k * j) as f64 / m as f64).sin_cos();
            a += v * co;
            b += v * s;
        }
        c[2 * k - 1] = 2.0 * a / m as f64;
        c[2 * k] = 2.0 * b / m as f64;
    }
    c
}

/// Pads with zeros or truncates a series to order `n`.
pub fn resize_series(c: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * n + 1];
    let k = out.len().min(c.len());
    out[..k].copy_from_slice(&c[..k]);
    out
}

/// Energy `a_k² + b_k²` of mode `k ≥ 1`.
pub fn mode_energy(c: &[f64], k: usize) -> f64 {
    c[2 * k - 1].powi(2) + c[2 * k].powi(2)
}

/// Closed curve `y(φ) = y₀ + r(φ)(cos φ, sin φ)` with circle map
/// `η(φ) = φ + ω + p(φ)` and times `t(φ)` from the last switch.
///
/// `p` has zero mean and is stored without its constant term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCurve {
    pub modes: usize,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub omega: f64,
    pub y0: Vector2<f64>,
    pub t0: f64,
}

impl FourierCurve {
    /// Number of entries in [`to_vector`](Self::to_vector): `3(2N + 1) + 3`.
    pub fn len_for(modes: usize) -> usize {
        3 * (2 * modes + 1) + 3
    }

    /// The radius-zero curve at a fixed point: `r ≡ 0`, `t ≡ t₀`, `η = φ + ω`.
    pub fn degenerate(modes: usize, y0: Vector2<f64>, t0: f64, omega: f64) -> Self {
        let mut t = vec![0.0; 2 * modes + 1];
        t[0] = t0;
        Self { modes, r: vec![0.0; 2 * modes + 1], t, p: vec![0.0; 2 * modes], omega, y0, t0 }
    }

    /// Curve with the given values of `r`, `η - φ` and `t` at the collocation nodes.
    pub fn from_nodes(r: &[f64], eta_minus_phi: &[f64], t: &[f64], y0: Vector2<f64>, t0: f64) -> Self {
        let modes = (r.len() - 1) / 2;
        let pc = fit_series(eta_minus_phi);
        Self { modes, r: fit_series(r), t: fit_series(t), p: pc[1..].to_vec(), omega: pc[0], y0, t0 }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(Self::len_for(self.modes));
        v.extend_from_slice(&self.r);
        v.extend_from_slice(&self.t);
        v.extend_from_slice(&self.p);
        v.extend_from_slice(&[self.omega, self.y0[0], self.y0[1], self.t0]);
        DVector::from_vec(v)
    }

    pub fn from_slice(modes: usize, z: &[f64]) -> Result<Self> {
        let m = 2 * modes + 1;
        if z.len() < Self::len_for(modes) {
            return Err(Error::DimensionMismatch { expected: Self::len_for(modes), got: z.len() });
        }
        let tail = &z[3 * m - 1..];
        Ok(Self {
            modes,
            r: z[..m].to_vec(),
            t: z[m..2 * m].to_vec(),
            p: z[2 * m..3 * m - 1].to_vec(),
            omega: tail[0],
            y0: Vector2::new(tail[1], tail[2]),
            t0: tail[3],
        })
    }

    fn p_series(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.p.len() + 1);
        c.push(0.0);
        c.extend_from_slice(&self.p);
        c
    }

    pub fn r_at(&self, phi: f64) -> f64 {
        eval_series(&self.r, phi).0
    }

    /// `(t, t', t'')` at `phi`.
    pub fn t_at(&self, phi: f64) -> (f64, f64, f64) {
        eval_series(&self.t, phi)
    }

    pub fn eta(&self, phi: f64) -> f64 {
        phi + self.omega + eval_series(&self.p_series(), phi).0
    }

    pub fn eta_derivative(&self, phi: f64) -> f64 {
        1.0 + eval_series(&self.p_series(), phi).1
    }

    pub fn point(&self, phi: f64) -> Vector2<f64> {
        self.y0 + Vector2::new(phi.cos(), phi.sin()) * self.r_at(phi)
    }

    /// Mean radius `a₀` of `r`.
    pub fn radius(&self) -> f64 {
        self.r[0]
    }

    /// Same curve with `n` modes, padded with zeros or truncated.
    pub fn resized(&self, n: usize) -> Self {
        Self {
            modes: n,
            r: resize_series(&self.r, n),
            t: resize_series(&self.t, n),
            p: resize_series(&self.p_series(), n)[1..].to_vec(),
            omega: self.omega,
            y0: self.y0,
            t0: self.t0,
        }
    }

    /// `r > 0` and `η' > 0` at every node.
    pub fn check_regular(&self) -> Result<()> {
        for phi in nodes(self.modes) {
            let r = self.r_at(phi);
            if !(r > 0.0) {
                return Err(Error::ParametrizationBreakdown(format!("r = {r:e} at φ = {phi:.4}")));
            }
            let d = self.eta_derivative(phi);
            if !(d > 0.0) {
                return Err(Error::ParametrizationBreakdown(format!("η' = {d:e} at φ = {phi:.4}")));
            }
        }
        Ok(())
    }

    /// Sup distance between the points of two curves over `samples` angles.
    pub fn sup_distance(&self, other: &Self, samples: usize) -> f64 {
        (0..samples)
            .map(|k| {
                let phi = TAU * k as f64 / samples as f64;
                (self.point(phi) - other.point(phi)).norm()
            })
            .fold(0.0, f64::max)
    }
}
