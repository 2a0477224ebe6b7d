//! Continuous paths on a time interval: exact flow pieces or interpolated samples.

use nalgebra::DVector;

use super::Relay;
use crate::error::{Error, Result};
use crate::flows::Flow;

/// A path made of pieces that each follow one of the flows `Y±`.
///
/// Piece `i` starts at `starts[i]` in `nodes[i]` and follows `labels[i]`
/// until the next start (or `end`). Evaluation flows forward from the
/// node, so the representation is exact whenever the flow is.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointPath {
    starts: Vec<f64>,
    end: f64,
    nodes: Vec<DVector<f64>>,
    labels: Vec<Relay>,
}

impl BreakpointPath {
    /// Builds the path on `[start, end]` starting from `anchor` at time
    /// `start`; `switch_times` (strictly increasing, in `(start, end]`)
    /// separate subintervals that follow `labels` (one more label than
    /// switch times). Node values are obtained by flowing, so the path is
    /// continuous at every breakpoint.
    pub fn new(
        flow: &dyn Flow,
        start: f64,
        end: f64,
        anchor: DVector<f64>,
        switch_times: &[f64],
        labels: &[Relay],
    ) -> Result<Self> {
        if labels.len() != switch_times.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} switch times",
                labels.len(),
                switch_times.len()
            )));
        }
        if end < start {
            return Err(Error::InvalidParameter("path end precedes its start".into()));
        }
        let mut prev = start;
        for &s in switch_times {
            if !(s > prev && s <= end) {
                return Err(Error::InvalidParameter(format!(
                    "switch time {s} not strictly increasing inside ({start}, {end}]"
                )));
            }
            prev = s;
        }
        let mut path = Self { starts: vec![start], end, nodes: vec![anchor], labels: vec![labels[0]] };
        for (i, &s) in switch_times.iter().enumerate() {
            let node = path.eval(flow, s)?;
            path.push_piece(s, node, labels[i + 1]);
        }
        path.end = end;
        Ok(path)
    }

    pub(crate) fn single(start: f64, node: DVector<f64>, label: Relay) -> Self {
        Self { starts: vec![start], end: start, nodes: vec![node], labels: vec![label] }
    }

    /// Appends a piece starting at `start`; a zero-length last piece is replaced.
    pub(crate) fn push_piece(&mut self, start: f64, node: DVector<f64>, label: Relay) {
        if let Some(&last) = self.starts.last() {
            if start <= last {
                let i = self.starts.len() - 1;
                self.nodes[i] = node;
                self.labels[i] = label;
                return;
            }
        }
        self.starts.push(start);
        self.nodes.push(node);
        self.labels.push(label);
        self.end = self.end.max(start);
    }

    pub(crate) fn set_end(&mut self, end: f64) {
        self.end = end;
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.starts[0], self.end)
    }

    /// Times at which the path changes flow.
    pub fn switch_times(&self) -> &[f64] {
        &self.starts[1..]
    }

    /// Flow label of every subinterval.
    pub fn labels(&self) -> &[Relay] {
        &self.labels
    }

    /// Value at the start of every subinterval.
    pub fn nodes(&self) -> &[DVector<f64>] {
        &self.nodes
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.nodes[0]
    }

    fn piece_index(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Label of the flow followed at time `t` (right-continuous).
    pub fn label_at(&self, t: f64) -> Relay {
        self.labels[self.piece_index(t)]
    }

    pub fn eval(&self, flow: &dyn Flow, t: f64) -> Result<DVector<f64>> {
        let i = self.piece_index(t);
        let dt = t - self.starts[i];
        if dt == 0.0 {
            return Ok(self.nodes[i].clone());
        }
        flow.advance(&self.nodes[i], self.labels[i], dt)
    }

    /// Right derivative `f(y(t), label(t))`.
    pub fn derivative(&self, flow: &dyn Flow, t: f64) -> Result<DVector<f64>> {
        let y = self.eval(flow, t)?;
        Ok(flow.field(&y, self.label_at(t)))
    }

    fn window(&self, flow: &dyn Flow, a: f64, b: f64) -> Result<Self> {
        let i = self.piece_index(a);
        let mut out = Self::single(a, self.eval(flow, a)?, self.labels[i]);
        for j in (i + 1)..self.starts.len() {
            if self.starts[j] > b {
                break;
            }
            out.push_piece(self.starts[j], self.nodes[j].clone(), self.labels[j]);
        }
        out.end = b;
        Ok(out)
    }

    fn shift(&mut self, dt: f64) {
        for s in &mut self.starts {
            *s += dt;
        }
        self.end += dt;
    }

    fn extend(&mut self, other: &BreakpointPath) {
        for j in 0..other.starts.len() {
            self.push_piece(other.starts[j], other.nodes[j].clone(), other.labels[j]);
        }
        self.end = other.end;
    }
}

/// Interpolation order used by [`SampledPath`] when no slopes are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Interpolation {
    Linear,
    Cubic,
}

/// A path given by samples. With slopes the interpolant is piecewise cubic
/// Hermite; repeated knot times (with different slopes) mark kinks.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
    slopes: Option<Vec<DVector<f64>>>,
    order: Interpolation,
}

impl SampledPath {
    /// Samples on a uniform grid covering `[start, end]`.
    pub fn uniform(start: f64, end: f64, values: Vec<DVector<f64>>, order: Interpolation) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidParameter("need at least two samples".into()));
        }
        if order == Interpolation::Cubic && n < 4 {
            return Err(Error::InvalidParameter("cubic interpolation needs four samples".into()));
        }
        let h = (end - start) / (n - 1) as f64;
        let times = (0..n).map(|i| if i + 1 == n { end } else { start + h * i as f64 }).collect();
        Ok(Self { times, values, slopes: None, order })
    }

    /// Hermite samples; `times` non-decreasing with at most two equal entries.
    pub fn hermite(times: Vec<f64>, values: Vec<DVector<f64>>, slopes: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() || times.len() != slopes.len() {
            return Err(Error::InvalidParameter("inconsistent Hermite sample lengths".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("sample times must be non-decreasing".into()));
        }
        Ok(Self { times, values, slopes: Some(slopes), order: Interpolation::Cubic })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn order(&self) -> Interpolation {
        self.order
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.times.len();
        self.times.partition_point(|&s| s <= t).saturating_sub(1).min(n - 2)
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let i = self.interval(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        if t1 == t0 {
            return self.values[i + 1].clone();
        }
        if let Some(slopes) = &self.slopes {
            let h = t1 - t0;
            let s = (t - t0) / h;
            let (s2, s3) = (s * s, s * s * s);
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            return &self.values[i] * h00
                + &slopes[i] * (h10 * h)
                + &self.values[i + 1] * h01
                + &slopes[i + 1] * (h11 * h);
        }
        match self.order {
            Interpolation::Linear => {
                let w = (t - t0) / (t1 - t0);
                &self.values[i] * (1.0 - w) + &self.values[i + 1] * w
            }
            Interpolation::Cubic => {
                let n = self.times.len();
                let lo = i.saturating_sub(1).min(n - 4);
                let mut out = DVector::zeros(self.values[0].len());
                for j in lo..lo + 4 {
                    let mut w = 1.0;
                    for k in lo..lo + 4 {
                        if k != j {
                            w *= (t - self.times[k]) / (self.times[j] - self.times[k]);
                        }
                    }
                    out.axpy(w, &self.values[j], 1.0);
                }
                out
            }
        }
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        let i = self.interval(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        if let Some(slopes) = &self.slopes {
            if t1 == t0 {
                return slopes[i + 1].clone();
            }
            let h = t1 - t0;
            let s = (t - t0) / h;
            let d00 = (6.0 * s * s - 6.0 * s) / h;
            let d10 = 3.0 * s * s - 4.0 * s + 1.0;
            let d01 = (-6.0 * s * s + 6.0 * s) / h;
            let d11 = 3.0 * s * s - 2.0 * s;
            return &self.values[i] * d00 + &slopes[i] * d10 + &self.values[i + 1] * d01 + &slopes[i + 1] * d11;
        }
        let (a, b) = self.domain();
        let h = 1e-6 * (b - a).max(1.0);
        let lo = (t - h).max(a);
        let hi = (t + h).min(b);
        (self.eval(hi) - self.eval(lo)) / (hi - lo)
    }

    fn window(&self, a: f64, b: f64) -> Self {
        let mut times = vec![a];
        let mut values = vec![self.eval(a)];
        let mut slopes = self.slopes.as_ref().map(|_| vec![self.derivative(a)]);
        for (k, &t) in self.times.iter().enumerate() {
            if t > a && t < b {
                times.push(t);
                values.push(self.values[k].clone());
                if let (Some(out), Some(src)) = (slopes.as_mut(), self.slopes.as_ref()) {
                    out.push(src[k].clone());
                }
            }
        }
        times.push(b);
        values.push(self.eval(b));
        if let Some(out) = slopes.as_mut() {
            out.push(self.derivative(b));
        }
        let order = if self.slopes.is_none() && times.len() < 4 { Interpolation::Linear } else { self.order };
        Self { times, values, slopes, order }
    }

    fn shift(&mut self, dt: f64) {
        for t in &mut self.times {
            *t += dt;
        }
    }
}

/// One contiguous part of a [`Path`].
#[derive(Debug, Clone, PartialEq)]
pub enum PathRepr {
    Breakpoints(BreakpointPath),
    Samples(SampledPath),
}

impl PathRepr {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            PathRepr::Breakpoints(p) => p.domain(),
            PathRepr::Samples(p) => p.domain(),
        }
    }

    pub fn eval(&self, flow: &dyn Flow, t: f64) -> Result<DVector<f64>> {
        match self {
            PathRepr::Breakpoints(p) => p.eval(flow, t),
            PathRepr::Samples(p) => Ok(p.eval(t)),
        }
    }

    pub fn derivative(&self, flow: &dyn Flow, t: f64) -> Result<DVector<f64>> {
        match self {
            PathRepr::Breakpoints(p) => p.derivative(flow, t),
            PathRepr::Samples(p) => Ok(p.derivative(t)),
        }
    }

    fn window(&self, flow: &dyn Flow, a: f64, b: f64) -> Result<Self> {
        Ok(match self {
            PathRepr::Breakpoints(p) => PathRepr::Breakpoints(p.window(flow, a, b)?),
            PathRepr::Samples(p) => PathRepr::Samples(p.window(a, b)),
        })
    }

    fn shift(&mut self, dt: f64) {
        match self {
            PathRepr::Breakpoints(p) => p.shift(dt),
            PathRepr::Samples(p) => p.shift(dt),
        }
    }
}

/// A continuous path on an interval, stored as contiguous parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    parts: Vec<PathRepr>,
}

impl Path {
    pub fn new(part: PathRepr) -> Self {
        Self { parts: vec![part] }
    }

    pub fn parts(&self) -> &[PathRepr] {
        &self.parts
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.parts[0].domain().0, self.parts.last().unwrap().domain().1)
    }

    fn part_at(&self, t: f64) -> &PathRepr {
        // right-continuous: a time on a part boundary belongs to the later part
        let idx = self.parts.partition_point(|p| p.domain().0 <= t).saturating_sub(1);
        &self.parts[idx]
    }

    pub fn eval(&self, flow: &dyn Flow, t: f64) -> Result<DVector<f64>> {
        self.part_at(t).eval(flow, t)
    }

    pub fn derivative(&self, flow: &dyn Flow, t: f64) -> Result<DVector<f64>> {
        self.part_at(t).derivative(flow, t)
    }

    /// Appends a part whose domain starts where this path ends; adjacent
    /// breakpoint parts are merged.
    pub fn append(&mut self, part: PathRepr) {
        if let (Some(PathRepr::Breakpoints(last)), PathRepr::Breakpoints(next)) = (self.parts.last_mut(), &part) {
            last.extend(next);
            return;
        }
        if let Some(last) = self.parts.last() {
            let (a, b) = last.domain();
            if a == b {
                self.parts.pop();
            }
        }
        self.parts.push(part);
    }

    /// Restriction to `[a, b]`.
    pub fn window(&self, flow: &dyn Flow, a: f64, b: f64) -> Result<Self> {
        let mut parts = Vec::new();
        for (k, p) in self.parts.iter().enumerate() {
            let (pa, pb) = p.domain();
            let last = k + 1 == self.parts.len();
            if pb < a || pa > b || (pb == a && !last && self.parts[k + 1].domain().0 <= a) {
                continue;
            }
            let lo = pa.max(a);
            let hi = pb.min(b);
            if hi < lo {
                continue;
            }
            parts.push(p.window(flow, lo, hi)?);
        }
        if parts.is_empty() {
            return Err(Error::InvalidParameter(format!("window [{a}, {b}] outside path domain")));
        }
        Ok(Self { parts })
    }

    pub fn shifted(mut self, dt: f64) -> Self {
        for p in &mut self.parts {
            p.shift(dt);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::AffineOscillatorFlow;

    fn v(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn breakpoints_are_continuous() {
        let flow = AffineOscillatorFlow::new(-0.1);
        let p = BreakpointPath::new(
            &flow,
            -5.0,
            0.0,
            v(0.2, 0.1),
            &[-3.0, -1.5],
            &[Relay::Plus, Relay::Minus, Relay::Plus],
        )
        .unwrap();
        for &s in p.switch_times() {
            let left = p.eval(&flow, s - 1e-12).unwrap();
            let right = p.eval(&flow, s).unwrap();
            assert!((left - right).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_unordered_breakpoints() {
        let flow = AffineOscillatorFlow::new(-0.1);
        let r = BreakpointPath::new(&flow, -1.0, 0.0, v(0.0, 0.0), &[-0.2, -0.5], &[Relay::Plus; 3]);
        assert!(r.is_err());
        let r = BreakpointPath::new(&flow, -1.0, 0.0, v(0.0, 0.0), &[-1.0], &[Relay::Plus; 2]);
        assert!(r.is_err());
    }

    #[test]
    fn cubic_samples_reproduce_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t;
        let vals: Vec<_> = (0..11).map(|i| v(f(i as f64 * 0.1 - 1.0), 0.0)).collect();
        let p = SampledPath::uniform(-1.0, 0.0, vals, Interpolation::Cubic).unwrap();
        for &t in &[-0.95, -0.51, -0.02] {
            assert!((p.eval(t)[0] - f(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_kink_is_right_continuous() {
        let p = SampledPath::hermite(
            vec![0.0, 1.0, 1.0, 2.0],
            vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 0.0), v(0.0, 0.0)],
            vec![v(1.0, 0.0), v(1.0, 0.0), v(-1.0, 0.0), v(-1.0, 0.0)],
        )
        .unwrap();
        assert!((p.eval(0.5)[0] - 0.5).abs() < 1e-14);
        assert!((p.eval(1.5)[0] - 0.5).abs() < 1e-14);
        assert_eq!(p.derivative(1.0)[0], -1.0);
    }

    #[test]
    fn window_and_shift() {
        let flow = AffineOscillatorFlow::new(-0.1);
        let p = BreakpointPath::new(&flow, -4.0, 2.0, v(0.5, 0.0), &[-1.0, 1.0], &[Relay::Minus, Relay::Plus, Relay::Minus])
            .unwrap();
        let path = Path::new(PathRepr::Breakpoints(p));
        let w = path.window(&flow, -2.0, 2.0).unwrap().shifted(-2.0);
        for &s in &[-4.0, -3.1, -1.0, -0.3, 0.0] {
            let a = w.eval(&flow, s).unwrap();
            let b = path.eval(&flow, s + 2.0).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }
}
