//! Piecewise-continuous state record with right-continuous values and left
//! limits at jump points.
//!
//! A [`History`] covers `[start, now]` as a contiguous chain of cubic Hermite
//! [`Segment`]s. Each segment owns its own endpoint values, so the value
//! stored at the end of segment `i` is the left limit at that node and the
//! value at the start of segment `i + 1` is the right value. They differ only
//! at recorded jumps.

use crate::error::{Error, Result};
use crate::linalg::norm;

/// Relative tolerance used to snap query times onto stored nodes.
///
/// Grid nodes are produced by floating-point arithmetic (`t0 + k h`,
/// `t - d`), so a delayed query aimed at a node may land a few ulps on
/// either side of it.
pub const TIME_SNAP: f64 = 1e-9;

#[inline]
pub(crate) fn snap_eps(t: f64) -> f64 {
    TIME_SNAP * t.abs().max(1.0)
}

/// Cubic Hermite interpolant on `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub x_start: Vec<f64>,
    pub x_end: Vec<f64>,
    pub dx_start: Vec<f64>,
    pub dx_end: Vec<f64>,
}

impl Segment {
    pub fn new(
        start: f64,
        end: f64,
        x_start: Vec<f64>,
        x_end: Vec<f64>,
        dx_start: Vec<f64>,
        dx_end: Vec<f64>,
    ) -> Result<Self> {
        if !(end > start) || !start.is_finite() || !end.is_finite() {
            return Err(Error::Structural(format!(
                "segment must satisfy start < end, got [{start}, {end}]"
            )));
        }
        let n = x_start.len();
        if x_end.len() != n || dx_start.len() != n || dx_end.len() != n {
            return Err(Error::Structural("segment component lengths differ".into()));
        }
        Ok(Self {
            start,
            end,
            x_start,
            x_end,
            dx_start,
            dx_end,
        })
    }

    /// Straight line between two values; the Hermite slopes equal the secant.
    pub fn linear(start: f64, end: f64, x_start: Vec<f64>, x_end: Vec<f64>) -> Result<Self> {
        let h = end - start;
        let slope: Vec<f64> = x_start
            .iter()
            .zip(&x_end)
            .map(|(a, b)| (b - a) / h)
            .collect();
        Self::new(start, end, x_start, x_end, slope.clone(), slope)
    }

    pub fn dim(&self) -> usize {
        self.x_start.len()
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let h = self.end - self.start;
        let s = (t - self.start) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for (i, o) in out.iter_mut().enumerate() {
            *o = h00 * self.x_start[i]
                + h10 * h * self.dx_start[i]
                + h01 * self.x_end[i]
                + h11 * h * self.dx_end[i];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        if t == self.start {
            return self.x_start.clone();
        }
        if t == self.end {
            return self.x_end.clone();
        }
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    /// Exact integral of the cubic interpolant over `[lo, hi] ⊆ [start, end]`
    /// (Simpson's rule integrates cubics exactly).
    pub fn integral(&self, lo: f64, hi: f64) -> Vec<f64> {
        let w = hi - lo;
        if w <= 0.0 {
            return vec![0.0; self.dim()];
        }
        let a = self.eval(lo);
        let m = self.eval(0.5 * (lo + hi));
        let b = self.eval(hi);
        a.iter()
            .zip(&m)
            .zip(&b)
            .map(|((a, m), b)| w / 6.0 * (a + 4.0 * m + b))
            .collect()
    }
}

/// A recorded state jump at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

/// Piecewise-continuous trajectory record on `[start, now]`.
#[derive(Debug, Clone)]
pub struct History {
    dim: usize,
    origin: f64,
    horizon: f64,
    start: f64,
    now: f64,
    head: Vec<f64>,
    segments: Vec<Segment>,
    jumps: Vec<JumpRecord>,
}

impl History {
    /// Empty record holding a single point at `time`.
    pub fn point(time: f64, value: Vec<f64>) -> Result<Self> {
        if value.is_empty() {
            return Err(Error::Parameter("state dimension must be positive".into()));
        }
        Ok(Self {
            dim: value.len(),
            origin: time,
            horizon: 0.0,
            start: time,
            now: time,
            head: value,
            segments: Vec::new(),
            jumps: Vec::new(),
        })
    }

    /// Constant initial function `φ ≡ value` on `[origin - horizon, origin]`.
    pub fn constant(origin: f64, horizon: f64, value: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        let mut h = Self::point(origin - horizon, value.clone())?;
        if horizon > 0.0 {
            h.append_segment(Segment::linear(
                origin - horizon,
                origin,
                value.clone(),
                value,
            )?)?;
        }
        h.origin = origin;
        h.horizon = horizon;
        Ok(h)
    }

    /// Linear initial function from `at_start` (time `origin - horizon`) to
    /// `at_origin`.
    pub fn linear(
        origin: f64,
        horizon: f64,
        at_start: Vec<f64>,
        at_origin: Vec<f64>,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        if at_start.len() != at_origin.len() {
            return Err(Error::Parameter("endpoint dimensions differ".into()));
        }
        if horizon == 0.0 {
            return Self::point(origin, at_origin);
        }
        let mut h = Self::point(origin - horizon, at_start.clone())?;
        h.append_segment(Segment::linear(
            origin - horizon,
            origin,
            at_start,
            at_origin,
        )?)?;
        h.origin = origin;
        h.horizon = horizon;
        Ok(h)
    }

    /// Piecewise-linear initial function through `(time, value)` samples.
    /// The last sample time becomes the origin.
    pub fn from_samples(samples: &[(f64, Vec<f64>)]) -> Result<Self> {
        let (first, rest) = samples
            .split_first()
            .ok_or_else(|| Error::Parameter("no samples".into()))?;
        let mut h = Self::point(first.0, first.1.clone())?;
        let mut prev = first;
        for s in rest {
            if s.1.len() != h.dim {
                return Err(Error::Parameter("sample dimensions differ".into()));
            }
            h.append_segment(Segment::linear(prev.0, s.0, prev.1.clone(), s.1.clone())?)?;
            prev = s;
        }
        h.origin = h.now;
        h.horizon = h.now - h.start;
        Ok(h)
    }

    /// Hermite record of a smooth function on `[start, end]` with `pieces`
    /// equal segments, using the supplied derivative at the nodes.
    pub fn from_fn<F, D>(start: f64, end: f64, pieces: usize, f: F, df: D) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
        D: Fn(f64) -> Vec<f64>,
    {
        if pieces == 0 || !(end > start) {
            return Err(Error::Parameter(
                "from_fn needs start < end and pieces > 0".into(),
            ));
        }
        let h = (end - start) / pieces as f64;
        let node = |i: usize| {
            if i == pieces {
                end
            } else {
                start + i as f64 * h
            }
        };
        let mut hist = Self::point(start, f(start))?;
        for i in 0..pieces {
            let (a, b) = (node(i), node(i + 1));
            hist.append_segment(Segment::new(a, b, f(a), f(b), df(a), df(b))?)?;
        }
        hist.origin = end;
        hist.horizon = end - start;
        Ok(hist)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Time at which the flow starts (`t0`).
    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Length of the initial window (`r`).
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Earliest stored time.
    pub fn start(&self) -> f64 {
        self.start
    }

    /// Latest stored time (`t_now`).
    pub fn now(&self) -> f64 {
        self.now
    }

    /// Right value at `now`.
    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn jumps(&self) -> &[JumpRecord] {
        &self.jumps
    }

    /// Re-anchor the origin (the time at which the flow starts); defaults to
    /// the record end for constructors that take no explicit origin.
    pub fn with_origin(mut self, origin: f64) -> Self {
        self.origin = origin;
        self.horizon = (origin - self.start).max(0.0);
        self
    }

    /// Copy with the components in `range` multiplied by `factor`.
    pub fn scaled(&self, range: std::ops::Range<usize>, factor: f64) -> Self {
        let mut out = self.clone();
        let scale = |v: &mut Vec<f64>| v[range.clone()].iter_mut().for_each(|x| *x *= factor);
        scale(&mut out.head);
        for s in &mut out.segments {
            scale(&mut s.x_start);
            scale(&mut s.x_end);
            scale(&mut s.dx_start);
            scale(&mut s.dx_end);
        }
        for j in &mut out.jumps {
            scale(&mut j.pre);
            scale(&mut j.post);
        }
        out
    }

    pub fn append_segment(&mut self, mut seg: Segment) -> Result<()> {
        if seg.dim() != self.dim {
            return Err(Error::Structural(format!(
                "segment dimension {} does not match history dimension {}",
                seg.dim(),
                self.dim
            )));
        }
        if (seg.start - self.now).abs() > snap_eps(self.now) {
            return Err(Error::Structural(format!(
                "non-contiguous append: segment starts at {} but record ends at {}",
                seg.start, self.now
            )));
        }
        let scale = 1.0 + norm(&self.head);
        let gap = seg
            .x_start
            .iter()
            .zip(&self.head)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > 1e-12 * scale {
            return Err(Error::Structural(format!(
                "segment start value differs from the record head by {gap:e}; record jumps with apply_jump"
            )));
        }
        seg.start = self.now;
        seg.x_start.copy_from_slice(&self.head);
        self.now = seg.end;
        self.head = seg.x_end.clone();
        self.segments.push(seg);
        Ok(())
    }

    /// Record a jump at the current end of the record.
    pub fn apply_jump(&mut self, time: f64, post: Vec<f64>) -> Result<()> {
        if (time - self.now).abs() > snap_eps(self.now) {
            return Err(Error::Structural(format!(
                "jump at {time} but record ends at {}",
                self.now
            )));
        }
        if post.len() != self.dim {
            return Err(Error::Structural("jump value dimension mismatch".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::Structural(
                "cannot jump at the start of the record".into(),
            ));
        }
        if self.jumps.last().is_some_and(|j| j.time == self.now) {
            return Err(Error::Structural(format!(
                "second jump at t = {}",
                self.now
            )));
        }
        let pre = std::mem::replace(&mut self.head, post.clone());
        self.jumps.push(JumpRecord {
            time: self.now,
            pre,
            post,
        });
        Ok(())
    }

    fn range_err(&self, time: f64) -> Error {
        Error::Range {
            time,
            lo: self.start,
            hi: self.now,
        }
    }

    /// Right-continuous value `x(t)`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let eps = snap_eps(t);
        if !(t >= self.start - eps && t <= self.now + eps) {
            return Err(self.range_err(t));
        }
        if t >= self.now - eps {
            return Ok(self.head.clone());
        }
        // Segments with start <= t + eps; the last of them contains t.
        let idx = self.segments.partition_point(|s| s.start <= t + eps);
        let seg = &self.segments[idx.max(1) - 1];
        if (t - seg.start).abs() <= eps {
            return Ok(seg.x_start.clone());
        }
        Ok(seg.eval(t))
    }

    /// Left limit `x(t⁻)`; the pre-jump value at jump times.
    pub fn left_limit(&self, t: f64) -> Result<Vec<f64>> {
        let eps = snap_eps(t);
        if !(t > self.start + eps && t <= self.now + eps) || self.segments.is_empty() {
            return Err(self.range_err(t));
        }
        // First segment whose end >= t - eps contains t in (start, end].
        let idx = self.segments.partition_point(|s| s.end < t - eps);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        if (t - seg.end).abs() <= eps {
            return Ok(seg.x_end.clone());
        }
        Ok(seg.eval(t))
    }

    fn check_window(&self, lo: f64, hi: f64) -> Result<()> {
        if lo < self.start - snap_eps(lo) {
            return Err(self.range_err(lo));
        }
        if hi > self.now + snap_eps(hi) {
            return Err(self.range_err(hi));
        }
        Ok(())
    }

    /// Visit the sampling grid of `[lo, hi]`: the right value at a node on
    /// `lo`, both one-sided values at every interior node, the left limit at
    /// `hi`, and the right value at `hi` unless `left_at_hi` (the `x_{t⁻}`
    /// view). A `lo` strictly inside a step contributes nothing.
    pub fn for_each_window_sample<F>(
        &self,
        lo: f64,
        hi: f64,
        left_at_hi: bool,
        mut f: F,
    ) -> Result<()>
    where
        F: FnMut(f64, &[f64]),
    {
        self.check_window(lo, hi)?;
        let lo = lo.max(self.start);
        let hi = hi.min(self.now);
        let eps = snap_eps(hi);
        if hi - lo <= eps {
            if left_at_hi {
                f(hi, &self.left_limit(hi)?);
            } else {
                f(hi, &self.eval(hi)?);
            }
            return Ok(());
        }
        // Nodes in [lo, hi): the sample set only grows as lo decreases.
        let first = self
            .segments
            .partition_point(|s| s.start < lo - snap_eps(lo));
        for i in first..self.segments.len() {
            let seg = &self.segments[i];
            if seg.start >= hi - eps {
                break;
            }
            f(seg.start, &seg.x_start);
            if i > 0 && seg.start > lo + snap_eps(lo) {
                f(seg.start, &self.segments[i - 1].x_end);
            }
        }
        f(hi, &self.left_limit(hi)?);
        if !left_at_hi {
            f(hi, &self.eval(hi)?);
        }
        Ok(())
    }

    /// `sup_{s ∈ [t-r, t]} ‖x(s)‖` on the step grid, including left limits.
    pub fn sup_norm_window(&self, t: f64, r: f64) -> Result<f64> {
        let mut sup = 0.0_f64;
        self.for_each_window_sample(t - r, t, false, |_, x| sup = sup.max(norm(x)))?;
        Ok(sup)
    }

    /// Same as [`sup_norm_window`](Self::sup_norm_window) but for the
    /// left-limit view: the endpoint contributes `x(t⁻)` only.
    pub fn sup_norm_window_left(&self, t: f64, r: f64) -> Result<f64> {
        let mut sup = 0.0_f64;
        self.for_each_window_sample(t - r, t, true, |_, x| sup = sup.max(norm(x)))?;
        Ok(sup)
    }

    /// Componentwise `∫_{lo}^{hi} x(s) ds`, split at every node.
    pub fn integral(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        self.check_window(lo, hi)?;
        if hi < lo {
            return Err(Error::Parameter(format!(
                "integral bounds reversed: [{lo}, {hi}]"
            )));
        }
        let (lo, hi) = (lo.max(self.start), hi.min(self.now));
        let mut acc = vec![0.0; self.dim];
        let first = self.segments.partition_point(|s| s.end <= lo);
        for seg in &self.segments[first..] {
            if seg.start >= hi {
                break;
            }
            let part = seg.integral(lo.max(seg.start), hi.min(seg.end));
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
        Ok(acc)
    }

    /// `∫_{t-τ}^{t} x(s) ds`.
    pub fn window_integral(&self, t: f64, tau: f64) -> Result<Vec<f64>> {
        if !(tau > 0.0) {
            return Err(Error::Parameter(format!(
                "integration window must be positive, got {tau}"
            )));
        }
        self.integral(t - tau, t)
    }

    /// `∫_{lo}^{hi} g(s, x(s)) ds` by Simpson's rule on each stored segment.
    pub fn integral_of<G>(&self, lo: f64, hi: f64, mut g: G) -> Result<f64>
    where
        G: FnMut(f64, &[f64]) -> f64,
    {
        self.check_window(lo, hi)?;
        let (lo, hi) = (lo.max(self.start), hi.min(self.now));
        let mut acc = 0.0;
        let mut buf = vec![0.0; self.dim];
        let first = self.segments.partition_point(|s| s.end <= lo);
        for seg in &self.segments[first..] {
            if seg.start >= hi {
                break;
            }
            let (a, b) = (lo.max(seg.start), hi.min(seg.end));
            if b <= a {
                continue;
            }
            let m = 0.5 * (a + b);
            seg.eval_into(a, &mut buf);
            let fa = if a == seg.start {
                g(a, &seg.x_start)
            } else {
                g(a, &buf)
            };
            seg.eval_into(m, &mut buf);
            let fm = g(m, &buf);
            seg.eval_into(b, &mut buf);
            let fb = if b == seg.end {
                g(b, &seg.x_end)
            } else {
                g(b, &buf)
            };
            acc += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        }
        Ok(acc)
    }

    /// Drop segments that end at or before `t`.
    pub fn prune_before(&mut self, t: f64) {
        let keep_from = self.segments.partition_point(|s| s.end <= t);
        if keep_from == 0 {
            return;
        }
        self.segments.drain(..keep_from);
        self.start = self.segments.first().map_or(self.now, |s| s.start);
        let start = self.start;
        self.jumps.retain(|j| j.time > start);
    }

    /// Node times from `from` onwards (segment starts plus `now`).
    pub fn nodes_from(&self, from: f64) -> Vec<f64> {
        let eps = snap_eps(from);
        let mut out: Vec<f64> = self
            .segments
            .iter()
            .map(|s| s.start)
            .filter(|&t| t >= from - eps)
            .collect();
        if self.now >= from - eps {
            out.push(self.now);
        }
        out
    }

    pub fn is_jump_time(&self, t: f64) -> bool {
        let eps = snap_eps(t);
        self.jumps.iter().any(|j| (j.time - t).abs() <= eps)
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Parameter(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn identity_on(a: f64, b: f64) -> History {
        History::linear(b, b - a, vec![a], vec![b]).unwrap()
    }

    /// Flat segments between jumps, starting at 4 and halving at t = 1, 2.
    fn halving_cascade() -> History {
        let mut h = History::constant(0.0, 0.0, vec![4.0]).unwrap();
        h.append_segment(Segment::linear(0.0, 1.0, vec![4.0], vec![4.0]).unwrap())
            .unwrap();
        h.apply_jump(1.0, vec![2.0]).unwrap();
        h.append_segment(Segment::linear(1.0, 2.0, vec![2.0], vec![2.0]).unwrap())
            .unwrap();
        h.apply_jump(2.0, vec![1.0]).unwrap();
        h
    }

    #[test]
    fn constant_history_eval() {
        let h = History::constant(0.0, 2.0, vec![3.0, -1.0]).unwrap();
        for t in [-2.0, -1.3, 0.0] {
            assert_eq!(h.eval(t).unwrap(), vec![3.0, -1.0]);
        }
    }

    #[test]
    fn jump_right_value_and_left_limit() {
        let mut h = History::constant(0.0, 1.0, vec![2.0]).unwrap();
        h.append_segment(Segment::linear(0.0, 1.0, vec![2.0], vec![2.0]).unwrap())
            .unwrap();
        h.apply_jump(1.0, vec![1.0]).unwrap();
        assert_eq!(h.eval(1.0).unwrap(), vec![1.0]);
        assert_eq!(h.left_limit(1.0).unwrap(), vec![2.0]);
        h.append_segment(Segment::linear(1.0, 2.0, vec![1.0], vec![0.0]).unwrap())
            .unwrap();
        // still correct after more record is appended
        assert_eq!(h.eval(1.0).unwrap(), vec![1.0]);
        assert_eq!(h.left_limit(1.0).unwrap(), vec![2.0]);
        // just after the jump the post-jump branch is used
        assert_abs_diff_eq!(h.eval(1.0 + 1e-6).unwrap()[0], 1.0 - 1e-6, epsilon = 1e-12);
    }

    #[test]
    fn linear_segment_is_exact() {
        let h = identity_on(-1.0, 0.0);
        assert_abs_diff_eq!(h.eval(-0.5).unwrap()[0], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn left_limit_off_jump_set() {
        let h = History::from_fn(0.0, 1.0, 10, |s| vec![s * s], |s| vec![2.0 * s]).unwrap();
        assert_abs_diff_eq!(h.left_limit(0.5).unwrap()[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn cascaded_jumps() {
        let h = halving_cascade();
        assert_eq!(h.left_limit(2.0).unwrap(), vec![2.0]);
        assert_eq!(h.eval(2.0).unwrap(), vec![1.0]);
        assert_eq!(h.left_limit(1.0).unwrap(), vec![4.0]);
    }

    #[test]
    fn range_errors() {
        let h = identity_on(-1.0, 0.0);
        assert!(matches!(h.eval(0.5), Err(Error::Range { .. })));
        assert!(matches!(h.eval(-1.5), Err(Error::Range { .. })));
        assert!(matches!(h.left_limit(-1.0), Err(Error::Range { .. })));
        assert!(h.sup_norm_window(0.0, 2.0).is_err());
        assert!(h.window_integral(0.0, 1.5).is_err());
    }

    #[test]
    fn sup_norm_examples() {
        let h = identity_on(-1.0, 0.0);
        assert_eq!(h.sup_norm_window(0.0, 1.0).unwrap(), 1.0);
        let c = History::constant(0.0, 1.0, vec![-3.0]).unwrap();
        assert_eq!(c.sup_norm_window(0.0, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn sup_norm_sees_left_limits() {
        let mut h = History::constant(0.0, 1.0, vec![1.0]).unwrap();
        h.append_segment(Segment::linear(0.0, 1.0, vec![1.0], vec![5.0]).unwrap())
            .unwrap();
        h.apply_jump(1.0, vec![0.5]).unwrap();
        h.append_segment(Segment::linear(1.0, 2.0, vec![0.5], vec![0.5]).unwrap())
            .unwrap();
        assert_eq!(h.sup_norm_window(2.0, 1.5).unwrap(), 5.0);
        // the left view at the jump itself also sees the pre-jump value
        assert_eq!(h.sup_norm_window_left(1.0, 0.5).unwrap(), 5.0);
    }

    #[test]
    fn window_integral_examples() {
        let c = History::constant(0.0, 1.0, vec![2.5]).unwrap();
        assert_abs_diff_eq!(
            c.window_integral(0.0, 1.0).unwrap()[0],
            2.5,
            epsilon = 1e-15
        );
        let h = identity_on(-1.0, 0.0);
        assert_abs_diff_eq!(
            h.window_integral(0.0, 1.0).unwrap()[0],
            -0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn window_integral_of_sine_matches_trapezoid_oracle() {
        let pi = std::f64::consts::PI;
        let h = History::from_fn(0.0, pi, 2000, |s| vec![s.sin()], |s| vec![s.cos()]).unwrap();
        let got = h.window_integral(pi, pi).unwrap()[0];
        // trapezoid oracle on 10^6 nodes
        let n = 1_000_000;
        let dx = pi / n as f64;
        let oracle: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * (i as f64 * dx).sin()
            })
            .sum::<f64>()
            * dx;
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-8);
        assert_abs_diff_eq!(got, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn integral_splits_at_jumps() {
        let h = halving_cascade();
        // 4 on [0,1), 2 on [1,2)
        assert_abs_diff_eq!(h.integral(0.5, 1.5).unwrap()[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn append_contiguity() {
        let mut h = History::constant(0.0, 0.0, vec![1.0]).unwrap();
        h.append_segment(Segment::linear(0.0, 1.0, vec![1.0], vec![2.0]).unwrap())
            .unwrap();
        h.append_segment(Segment::linear(1.0, 2.0, vec![2.0], vec![3.0]).unwrap())
            .unwrap();
        assert_eq!(h.now(), 2.0);
        assert_eq!(h.segments().len(), 2);
        let gap = Segment::linear(2.5, 3.0, vec![3.0], vec![3.0]).unwrap();
        assert!(matches!(h.append_segment(gap), Err(Error::Structural(_))));
        let mismatch = Segment::linear(2.0, 3.0, vec![7.0], vec![3.0]).unwrap();
        assert!(matches!(
            h.append_segment(mismatch),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn identity_jump_keeps_continuity() {
        let mut h = History::constant(0.0, 0.0, vec![1.0]).unwrap();
        h.append_segment(Segment::linear(0.0, 1.0, vec![1.0], vec![2.0]).unwrap())
            .unwrap();
        h.apply_jump(1.0, vec![2.0]).unwrap();
        assert_eq!(h.eval(1.0).unwrap(), h.left_limit(1.0).unwrap());
        assert!(h.apply_jump(1.0, vec![2.0]).is_err());
    }

    #[test]
    fn snapping_near_nodes() {
        let h = halving_cascade();
        let t = 0.1 * 3.0 + 0.7; // 1.0000000000000000 or a few ulps off
        assert_eq!(h.eval(t).unwrap(), vec![2.0]);
        assert_eq!(h.eval(1.0 - 1e-13).unwrap(), vec![2.0]);
        assert_eq!(h.left_limit(1.0 + 1e-13).unwrap(), vec![4.0]);
    }

    #[test]
    fn pruning_keeps_recent_record() {
        let mut h = History::from_fn(0.0, 10.0, 10, |s| vec![s], |_| vec![1.0]).unwrap();
        h.prune_before(4.5);
        assert_eq!(h.start(), 4.0);
        assert!(h.eval(3.9).is_err());
        assert_abs_diff_eq!(h.eval(7.25).unwrap()[0], 7.25, epsilon = 1e-14);
    }

    fn cubic(s: f64) -> f64 {
        0.3 * s * s * s - 1.2 * s * s + 0.5 * s - 2.0
    }
    fn dcubic(s: f64) -> f64 {
        0.9 * s * s - 2.4 * s + 0.5
    }

    proptest! {
        #[test]
        fn eval_equals_left_limit_off_jumps(t in -0.999f64..2.0) {
            let h = History::from_fn(-1.0, 2.0, 7, |s| vec![s.cos(), s], |s| vec![-s.sin(), 1.0]).unwrap();
            prop_assert_eq!(h.eval(t).unwrap(), h.left_limit(t).unwrap());
        }

        #[test]
        fn integral_is_additive(lo in -1.0f64..0.0, frac in 0.0f64..1.0) {
            let h = History::from_fn(-1.0, 2.0, 13, |s| vec![s.sin()], |s| vec![s.cos()]).unwrap();
            let hi = 2.0;
            let m = lo + frac * (hi - lo);
            let whole = h.integral(lo, hi).unwrap()[0];
            let parts = h.integral(lo, m).unwrap()[0] + h.integral(m, hi).unwrap()[0];
            prop_assert!((whole - parts).abs() <= 1e-12);
        }

        #[test]
        fn sup_norm_monotone_in_window(r1 in 0.0f64..3.0, extra in 0.0f64..3.0) {
            let h = History::from_fn(-4.0, 2.0, 60, |s| vec![(3.0 * s).sin() * s], |s| vec![3.0 * (3.0 * s).cos() * s + (3.0 * s).sin()]).unwrap();
            let r2 = (r1 + extra).min(6.0);
            prop_assert!(h.sup_norm_window(2.0, r1).unwrap() <= h.sup_norm_window(2.0, r2).unwrap());
        }

        #[test]
        fn hermite_reproduces_cubics(t in -1.0f64..3.0) {
            let h = History::from_fn(-1.0, 3.0, 5, |s| vec![cubic(s)], |s| vec![dcubic(s)]).unwrap();
            prop_assert!((h.eval(t).unwrap()[0] - cubic(t)).abs() <= 1e-10);
        }
    }
}
