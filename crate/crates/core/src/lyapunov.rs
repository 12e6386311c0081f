//! Lyapunov pairs `V = V1 + V2` and numerical checks of the flow, jump and
//! functional-bound conditions along simulated trajectories.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::history::snap_eps;
use crate::integrator::Trajectory;
use crate::linalg::norm;
use crate::model::StateView;

pub type V1Fn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
pub type V2Fn = dyn Fn(f64, &StateView<'_>) -> Result<f64> + Send + Sync;
/// Scalar gain `s ↦ g(s)` on `[0, ∞)`.
pub type Gain = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn gain<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Gain {
    Arc::new(f)
}

pub fn zero_gain() -> Gain {
    gain(|_| 0.0)
}

#[derive(Clone)]
pub struct LyapunovPair {
    v1: Arc<V1Fn>,
    v2: Option<Arc<V2Fn>>,
    lookback: f64,
    pub alpha1: Option<Gain>,
    pub alpha2: Option<Gain>,
    pub alpha3: Option<Gain>,
    pub kappa: Option<f64>,
    pub chi_flow: Gain,
    pub chi_jump: Gain,
}

impl fmt::Debug for LyapunovPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovPair")
            .field("has_v2", &self.v2.is_some())
            .field("lookback", &self.lookback)
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

impl LyapunovPair {
    /// Pair with `V2 ≡ 0` and zero gains. `lookback` is the window `r` used
    /// for the sup terms.
    pub fn new<F>(v1: F, lookback: f64) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            v1: Arc::new(v1),
            v2: None,
            lookback,
            alpha1: None,
            alpha2: None,
            alpha3: None,
            kappa: None,
            chi_flow: zero_gain(),
            chi_jump: zero_gain(),
        }
    }

    pub fn with_v2<F>(mut self, v2: F) -> Self
    where
        F: Fn(f64, &StateView<'_>) -> Result<f64> + Send + Sync + 'static,
    {
        self.v2 = Some(Arc::new(v2));
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = Some(kappa);
        self
    }

    pub fn with_gains(mut self, chi_flow: Gain, chi_jump: Gain) -> Self {
        self.chi_flow = chi_flow;
        self.chi_jump = chi_jump;
        self
    }

    pub fn with_bounds(mut self, alpha1: Gain, alpha2: Gain, alpha3: Option<Gain>) -> Self {
        self.alpha1 = Some(alpha1);
        self.alpha2 = Some(alpha2);
        self.alpha3 = alpha3;
        self
    }

    pub fn lookback(&self) -> f64 {
        self.lookback
    }

    pub fn v1(&self, t: f64, x: &[f64]) -> f64 {
        (self.v1)(t, x)
    }

    pub fn v2(&self, t: f64, view: &StateView<'_>) -> Result<f64> {
        match &self.v2 {
            Some(f) => f(t, view),
            None => Ok(0.0),
        }
    }

    fn check_lookback(&self, traj: &Trajectory) -> Result<()> {
        if self.lookback > traj.delay_bound + snap_eps(traj.delay_bound) {
            return Err(Error::DelayBound {
                offset: self.lookback,
                bound: traj.delay_bound,
            });
        }
        Ok(())
    }

    fn check_time(&self, traj: &Trajectory, t: f64) -> Result<()> {
        if t < traj.t0 - snap_eps(traj.t0) || t > traj.t_end + snap_eps(traj.t_end) {
            return Err(Error::Range {
                time: t,
                lo: traj.t0,
                hi: traj.t_end,
            });
        }
        Ok(())
    }

    /// `(V, V1, V2)` at `t` on the right-continuous state.
    pub fn eval_v(&self, traj: &Trajectory, t: f64) -> Result<VValue> {
        self.check_time(traj, t)?;
        self.check_lookback(traj)?;
        let v1 = self.v1(t, &traj.eval(t)?);
        let v2 = self.v2(t, &StateView::at_time(&traj.history, t, self.lookback))?;
        Ok(VValue::new(v1, v2))
    }

    /// `(V, V1, V2)` on the left-limit view `x_{t⁻}`.
    pub fn eval_v_left(&self, traj: &Trajectory, t: f64) -> Result<VValue> {
        self.check_time(traj, t)?;
        self.check_lookback(traj)?;
        let v1 = self.v1(t, &traj.left_limit(t)?);
        let v2 = self.v2(t, &StateView::left_limit(&traj.history, t, self.lookback))?;
        Ok(VValue::new(v1, v2))
    }

    /// Forward difference `[V((t+h)⁻) - V(t)] / h`.
    pub fn dini_estimate(&self, traj: &Trajectory, t: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::Parameter(format!(
                "difference step must be positive, got {h}"
            )));
        }
        let hi = t + h;
        let eps = snap_eps(hi);
        if let Some(e) = traj
            .events
            .iter()
            .find(|e| e.time > t + snap_eps(t) && e.time < hi - eps)
        {
            return Err(Error::Contract(format!(
                "difference window [{t}, {hi}] straddles impulse {} at {}",
                e.index, e.time
            )));
        }
        let a = self.eval_v(traj, t)?.v;
        let b = self.eval_v_left(traj, hi)?.v;
        Ok((b - a) / h)
    }

    /// `sup_{s ∈ [-r, 0]} V1(t⁻ + s, x(t⁻ + s))` on the sampling grid.
    pub fn sup_v1_left(&self, traj: &Trajectory, t: f64) -> Result<f64> {
        let mut sup = 0.0_f64;
        traj.history
            .for_each_window_sample(t - self.lookback, t, true, |s, x| {
                sup = sup.max(self.v1(s, x))
            })?;
        Ok(sup)
    }

    /// `sup_{s ∈ [-r, 0]} V1(t + s, x(t + s))` on the sampling grid.
    pub fn sup_v1(&self, traj: &Trajectory, t: f64) -> Result<f64> {
        let mut sup = 0.0_f64;
        traj.history
            .for_each_window_sample(t - self.lookback, t, false, |s, x| {
                sup = sup.max(self.v1(s, x))
            })?;
        Ok(sup)
    }

    /// Scan every flow step for `D⁺V ∓ μV - χ(‖w‖) ≤ tol`.
    ///
    /// The forward difference over a step equals the mean of `D⁺V` over that
    /// step, so it is compared with the trapezoidal mean of the right-hand
    /// side at the two ends.
    pub fn check_flow_condition(
        &self,
        traj: &Trajectory,
        mu: f64,
        mode: TheoremMode,
        tol: Tolerance,
    ) -> Result<ViolationReport> {
        self.check_lookback(traj)?;
        let sign = match mode {
            TheoremMode::Stable => 1.0,
            TheoremMode::Unstable => -1.0,
        };
        let grid = traj.grid();
        let mut report = ViolationReport::default();
        let mut prev: Option<(f64, f64)> = None;
        for pair in grid.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let va = match prev {
                Some((t, v)) if t == a && traj.event_at(a).is_none() => v,
                _ => self.eval_v(traj, a)?.v,
            };
            let vb = self.eval_v_left(traj, b)?.v;
            let vb_right = if traj.event_at(b).is_some() {
                None
            } else {
                Some(vb)
            };
            prev = vb_right.map(|v| (b, v));

            let est = (vb - va) / (b - a);
            let wa = norm(&traj.input.eval(a));
            let wb = norm(&traj.input.left_limit(b));
            let rhs_a = -sign * mu * va + (self.chi_flow)(wa);
            let rhs_b = -sign * mu * vb + (self.chi_flow)(wb);
            let excess = est - 0.5 * (rhs_a + rhs_b);
            report.record(a, excess, tol.allowed(va.abs().max(vb.abs())));
        }
        Ok(report)
    }

    /// Per-event excess `V1(post) - ρ1 V1(pre) - ρ2 sup V1 - χ_jump(arg)`.
    /// `arg` is `‖w(t_k⁻)‖` in stable mode and the input sup over
    /// `[t_k - r, t_k)` in unstable mode.
    pub fn check_jump_condition(
        &self,
        traj: &Trajectory,
        rho1: f64,
        rho2: f64,
        mode: TheoremMode,
        tol: Tolerance,
    ) -> Result<JumpReport> {
        let mut report = JumpReport::default();
        for e in &traj.events {
            let t = e.time;
            let post = self.v1(t, &e.post);
            let pre = self.v1(t, &e.pre);
            let sup = self.sup_v1_left(traj, t)?;
            let arg = match mode {
                TheoremMode::Stable => norm(&traj.input.left_limit(t)),
                TheoremMode::Unstable => traj.input.sup_norm_left(t - self.lookback, t),
            };
            let bound = rho1 * pre + rho2 * sup + (self.chi_jump)(arg);
            let excess = post - bound;
            let violated = excess > tol.allowed(bound.abs());
            report.per_event.push(EventExcess {
                index: e.index,
                time: t,
                v1_pre: pre,
                v1_post: post,
                sup_v1: sup,
                excess,
            });
            if violated {
                report.violations += 1;
            }
            if excess > report.max_excess {
                report.max_excess = excess;
            }
        }
        Ok(report)
    }

    /// Scan `V2(t, x_t) - κ sup V1` over the grid.
    pub fn check_functional_bound(
        &self,
        traj: &Trajectory,
        tol: Tolerance,
    ) -> Result<ViolationReport> {
        let kappa = self
            .kappa
            .ok_or_else(|| Error::Config("functional bound requires kappa".into()))?;
        self.check_lookback(traj)?;
        let mut report = ViolationReport::default();
        for t in traj.grid() {
            let v2 = self.v2(t, &StateView::at_time(&traj.history, t, self.lookback))?;
            let bound = kappa * self.sup_v1(traj, t)?;
            report.record(t, v2 - bound, tol.allowed(bound));
        }
        Ok(report)
    }

    /// `α1(‖x‖) ≤ V1(t, x) ≤ α2(‖x‖)` at the given points.
    pub fn check_sandwich(&self, points: &[(f64, Vec<f64>)]) -> Result<()> {
        let (a1, a2) = match (&self.alpha1, &self.alpha2) {
            (Some(a1), Some(a2)) => (a1, a2),
            _ => {
                return Err(Error::Config(
                    "sandwich check requires alpha1 and alpha2".into(),
                ))
            }
        };
        for (t, x) in points {
            let n = norm(x);
            let v = self.v1(*t, x);
            let (lo, hi) = (a1(n), a2(n));
            let slack = 1e-12 * v.abs().max(1.0);
            if lo > v + slack || v > hi + slack {
                return Err(Error::Contract(format!(
                    "sandwich fails at t = {t}, |x| = {n}: {lo} <= {v} <= {hi}"
                )));
            }
        }
        Ok(())
    }
}

/// Spot check of class-K∞ shape: `g(0) = 0` and strictly increasing on a
/// log-spaced grid over `[1e-6, 1e2]`.
pub fn check_class_kinf(name: &str, g: &Gain) -> Result<()> {
    if g(0.0) != 0.0 {
        return Err(Error::Contract(format!(
            "{name}(0) = {} is not zero",
            g(0.0)
        )));
    }
    let mut prev = 0.0;
    for i in 0..=80 {
        let s = 10f64.powf(-6.0 + 8.0 * i as f64 / 80.0);
        let v = g(s);
        if !v.is_finite() || v <= prev {
            return Err(Error::Contract(format!(
                "{name} not strictly increasing at s = {s}"
            )));
        }
        prev = v;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VValue {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
}

impl VValue {
    fn new(v1: f64, v2: f64) -> Self {
        Self { v: v1 + v2, v1, v2 }
    }
}

/// Which sign the flow condition carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremMode {
    /// `D⁺V ≤ -μV + χ`, jump gain on `‖w(t⁻)‖`.
    Stable,
    /// `D⁺V ≤ μV + χ`, jump gain on the windowed input sup.
    Unstable,
}

/// Allowed excess `abs + rel·|reference|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn mixed(tol: f64) -> Self {
        Self { abs: tol, rel: tol }
    }

    pub fn allowed(&self, reference: f64) -> f64 {
        self.abs + self.rel * reference.abs()
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::mixed(1e-6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub max_excess: f64,
    pub time_of_max: f64,
    pub violations: usize,
    pub samples: usize,
}

impl Default for ViolationReport {
    fn default() -> Self {
        Self {
            max_excess: f64::NEG_INFINITY,
            time_of_max: f64::NAN,
            violations: 0,
            samples: 0,
        }
    }
}

impl ViolationReport {
    fn record(&mut self, t: f64, excess: f64, allowed: f64) {
        self.samples += 1;
        if excess > allowed || excess.is_nan() {
            self.violations += 1;
        }
        if excess > self.max_excess || self.max_excess.is_nan() {
            self.max_excess = excess;
            self.time_of_max = t;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventExcess {
    pub index: usize,
    pub time: f64,
    pub v1_pre: f64,
    pub v1_post: f64,
    pub sup_v1: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpReport {
    pub per_event: Vec<EventExcess>,
    pub max_excess: f64,
    pub violations: usize,
}

impl Default for JumpReport {
    fn default() -> Self {
        Self {
            per_event: Vec::new(),
            max_excess: f64::NEG_INFINITY,
            violations: 0,
        }
    }
}

impl JumpReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}
