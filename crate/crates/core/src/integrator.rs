//! Method-of-steps RK4 integration with impulses applied at grid-aligned times.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::history::{snap_eps, History, Segment};
use crate::linalg::norm;
use crate::model::{ImpulseSchedule, ImpulsiveSystem, InputSignal, ScheduleReport, StateView};

pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// One applied impulse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpEvent {
    /// 1-based impulse index `k`.
    pub index: usize,
    pub time: f64,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub divergence_limit: f64,
    /// Drop record older than `t - r - keep` while integrating. `None` keeps
    /// the whole run.
    pub prune_keep: Option<f64>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            divergence_limit: DIVERGENCE_LIMIT,
            prune_keep: None,
        }
    }
}

/// Result of a simulation on `[t0, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub history: History,
    pub events: Vec<JumpEvent>,
    pub input: InputSignal,
    pub step: f64,
    pub flow_evals: usize,
    pub t0: f64,
    pub t_end: f64,
    pub delay_bound: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.history.dim()
    }

    /// Grid nodes in `[t0, t_end]`; impulse times appear once.
    pub fn grid(&self) -> Vec<f64> {
        self.history.nodes_from(self.t0)
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.history.eval(t)
    }

    pub fn left_limit(&self, t: f64) -> Result<Vec<f64>> {
        self.history.left_limit(t)
    }

    pub fn final_state(&self) -> &[f64] {
        self.history.head()
    }

    /// Right-continuous view `x_t`.
    pub fn view(&self, t: f64) -> StateView<'_> {
        StateView::at_time(&self.history, t, self.delay_bound)
    }

    /// Left-limit view `x_{t⁻}`.
    pub fn view_left(&self, t: f64) -> StateView<'_> {
        StateView::left_limit(&self.history, t, self.delay_bound)
    }

    pub fn event_at(&self, t: f64) -> Option<&JumpEvent> {
        let eps = snap_eps(t);
        self.events.iter().find(|e| (e.time - t).abs() <= eps)
    }

    /// `(t, ‖x(t)‖)` over the grid for the components in `range`, with an
    /// extra pre-jump sample before each event.
    pub fn norm_samples(&self, range: std::ops::Range<usize>) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for t in self.grid() {
            if let Some(e) = self.event_at(t) {
                out.push((t, norm(&e.pre[range.clone()])));
            }
            if let Ok(x) = self.eval(t) {
                out.push((t, norm(&x[range.clone()])));
            }
        }
        out
    }

    pub fn sup_norm(&self, range: std::ops::Range<usize>) -> f64 {
        self.norm_samples(range)
            .into_iter()
            .map(|(_, n)| n)
            .fold(0.0, f64::max)
    }
}

/// Integrate with default options.
pub fn simulate(
    sys: &ImpulsiveSystem,
    phi: &History,
    w: &InputSignal,
    sched: &ImpulseSchedule,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    simulate_with(sys, phi, w, sched, t_end, h, &SimulationOptions::default())
}

/// Integrate `sys` from the initial function `phi` (whose last time is `t0`)
/// to `t_end` with nominal step `h`.
pub fn simulate_with(
    sys: &ImpulsiveSystem,
    phi: &History,
    w: &InputSignal,
    sched: &ImpulseSchedule,
    t_end: f64,
    h: f64,
    opts: &SimulationOptions,
) -> Result<Trajectory> {
    let t0 = phi.now();
    let r = sys.delay_bound();
    check_inputs(sys, phi, w, t0, t_end, h)?;
    if let ScheduleReport::Violation { index, gap } = sched.validate(t0)? {
        return Err(Error::Parameter(format!(
            "schedule violates declared class {} at index {index} (gap {gap})",
            sched.class()
        )));
    }

    let mut hist = phi.clone();
    let mut events = Vec::new();
    let mut evals = 0usize;
    let mut y = hist.head().to_vec();
    let mut k1 = sys.flow(t0, &StateView::at_time(&hist, t0, r), &w.eval(t0))?;
    evals += 1;

    let impulses: Vec<(usize, f64)> = sched.within(t0, t_end).collect();
    let mut breaks: Vec<(f64, Option<usize>)> =
        impulses.iter().map(|&(k, t)| (t, Some(k))).collect();
    if breaks
        .last()
        .map_or(true, |&(t, _)| t < t_end - snap_eps(t_end))
    {
        breaks.push((t_end, None));
    }

    let mut t = t0;
    for (bp, impulse) in breaks {
        let len = bp - t;
        if len > snap_eps(bp) {
            let n = ((len / h) - 1e-9).ceil().max(1.0) as usize;
            let hh = len / n as f64;
            let start = t;
            for i in 0..n {
                let t_next = if i + 1 == n {
                    bp
                } else {
                    start + (i + 1) as f64 * hh
                };
                let step = t_next - t;
                let (y_next, f_next) = rk4_step(sys, &hist, w, t, step, &y, &k1, r)?;
                evals += 4;
                check_state(&y_next, t_next, opts.divergence_limit)?;
                hist.append_segment(Segment::new(
                    t,
                    t_next,
                    y,
                    y_next.clone(),
                    k1,
                    f_next.clone(),
                )?)?;
                y = y_next;
                k1 = f_next;
                t = t_next;
                if let Some(keep) = opts.prune_keep {
                    hist.prune_before(t - r - keep);
                }
            }
        }
        if let Some(k) = impulse {
            let w_left = w.left_limit(bp);
            let delta = sys.jump(k, bp, &StateView::left_limit(&hist, bp, r), &w_left)?;
            let post: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a + d).collect();
            check_state(&post, bp, opts.divergence_limit)?;
            hist.apply_jump(bp, post.clone())?;
            events.push(JumpEvent {
                index: k,
                time: bp,
                pre: std::mem::replace(&mut y, post),
                post: y.clone(),
                delta,
            });
            k1 = sys.flow(bp, &StateView::at_time(&hist, bp, r), &w.eval(bp))?;
            evals += 1;
        }
    }

    Ok(Trajectory {
        history: hist,
        events,
        input: w.clone(),
        step: h,
        flow_evals: evals,
        t0,
        t_end,
        delay_bound: r,
    })
}

fn check_inputs(
    sys: &ImpulsiveSystem,
    phi: &History,
    w: &InputSignal,
    t0: f64,
    t_end: f64,
    h: f64,
) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Parameter(format!("step must be positive, got {h}")));
    }
    if !(t_end >= t0) || !t_end.is_finite() {
        return Err(Error::Parameter(format!(
            "t_end {t_end} must be finite and >= t0 {t0}"
        )));
    }
    if phi.dim() != sys.dim() {
        return Err(Error::Parameter(format!(
            "initial history has dimension {}, system expects {}",
            phi.dim(),
            sys.dim()
        )));
    }
    let r = sys.delay_bound();
    if phi.start() > t0 - r + snap_eps(t0 - r) {
        return Err(Error::Range {
            time: t0 - r,
            lo: phi.start(),
            hi: t0,
        });
    }
    w.validate()?;
    if w.dim() != sys.input_dim() {
        return Err(Error::Parameter(format!(
            "input has dimension {}, system expects {}",
            w.dim(),
            sys.input_dim()
        )));
    }
    let positive = sys.discrete_delays().iter().copied().filter(|d| *d > 0.0);
    if let Some(dmin) = positive.clone().reduce(f64::min) {
        if h > dmin * (1.0 + 1e-12) {
            return Err(Error::Parameter(format!(
                "step {h} exceeds the smallest discrete delay {dmin}"
            )));
        }
    }
    for d in positive {
        let ratio = d / h;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            log::warn!("step {h} does not divide delay {d}; accuracy near delayed kinks degrades");
        }
    }
    Ok(())
}

fn check_state(x: &[f64], t: f64, limit: f64) -> Result<()> {
    let n = norm(x);
    if !n.is_finite() || n > limit {
        return Err(Error::Divergence { time: t, norm: n });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn rk4_step(
    sys: &ImpulsiveSystem,
    hist: &History,
    w: &InputSignal,
    t: f64,
    h: f64,
    y: &[f64],
    k1: &[f64],
    r: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let axpy =
        |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(yi, ki)| yi + a * ki).collect() };
    let tm = t + 0.5 * h;
    let te = t + h;
    let wm = w.eval(tm);

    let y2 = axpy(0.5 * h, k1);
    let k2 = sys.flow(tm, &StateView::stage(hist, tm, r, &y2), &wm)?;
    let y3 = axpy(0.5 * h, &k2);
    let k3 = sys.flow(tm, &StateView::stage(hist, tm, r, &y3), &wm)?;
    let y4 = axpy(h, &k3);
    let we = w.eval(te);
    let k4 = sys.flow(te, &StateView::stage(hist, te, r, &y4), &we)?;

    let y_next: Vec<f64> = (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    let f_next = sys.flow(te, &StateView::stage(hist, te, r, &y_next), &we)?;
    Ok((y_next, f_next))
}

/// Endpoint states at `h`, `h/2`, `h/4` and the observed order.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub steps: [f64; 3],
    pub endpoints: Vec<Vec<f64>>,
    /// `‖x_h - x_{h/2}‖` and `‖x_{h/2} - x_{h/4}‖`.
    pub differences: [f64; 2],
    /// `log2(d1 / d2)`; `None` when `d2` vanishes.
    pub order: Option<f64>,
}

pub fn refine_check(
    sys: &ImpulsiveSystem,
    phi: &History,
    w: &InputSignal,
    sched: &ImpulseSchedule,
    t_end: f64,
    h: f64,
) -> Result<ConvergenceTable> {
    let steps = [h, h / 2.0, h / 4.0];
    let endpoints = steps
        .iter()
        .map(|&s| simulate(sys, phi, w, sched, t_end, s).map(|tr| tr.final_state().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let diff =
        |a: &[f64], b: &[f64]| norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    let d1 = diff(&endpoints[0], &endpoints[1]);
    let d2 = diff(&endpoints[1], &endpoints[2]);
    let order = (d2 > 0.0).then(|| (d1 / d2).log2());
    Ok(ConvergenceTable {
        steps,
        endpoints,
        differences: [d1, d2],
        order,
    })
}
