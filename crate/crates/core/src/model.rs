//! Impulsive time-delay systems, their inputs, and impulse time sequences.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{snap_eps, History};
use crate::linalg::norm;

/// Delayed-state view `x_t` (or `x_{t⁻}`) handed to flow and jump maps.
///
/// Offsets are in `[-lookback, 0]`. Offset 0 returns the stage value when the
/// view is built mid-step, the left limit for a jump view, and the stored
/// right value otherwise.
pub struct StateView<'a> {
    history: &'a History,
    time: f64,
    lookback: f64,
    current: Option<&'a [f64]>,
    left: bool,
}

impl<'a> StateView<'a> {
    /// View at a stored time (right-continuous at offset 0).
    pub fn at_time(history: &'a History, time: f64, lookback: f64) -> Self {
        Self {
            history,
            time,
            lookback,
            current: None,
            left: false,
        }
    }

    /// Left-limit view `x_{t⁻}`: offset 0 is `x(t⁻)`, offsets `s < 0` use
    /// right values.
    pub fn left_limit(history: &'a History, time: f64, lookback: f64) -> Self {
        Self {
            left: true,
            ..Self::at_time(history, time, lookback)
        }
    }

    /// View at an integrator stage: offset 0 is `current`, which need not be
    /// stored yet.
    pub fn stage(history: &'a History, time: f64, lookback: f64, current: &'a [f64]) -> Self {
        Self {
            history,
            time,
            lookback,
            current: Some(current),
            left: false,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn lookback(&self) -> f64 {
        self.lookback
    }

    pub fn history(&self) -> &History {
        self.history
    }

    pub fn dim(&self) -> usize {
        self.history.dim()
    }

    /// Value at offset 0.
    pub fn current(&self) -> Result<Vec<f64>> {
        match self.current {
            Some(c) => Ok(c.to_vec()),
            None if self.left => self.history.left_limit(self.time),
            None => self.history.eval(self.time),
        }
    }

    fn check_offset(&self, offset: f64) -> Result<()> {
        let eps = snap_eps(self.time);
        if offset > eps {
            return Err(Error::Contract(format!(
                "positive offset {offset} looks into the future"
            )));
        }
        if offset < -self.lookback - eps {
            return Err(Error::DelayBound {
                offset: -offset,
                bound: self.lookback,
            });
        }
        Ok(())
    }

    fn check_stored(&self, t: f64) -> Result<()> {
        if t > self.history.now() + snap_eps(t) {
            return Err(Error::Contract(format!(
                "delayed lookup at {t} falls inside the current step (record ends at {}); \
                 the step must not exceed the smallest delay",
                self.history.now()
            )));
        }
        Ok(())
    }

    /// `x(t + offset)` for `offset ∈ [-lookback, 0]`.
    pub fn at(&self, offset: f64) -> Result<Vec<f64>> {
        self.check_offset(offset)?;
        if offset.abs() <= snap_eps(self.time) {
            return self.current();
        }
        let t = self.time + offset;
        self.check_stored(t)?;
        self.history.eval(t)
    }

    /// Componentwise `∫_{t-window}^{t} x(s) ds`. When the view sits inside
    /// an unfinished step the uncovered tail is closed with a trapezoid.
    pub fn integral(&self, window: f64) -> Result<Vec<f64>> {
        self.check_offset(-window)?;
        let lo = self.time - window;
        let now = self.history.now();
        match self.current {
            Some(cur) if self.time > now + snap_eps(now) => {
                self.check_stored(lo)?;
                let mut acc = self.history.integral(lo, now)?;
                let tail = self.time - now;
                for ((a, h), c) in acc.iter_mut().zip(self.history.head()).zip(cur) {
                    *a += 0.5 * tail * (h + c);
                }
                Ok(acc)
            }
            _ => self.history.integral(lo, self.time),
        }
    }

    /// `∫_{-window}^{0} g(s, x(t+s)) ds` with `s` the offset. Only defined on
    /// stored record.
    pub fn integral_of<G>(&self, window: f64, mut g: G) -> Result<f64>
    where
        G: FnMut(f64, &[f64]) -> f64,
    {
        self.check_offset(-window)?;
        self.check_stored(self.time)?;
        let t = self.time;
        self.history.integral_of(t - window, t, |s, x| g(s - t, x))
    }

    /// `sup_{s ∈ [-window, 0]} ‖x(t+s)‖` on the stored grid.
    pub fn sup_norm(&self, window: f64) -> Result<f64> {
        self.check_offset(-window)?;
        let now = self.history.now();
        match self.current {
            Some(cur) if self.time > now + snap_eps(now) => {
                let lo = self.time - window;
                self.check_stored(lo)?;
                let stored = if lo < now {
                    self.history.sup_norm_window(now, now - lo)?
                } else {
                    0.0
                };
                Ok(stored.max(norm(cur)))
            }
            _ if self.left => self.history.sup_norm_window_left(self.time, window),
            _ => self.history.sup_norm_window(self.time, window),
        }
    }
}

pub type FlowFn = dyn Fn(f64, &StateView<'_>, &[f64]) -> Result<Vec<f64>> + Send + Sync;
pub type JumpFn = dyn Fn(usize, f64, &StateView<'_>, &[f64]) -> Result<Vec<f64>> + Send + Sync;

/// `ẋ = f(t, x_t, w(t))` between impulses, `Δx = I_k(t, x_{t⁻}, w(t⁻))` at
/// impulse times.
#[derive(Clone)]
pub struct ImpulsiveSystem {
    name: String,
    dim: usize,
    input_dim: usize,
    delay_bound: f64,
    discrete_delays: Vec<f64>,
    flow: Arc<FlowFn>,
    jump: Arc<JumpFn>,
}

impl fmt::Debug for ImpulsiveSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImpulsiveSystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("input_dim", &self.input_dim)
            .field("delay_bound", &self.delay_bound)
            .field("discrete_delays", &self.discrete_delays)
            .finish_non_exhaustive()
    }
}

impl ImpulsiveSystem {
    pub fn new<F, J>(
        dim: usize,
        input_dim: usize,
        delay_bound: f64,
        flow: F,
        jump: J,
    ) -> Result<Self>
    where
        F: Fn(f64, &StateView<'_>, &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
        J: Fn(usize, f64, &StateView<'_>, &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::Parameter("state dimension must be positive".into()));
        }
        if !(delay_bound >= 0.0) || !delay_bound.is_finite() {
            return Err(Error::Parameter(format!(
                "delay bound must be >= 0, got {delay_bound}"
            )));
        }
        Ok(Self {
            name: "custom".into(),
            dim,
            input_dim,
            delay_bound,
            discrete_delays: Vec::new(),
            flow: Arc::new(flow),
            jump: Arc::new(jump),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Declare the point delays used by the maps so the integrator can warn
    /// when the step does not divide them.
    pub fn with_discrete_delays(mut self, delays: Vec<f64>) -> Self {
        self.discrete_delays = delays;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn delay_bound(&self) -> f64 {
        self.delay_bound
    }

    pub fn discrete_delays(&self) -> &[f64] {
        &self.discrete_delays
    }

    pub fn flow(&self, t: f64, view: &StateView<'_>, w: &[f64]) -> Result<Vec<f64>> {
        let v = (self.flow)(t, view, w)?;
        if v.len() != self.dim {
            return Err(Error::Contract(format!(
                "flow returned {} components, expected {}",
                v.len(),
                self.dim
            )));
        }
        Ok(v)
    }

    pub fn jump(&self, k: usize, t: f64, view: &StateView<'_>, w_left: &[f64]) -> Result<Vec<f64>> {
        let v = (self.jump)(k, t, view, w_left)?;
        if v.len() != self.dim {
            return Err(Error::Contract(format!(
                "jump returned {} components, expected {}",
                v.len(),
                self.dim
            )));
        }
        Ok(v)
    }

    /// Evaluate flow and jump at the zero history and zero input; returns the
    /// two outputs so callers can assert they vanish.
    pub fn at_equilibrium(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let hist = History::constant(t, self.delay_bound.max(1e-3), vec![0.0; self.dim])?;
        let w = vec![0.0; self.input_dim];
        let f = self.flow(t, &StateView::at_time(&hist, t, self.delay_bound), &w)?;
        let j = self.jump(1, t, &StateView::left_limit(&hist, t, self.delay_bound), &w)?;
        Ok((f, j))
    }
}

/// Exogenous input `w(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum InputSignal {
    Zero {
        #[serde(default = "one")]
        dim: usize,
    },
    /// `amplitude · e^{-rate t}`
    ExpDecay { amplitude: f64, rate: f64 },
    /// `amplitude · sin(omega t + phase)`
    Sinusoid {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Right-continuous steps: `levels[0]` before `breakpoints[0]`,
    /// `levels[i + 1]` on `[breakpoints[i], breakpoints[i + 1])`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        levels: Vec<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

impl Default for InputSignal {
    fn default() -> Self {
        InputSignal::Zero { dim: 1 }
    }
}

impl InputSignal {
    pub fn zero(dim: usize) -> Self {
        InputSignal::Zero { dim }
    }

    pub fn exp_decay(amplitude: f64, rate: f64) -> Self {
        InputSignal::ExpDecay { amplitude, rate }
    }

    pub fn sinusoid(amplitude: f64, omega: f64) -> Self {
        InputSignal::Sinusoid {
            amplitude,
            omega,
            phase: 0.0,
        }
    }

    /// `amplitude · cos(omega t)`
    pub fn cosine(amplitude: f64, omega: f64) -> Self {
        InputSignal::Sinusoid {
            amplitude,
            omega,
            phase: PI / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputSignal::Zero { dim } if *dim == 0 => {
                Err(Error::Parameter("input dimension must be positive".into()))
            }
            InputSignal::ExpDecay { amplitude, rate }
                if !amplitude.is_finite() || !rate.is_finite() =>
            {
                Err(Error::Parameter(
                    "exp_decay parameters must be finite".into(),
                ))
            }
            InputSignal::Sinusoid {
                amplitude,
                omega,
                phase,
            } if !amplitude.is_finite() || !omega.is_finite() || !phase.is_finite() => Err(
                Error::Parameter("sinusoid parameters must be finite".into()),
            ),
            InputSignal::PiecewiseConstant {
                breakpoints,
                levels,
            } => {
                if levels.len() != breakpoints.len() + 1 {
                    return Err(Error::Parameter(
                        "piecewise_constant needs exactly one more level than breakpoints".into(),
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Parameter(
                        "breakpoints must be strictly increasing".into(),
                    ));
                }
                let m = levels[0].len();
                if m == 0 || levels.iter().any(|l| l.len() != m) {
                    return Err(Error::Parameter(
                        "levels must share a positive dimension".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InputSignal::Zero { dim } => *dim,
            InputSignal::PiecewiseConstant { levels, .. } => levels.first().map_or(1, Vec::len),
            _ => 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            InputSignal::Zero { .. } => true,
            InputSignal::ExpDecay { amplitude, .. } | InputSignal::Sinusoid { amplitude, .. } => {
                *amplitude == 0.0
            }
            InputSignal::PiecewiseConstant { levels, .. } => {
                levels.iter().flatten().all(|v| *v == 0.0)
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        match self {
            InputSignal::Zero { dim } => vec![0.0; *dim],
            InputSignal::ExpDecay { amplitude, rate } => vec![amplitude * (-rate * t).exp()],
            InputSignal::Sinusoid {
                amplitude,
                omega,
                phase,
            } => vec![amplitude * (omega * t + phase).sin()],
            InputSignal::PiecewiseConstant {
                breakpoints,
                levels,
            } => levels[breakpoints.partition_point(|&b| b <= t)].clone(),
        }
    }

    /// `w(t⁻)`, computed from the signal definition.
    pub fn left_limit(&self, t: f64) -> Vec<f64> {
        match self {
            InputSignal::PiecewiseConstant {
                breakpoints,
                levels,
            } => levels[breakpoints.partition_point(|&b| b < t)].clone(),
            _ => self.eval(t),
        }
    }

    pub fn norm_at(&self, t: f64) -> f64 {
        norm(&self.eval(t))
    }

    /// `sup_{s ∈ [lo, hi]} ‖w(s)‖`.
    pub fn sup_norm(&self, lo: f64, hi: f64) -> f64 {
        self.sup_norm_impl(lo, hi, false)
    }

    /// `sup` over `[lo, hi)` together with `‖w(hi⁻)‖`.
    pub fn sup_norm_left(&self, lo: f64, hi: f64) -> f64 {
        self.sup_norm_impl(lo, hi, true)
    }

    fn sup_norm_impl(&self, lo: f64, hi: f64, left_at_hi: bool) -> f64 {
        if hi < lo {
            return 0.0;
        }
        match self {
            InputSignal::Zero { .. } => 0.0,
            InputSignal::ExpDecay { .. } => self.norm_at(lo).max(self.norm_at(hi)),
            InputSignal::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                let ends = self.norm_at(lo).max(self.norm_at(hi));
                if *omega == 0.0 {
                    return ends;
                }
                // |sin| peaks where omega t + phase = π/2 + kπ
                let (w, p) = if *omega > 0.0 {
                    (*omega, *phase)
                } else {
                    (-omega, -phase)
                };
                let k = ((w * lo + p - PI / 2.0) / PI).ceil();
                let t_peak = (PI / 2.0 + k * PI - p) / w;
                if t_peak <= hi {
                    amplitude.abs()
                } else {
                    ends
                }
            }
            InputSignal::PiecewiseConstant {
                breakpoints,
                levels,
            } => {
                let first = breakpoints.partition_point(|&b| b <= lo);
                let last = if left_at_hi {
                    breakpoints.partition_point(|&b| b < hi)
                } else {
                    breakpoints.partition_point(|&b| b <= hi)
                };
                levels[first..=last.max(first)]
                    .iter()
                    .map(|l| norm(l))
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Impulse sequence classes ℓ_inf(δ), ℓ_sup(δ) and ℓ_all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellClass {
    /// Every gap between consecutive impulses is at least δ.
    InfDwell(f64),
    /// Every gap, including the first one from `t0`, is at most δ.
    SupDwell(f64),
    All,
}

impl fmt::Display for DwellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DwellClass::InfDwell(d) => write!(f, "inf_dwell({d})"),
            DwellClass::SupDwell(d) => write!(f, "sup_dwell({d})"),
            DwellClass::All => write!(f, "all"),
        }
    }
}

/// Result of checking a schedule against its declared class.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleReport {
    Ok,
    /// `index` is the 1-based `k` of the impulse `t_k` closing the bad gap.
    Violation {
        index: usize,
        gap: f64,
    },
}

impl ScheduleReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ScheduleReport::Ok)
    }
}

/// Relative slack for gap comparisons; periodic times built as `t0 + k δ`
/// have gaps a few ulps away from δ.
const GAP_RTOL: f64 = 1e-9;

/// Finite, strictly increasing impulse times with a declared class.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSchedule {
    times: Vec<f64>,
    class: DwellClass,
}

impl ImpulseSchedule {
    pub fn new(times: Vec<f64>, class: DwellClass) -> Self {
        Self { times, class }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), DwellClass::All)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn class(&self) -> DwellClass {
        self.class
    }

    pub fn with_class(mut self, class: DwellClass) -> Self {
        self.class = class;
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Check monotonicity (structural) and the declared class constraints.
    pub fn validate(&self, t0: f64) -> Result<ScheduleReport> {
        if let Some(i) = self.times.iter().position(|t| !t.is_finite()) {
            return Err(Error::Structural(format!(
                "impulse time {} is not finite",
                i + 1
            )));
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Structural(format!(
                "impulse times not strictly increasing at index {}",
                i + 2
            )));
        }
        let gaps = self
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| (i + 1, t - if i == 0 { t0 } else { self.times[i - 1] }));
        let report = match self.class {
            DwellClass::All => None,
            DwellClass::InfDwell(delta) => gaps
                .skip(1)
                .find(|&(_, gap)| gap < delta * (1.0 - GAP_RTOL)),
            DwellClass::SupDwell(delta) => gaps
                .into_iter()
                .find(|&(_, gap)| gap > delta * (1.0 + GAP_RTOL)),
        };
        Ok(match report {
            None => ScheduleReport::Ok,
            Some((index, gap)) => ScheduleReport::Violation { index, gap },
        })
    }

    /// `t0 + k δ`, `k = 1..=count`, declared ℓ_inf(δ) (it also lies in ℓ_sup(δ)).
    pub fn periodic(t0: f64, delta: f64, count: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Parameter(format!(
                "period must be positive, got {delta}"
            )));
        }
        let times = (1..=count).map(|k| t0 + k as f64 * delta).collect();
        Ok(Self::new(times, DwellClass::InfDwell(delta)))
    }

    /// Periodic impulses covering `(t0, t_end]`.
    pub fn periodic_until(t0: f64, delta: f64, t_end: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Parameter(format!(
                "period must be positive, got {delta}"
            )));
        }
        let count = ((t_end - t0) / delta * (1.0 + GAP_RTOL)).floor().max(0.0) as usize;
        Self::periodic(t0, delta, count)
    }

    /// Gaps drawn uniformly from `[delta_min, delta_max]`.
    ///
    /// The generator is SplitMix64 with the seed as its initial state
    /// (increment `0x9e3779b97f4a7c15`, mixing multipliers
    /// `0xbf58476d1ce4e5b9` and `0x94d049bb133111eb`, shifts 30/27/31); each
    /// draw maps a 64-bit output `z` to `u = (z >> 11) · 2⁻⁵³` and the gap to
    /// `delta_min + u (delta_max - delta_min)`. Declared ℓ_sup(delta_max).
    pub fn random_dwell(
        t0: f64,
        delta_min: f64,
        delta_max: f64,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(delta_min > 0.0) || !delta_min.is_finite() {
            return Err(Error::Parameter(format!(
                "delta_min must be positive, got {delta_min}"
            )));
        }
        if !(delta_max >= delta_min) || !delta_max.is_finite() {
            return Err(Error::Parameter(format!(
                "delta_max must be finite and >= delta_min, got [{delta_min}, {delta_max}]"
            )));
        }
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut t = t0;
        let times = (0..count)
            .map(|_| {
                let u: f64 = rng.gen();
                t += delta_min + u * (delta_max - delta_min);
                t
            })
            .collect();
        Ok(Self::new(times, DwellClass::SupDwell(delta_max)))
    }

    /// Random gaps continued until `t_end` is covered.
    pub fn random_dwell_until(
        t0: f64,
        delta_min: f64,
        delta_max: f64,
        t_end: f64,
        seed: u64,
    ) -> Result<Self> {
        let count = ((t_end - t0) / delta_min).ceil().max(0.0) as usize + 1;
        Ok(Self::random_dwell(t0, delta_min, delta_max, count, seed)?.truncate(t_end))
    }

    /// Keep only times `<= t_end`.
    pub fn truncate(mut self, t_end: f64) -> Self {
        let keep = self
            .times
            .partition_point(|&t| t <= t_end + snap_eps(t_end));
        self.times.truncate(keep);
        self
    }

    /// Times in `(lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.times
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t > lo + snap_eps(lo) && t <= hi + snap_eps(hi))
            .map(|(i, &t)| (i + 1, t))
    }

    /// Largest number of impulses inside any window `(t_k - d, t_k)`.
    pub fn max_impulses_in_window(&self, d: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .map(|(k, &tk)| {
                self.times[..k]
                    .iter()
                    .filter(|&&tj| tj > tk - d + snap_eps(tk))
                    .count()
            })
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn example_schedule_is_inf_dwell() {
        let s = ImpulseSchedule::new(vec![2.1, 4.2, 6.3], DwellClass::InfDwell(2.06));
        assert_eq!(s.validate(0.0).unwrap(), ScheduleReport::Ok);
    }

    #[test]
    fn short_gap_reported_with_index() {
        let s = ImpulseSchedule::new(vec![1.0, 1.5], DwellClass::InfDwell(2.0));
        assert_eq!(
            s.validate(0.0).unwrap(),
            ScheduleReport::Violation { index: 2, gap: 0.5 }
        );
    }

    #[test]
    fn empty_schedule_is_ok() {
        assert!(ImpulseSchedule::empty().validate(0.0).unwrap().is_ok());
    }

    #[test]
    fn non_monotone_is_structural() {
        let s = ImpulseSchedule::new(vec![1.0, 1.0], DwellClass::All);
        assert!(matches!(s.validate(0.0), Err(Error::Structural(_))));
    }

    #[test]
    fn sup_dwell_checks_first_gap() {
        let s = ImpulseSchedule::new(vec![2.0, 2.5], DwellClass::SupDwell(1.0));
        assert_eq!(
            s.validate(0.0).unwrap(),
            ScheduleReport::Violation { index: 1, gap: 2.0 }
        );
    }

    #[test]
    fn periodic_examples() {
        let s = ImpulseSchedule::periodic(0.0, 0.01, 3).unwrap();
        assert_eq!(s.len(), 3);
        for (got, want) in s.times().iter().zip([0.01, 0.02, 0.03]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert!(ImpulseSchedule::periodic(0.0, 0.3, 0).unwrap().is_empty());
        assert_eq!(
            ImpulseSchedule::periodic(5.0, 2.0, 2).unwrap().times(),
            &[7.0, 9.0]
        );
        assert!(matches!(
            ImpulseSchedule::periodic(0.0, 0.0, 2),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            ImpulseSchedule::periodic(0.0, -1.0, 2),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn periodic_until_covers_horizon() {
        let s = ImpulseSchedule::periodic_until(0.0, 0.01, 5.0).unwrap();
        assert_eq!(s.len(), 500);
        let s = ImpulseSchedule::periodic_until(0.0, 2.1, 50.0).unwrap();
        assert_eq!(s.len(), 23);
    }

    #[test]
    fn random_dwell_degenerate_interval_is_periodic() {
        let s = ImpulseSchedule::random_dwell(0.0, 1.0, 1.0, 5, 42).unwrap();
        assert_eq!(s.times(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn random_dwell_is_deterministic() {
        let a = ImpulseSchedule::random_dwell(0.0, 0.5, 1.5, 20, 7).unwrap();
        let b = ImpulseSchedule::random_dwell(0.0, 0.5, 1.5, 20, 7).unwrap();
        let c = ImpulseSchedule::random_dwell(0.0, 0.5, 1.5, 20, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(matches!(
            ImpulseSchedule::random_dwell(0.0, 0.0, 1.0, 3, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn random_dwell_first_draw_pinned() {
        // SplitMix64(seed = 0) first output is 0xe220a8397b1dcdaf.
        let u = (0xe220a8397b1dcdaf_u64 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let s = ImpulseSchedule::random_dwell(0.0, 1.0, 2.0, 1, 0).unwrap();
        assert_eq!(s.times()[0], 1.0 + u);
    }

    #[test]
    fn impulses_in_window() {
        let s = ImpulseSchedule::periodic(0.0, 0.01, 10).unwrap();
        assert_eq!(s.max_impulses_in_window(0.01), 0);
        assert_eq!(s.max_impulses_in_window(0.025), 2);
    }

    #[test]
    fn input_left_limits() {
        let w = InputSignal::PiecewiseConstant {
            breakpoints: vec![1.0, 2.0],
            levels: vec![vec![0.0], vec![3.0], vec![-1.0]],
        };
        w.validate().unwrap();
        assert_eq!(w.eval(1.0), vec![3.0]);
        assert_eq!(w.left_limit(1.0), vec![0.0]);
        assert_eq!(w.left_limit(1.5), vec![3.0]);
        assert_eq!(w.sup_norm(0.0, 1.5), 3.0);
        assert_eq!(w.sup_norm_left(0.0, 1.0), 0.0);
        let e = InputSignal::exp_decay(5.0, 1.0);
        assert_eq!(e.left_limit(0.7), e.eval(0.7));
    }

    #[test]
    fn sinusoid_sup() {
        let w = InputSignal::sinusoid(2.0, 14.0 * PI);
        assert_eq!(w.sup_norm(0.0, 0.1), 2.0);
        // before the first peak at t = 1/28
        assert_abs_diff_eq!(
            w.sup_norm(0.0, 0.01),
            (0.14 * PI).sin() * 2.0,
            epsilon = 1e-14
        );
        let c = InputSignal::cosine(1.0, 16.0 * PI);
        assert_abs_diff_eq!(c.eval(0.0)[0], 1.0, epsilon = 1e-15);
        assert_eq!(c.sup_norm(0.0, 0.0), c.norm_at(0.0));
    }

    #[test]
    fn input_json_shape() {
        let w: InputSignal =
            serde_json::from_str(r#"{"kind":"exp_decay","params":{"amplitude":5.0,"rate":1.0}}"#)
                .unwrap();
        assert_eq!(w, InputSignal::exp_decay(5.0, 1.0));
        let z: InputSignal = serde_json::from_str(r#"{"kind":"zero","params":{}}"#).unwrap();
        assert_eq!(z, InputSignal::zero(1));
        let back = serde_json::to_string(&InputSignal::sinusoid(2.0, 1.0)).unwrap();
        assert_eq!(
            serde_json::from_str::<InputSignal>(&back).unwrap(),
            InputSignal::sinusoid(2.0, 1.0)
        );
    }

    #[test]
    fn view_guards_lookback() {
        let h = History::constant(0.0, 1.0, vec![1.0]).unwrap();
        let v = StateView::at_time(&h, 0.0, 0.5);
        assert!(v.at(-0.5).is_ok());
        assert!(matches!(v.at(-0.6), Err(Error::DelayBound { .. })));
        assert!(matches!(v.at(0.1), Err(Error::Contract(_))));
        assert!(matches!(v.integral(0.75), Err(Error::DelayBound { .. })));
    }

    #[test]
    fn stage_view_rejects_lookup_inside_step() {
        let h = History::constant(0.0, 1.0, vec![1.0]).unwrap();
        let cur = [2.0];
        let v = StateView::stage(&h, 0.1, 1.0, &cur);
        assert_eq!(v.current().unwrap(), vec![2.0]);
        assert!(v.at(-0.1).is_ok());
        assert!(matches!(v.at(-0.05), Err(Error::Contract(_))));
        // trapezoid tail over (0, 0.1]
        assert_abs_diff_eq!(
            v.integral(1.0).unwrap()[0],
            0.9 + 0.1 * 1.5,
            epsilon = 1e-14
        );
    }

    proptest! {
        #[test]
        fn periodic_validates_in_both_classes(t0 in -10.0f64..10.0, delta in 1e-3f64..5.0, count in 0usize..200) {
            let s = ImpulseSchedule::periodic(t0, delta, count).unwrap();
            prop_assert!(s.validate(t0).unwrap().is_ok());
            prop_assert!(s.clone().with_class(DwellClass::SupDwell(delta)).validate(t0).unwrap().is_ok());
        }

        #[test]
        fn random_dwell_validates(dmin in 1e-3f64..1.0, spread in 0.0f64..2.0, count in 0usize..100, seed in any::<u64>()) {
            let dmax = dmin * (1.0 + spread);
            let s = ImpulseSchedule::random_dwell(0.0, dmin, dmax, count, seed).unwrap();
            prop_assert!(s.validate(0.0).unwrap().is_ok());
            prop_assert!(s.clone().with_class(DwellClass::InfDwell(dmin)).validate(0.0).unwrap().is_ok());
        }

        #[test]
        fn continuous_inputs_have_trivial_left_limits(t in 0.0f64..20.0) {
            for w in [InputSignal::exp_decay(5.0, 1.0), InputSignal::sinusoid(2.0, 14.0 * PI)] {
                prop_assert_eq!(w.left_limit(t), w.eval(t));
            }
        }
    }
}
