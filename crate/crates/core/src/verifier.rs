//! Empirical ISS checks: ensembles of runs, an exponential envelope
//! `β(s, t) = M·s·e^{-λt}` with input gain `γ(s) = c·s^q`, and a fitter that
//! produces such a witness from data.

use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::history::History;
use crate::integrator::{simulate, Trajectory};
use crate::linalg::norm;
use crate::model::{DwellClass, ImpulseSchedule, ImpulsiveSystem, InputSignal};

/// Samples below this fraction of `‖φ‖_r` are treated as numerical floor
/// when regressing the decay rate.
const DECAY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeSpec {
    #[serde(rename = "M")]
    pub m: f64,
    pub lambda: f64,
    pub c: f64,
    pub q: f64,
}

impl EnvelopeSpec {
    pub fn new(m: f64, lambda: f64, c: f64, q: f64) -> Result<Self> {
        let env = Self { m, lambda, c, q };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.m, self.lambda, self.c, self.q]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.m < 1.0 || !(self.lambda > 0.0) || self.c < 0.0 || !(self.q > 0.0) {
            return Err(Error::Parameter(format!(
                "envelope needs finite M >= 1, lambda > 0, c >= 0, q > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn beta(&self, s: f64, elapsed: f64) -> f64 {
        self.m * s * (-self.lambda * elapsed).exp()
    }

    pub fn gamma(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            self.c * s.powf(self.q)
        }
    }

    pub fn bound(&self, phi_norm: f64, elapsed: f64, w_sup: f64) -> f64 {
        self.beta(phi_norm, elapsed) + self.gamma(w_sup)
    }
}

/// Absolute plus relative slack of the pointwise envelope check.
pub fn envelope_tolerance(bound: f64) -> f64 {
    1e-9 + 1e-6 * bound
}

/// Norm profile of one run: `(t, ‖x(t)‖)` on the step grid (with pre-jump
/// samples) and the running input sup `sup_{[t0, t]} ‖w‖` at each sample.
#[derive(Debug, Clone, Serialize)]
pub struct RunProfile {
    pub label: String,
    pub t0: f64,
    pub phi_norm: f64,
    pub zero_input: bool,
    pub samples: Vec<(f64, f64)>,
    pub w_sup: Vec<f64>,
}

impl RunProfile {
    /// `range` selects the state components the ISS estimate is about;
    /// `phi_norm` is `‖φ‖_r` over the same components.
    pub fn from_trajectory(
        label: impl Into<String>,
        traj: &Trajectory,
        range: Range<usize>,
        phi_norm: f64,
    ) -> Self {
        let samples = traj.norm_samples(range);
        let w = &traj.input;
        let mut w_sup = Vec::with_capacity(samples.len());
        let mut prev = traj.t0;
        let mut running = w.norm_at(traj.t0);
        for &(t, _) in &samples {
            if t > prev {
                running = running.max(w.sup_norm(prev, t));
                prev = t;
            }
            w_sup.push(running);
        }
        Self {
            label: label.into(),
            t0: traj.t0,
            phi_norm,
            zero_input: w.is_zero(),
            samples,
            w_sup,
        }
    }

    pub fn initial_norm(&self) -> f64 {
        self.phi_norm
    }

    pub fn final_norm(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.1)
    }

    pub fn span(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0 - self.t0)
    }
}

/// `‖φ‖_r` restricted to the components in `range`.
pub fn history_norm(phi: &History, range: Range<usize>) -> Result<f64> {
    let mut sup = 0.0_f64;
    phi.for_each_window_sample(phi.start(), phi.now(), false, |_, x| {
        sup = sup.max(norm(&x[range.clone()]))
    })?;
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub label: String,
    /// Largest `‖x(t)‖ - bound(t)`; negative when the envelope holds with room.
    pub max_excess: f64,
    /// Largest `(‖x(t)‖ - bound(t)) / bound(t)`.
    pub max_relative_violation: f64,
    pub time_of_max: f64,
    pub violations: usize,
    pub passed: bool,
}

pub fn check_envelope(run: &RunProfile, env: &EnvelopeSpec) -> EnvelopeReport {
    let mut rep = EnvelopeReport {
        label: run.label.clone(),
        max_excess: f64::NEG_INFINITY,
        max_relative_violation: f64::NEG_INFINITY,
        time_of_max: run.t0,
        violations: 0,
        passed: true,
    };
    for (&(t, n), &w) in run.samples.iter().zip(&run.w_sup) {
        let bound = env.bound(run.phi_norm, t - run.t0, w);
        let excess = n - bound;
        if excess > rep.max_excess {
            rep.max_excess = excess;
            rep.time_of_max = t;
        }
        let rel = if bound > 0.0 { excess / bound } else { excess };
        rep.max_relative_violation = rep.max_relative_violation.max(rel);
        if excess > envelope_tolerance(bound) {
            rep.violations += 1;
        }
    }
    rep.passed = rep.violations == 0;
    rep
}

fn regression_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Running maxima taken from the end: the smallest non-increasing curve
/// above the samples.
fn peak_envelope(samples: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = samples.to_vec();
    let mut peak = 0.0_f64;
    for s in out.iter_mut().rev() {
        peak = peak.max(s.1);
        s.1 = peak;
    }
    out
}

fn decay_rate(run: &RunProfile) -> Result<f64> {
    let (init, fin) = (run.initial_norm(), run.final_norm());
    if fin >= init {
        return Err(Error::NoWitness(format!(
            "zero-input run '{}' does not decay: final norm {fin:e} >= initial {init:e}",
            run.label
        )));
    }
    let floor = DECAY_FLOOR * init;
    let pts: Vec<(f64, f64)> = peak_envelope(&run.samples)
        .into_iter()
        .filter(|p| p.1 > floor)
        .map(|(t, p)| (t - run.t0, (p / init).ln()))
        .collect();
    let rate = regression_slope(&pts).map(|s| -s).unwrap_or(0.0);
    if rate > 0.0 && rate.is_finite() {
        return Ok(rate);
    }
    let span = run.span();
    let fallback = if fin > 0.0 {
        (init / fin).ln() / span
    } else {
        1.0 / span
    };
    if fallback > 0.0 && fallback.is_finite() {
        Ok(fallback)
    } else {
        Err(Error::NoWitness(format!(
            "no decay rate for run '{}'",
            run.label
        )))
    }
}

/// Fit `M`, `λ` on zero-input runs and `c`, `q` on driven runs. The result
/// passes [`check_envelope`] on every run it was fitted to.
pub fn fit_envelope(runs: &[RunProfile]) -> Result<EnvelopeSpec> {
    if runs.is_empty() {
        return Err(Error::NoWitness("empty ensemble".into()));
    }
    let free: Vec<&RunProfile> = runs
        .iter()
        .filter(|r| r.zero_input && r.phi_norm > 0.0)
        .collect();
    for r in runs.iter().filter(|r| r.zero_input && r.phi_norm == 0.0) {
        if r.samples.iter().any(|s| s.1 > 0.0) {
            return Err(Error::NoWitness(format!(
                "run '{}' leaves a zero initial function without input",
                r.label
            )));
        }
    }
    let lambda = if free.is_empty() {
        let span = runs.iter().map(RunProfile::span).fold(0.0, f64::max);
        log::warn!("no zero-input runs; decay rate defaults to 1/span");
        1.0 / span.max(1e-300)
    } else {
        free.iter()
            .map(|r| decay_rate(r))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    };

    let ratio = |r: &RunProfile, t: f64, n: f64| n / (r.phi_norm * (-lambda * (t - r.t0)).exp());
    let mut m = 1.0_f64;
    for r in &free {
        for &(t, n) in &r.samples {
            m = m.max(ratio(r, t, n));
        }
    }
    // Before the input acts, only β can cover the state.
    for r in runs.iter().filter(|r| !r.zero_input) {
        for (&(t, n), &w) in r.samples.iter().zip(&r.w_sup) {
            if w == 0.0 && n > 0.0 {
                if r.phi_norm == 0.0 {
                    return Err(Error::NoWitness(format!(
                        "run '{}' moves before its input does",
                        r.label
                    )));
                }
                m = m.max(ratio(r, t, n));
            }
        }
    }

    let driven: Vec<&RunProfile> = runs.iter().filter(|r| !r.zero_input).collect();
    let ultimate: Vec<(f64, f64)> = driven
        .iter()
        .filter_map(|r| {
            let from = r.t0 + 0.8 * r.span();
            let u = r
                .samples
                .iter()
                .filter(|s| s.0 >= from)
                .map(|s| s.1)
                .fold(0.0, f64::max);
            let w = *r.w_sup.last()?;
            (u > 0.0 && w > 0.0).then(|| (w.ln(), u.ln()))
        })
        .collect();
    let q = regression_slope(&ultimate).map_or(1.0, |s| s.clamp(0.25, 4.0));

    let mut c = 0.0_f64;
    for r in &driven {
        for (&(t, n), &w) in r.samples.iter().zip(&r.w_sup) {
            if w > 0.0 {
                let excess = n - m * r.phi_norm * (-lambda * (t - r.t0)).exp();
                if excess > 0.0 {
                    c = c.max(excess / w.powf(q));
                }
            }
        }
    }
    EnvelopeSpec::new(m, lambda, c, q).map_err(|e| Error::NoWitness(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// `‖x(t_end)‖ / ‖φ‖_r` per run.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

pub fn zero_input_convergence(runs: &[RunProfile]) -> ConvergenceReport {
    let ratios: Vec<f64> = runs
        .iter()
        .map(|r| match (r.final_norm(), r.phi_norm) {
            (f, p) if p > 0.0 => f / p,
            (f, _) if f == 0.0 => 0.0,
            _ => f64::INFINITY,
        })
        .collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    ConvergenceReport { ratios, max_ratio }
}

#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub label: String,
    pub phi: History,
    pub input: InputSignal,
    pub schedule: ImpulseSchedule,
}

/// Runs sharing one system, horizon, step and schedule class.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub members: Vec<EnsembleMember>,
    pub t_end: f64,
    pub step: f64,
    pub projection: Range<usize>,
}

/// Recipe for [`EnsembleSpec::generate`].
#[derive(Debug, Clone)]
pub struct EnsembleDesign {
    /// Number of random schedules; every schedule is paired with every input.
    pub schedules: usize,
    pub class: DwellClass,
    /// Spacing used for `DwellClass::All`, which carries none.
    pub nominal_delta: f64,
    pub inputs: Vec<InputSignal>,
    /// Factors applied to the projected part of the initial function, cycled
    /// over schedules.
    pub history_scales: Vec<f64>,
    pub seed: u64,
    pub t_end: f64,
}

impl EnsembleSpec {
    /// Schedule `i` uses seed `seed + i`. Gaps are drawn in `[δ/2, δ]` for
    /// `sup_dwell(δ)` and in `[δ, 3δ/2]` for `inf_dwell(δ)`.
    pub fn generate(
        phi: &History,
        projection: Range<usize>,
        step: f64,
        design: &EnsembleDesign,
    ) -> Result<Self> {
        if design.schedules == 0 {
            return Err(Error::Config("ensemble size must be positive".into()));
        }
        if design.inputs.is_empty() {
            return Err(Error::Config("ensemble needs at least one input".into()));
        }
        let t0 = phi.now();
        let mut members = Vec::new();
        for i in 0..design.schedules {
            let seed = design.seed.wrapping_add(i as u64);
            let schedule = match design.class {
                DwellClass::SupDwell(d) => {
                    ImpulseSchedule::random_dwell_until(t0, 0.5 * d, d, design.t_end, seed)?
                }
                DwellClass::InfDwell(d) => {
                    ImpulseSchedule::random_dwell_until(t0, d, 1.5 * d, design.t_end, seed)?
                        .with_class(DwellClass::InfDwell(d))
                }
                DwellClass::All => {
                    let d = design.nominal_delta;
                    ImpulseSchedule::random_dwell_until(t0, 0.5 * d, 1.5 * d, design.t_end, seed)?
                        .with_class(DwellClass::All)
                }
            };
            let scale = if design.history_scales.is_empty() {
                1.0
            } else {
                design.history_scales[i % design.history_scales.len()]
            };
            let scaled = phi.scaled(projection.clone(), scale);
            for (j, w) in design.inputs.iter().enumerate() {
                members.push(EnsembleMember {
                    label: format!("schedule{i}-input{j}-scale{scale}"),
                    phi: scaled.clone(),
                    input: w.clone(),
                    schedule: schedule.clone(),
                });
            }
        }
        Ok(Self {
            members,
            t_end: design.t_end,
            step,
            projection,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Config("ensemble has no members".into()));
        }
        let class = self.members[0].schedule.class();
        if let Some(m) = self.members.iter().find(|m| m.schedule.class() != class) {
            return Err(Error::Config(format!(
                "member '{}' has class {} but the ensemble declares {class}",
                m.label,
                m.schedule.class()
            )));
        }
        Ok(())
    }
}

/// Simulate every member in parallel and collect norm profiles.
pub fn run_ensemble(sys: &ImpulsiveSystem, spec: &EnsembleSpec) -> Result<Vec<RunProfile>> {
    spec.validate()?;
    spec.members
        .par_iter()
        .map(|m| {
            let traj = simulate(sys, &m.phi, &m.input, &m.schedule, spec.t_end, spec.step)?;
            let phi_norm = history_norm(&m.phi, spec.projection.clone())?;
            Ok(RunProfile::from_trajectory(
                m.label.clone(),
                &traj,
                spec.projection.clone(),
                phi_norm,
            ))
        })
        .collect()
}
