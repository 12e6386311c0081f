//! JSON run configuration. Unknown keys are rejected at every level.

use std::ops::Range;
use std::path::{Path, PathBuf};

use impulsive_iss::scenarios::{
    example1_scenario, example2_scenario, Example1Params, Example2Params,
};
use impulsive_iss::{
    DwellClass, Error, History, ImpulseSchedule, ImpulsiveSystem, InputSignal, LyapunovPair,
    Matrix, Result, TheoremMode,
};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    /// Constant initial function overriding the scenario default.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub input: Option<InputSignal>,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub integration: Option<Integration>,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub certificate: Option<CertificateConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Example1 {
        #[serde(default)]
        params: Example1Params,
    },
    Example2 {
        #[serde(default)]
        params: Example2Params,
    },
    Linear {
        params: LinearSpec,
    },
}

/// `ẋ = Ax + A_τ x(t-τ) + Bw`, `Δx = Jx(t⁻) + J_d x(t-d) + Dw(t⁻)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub a: Matrix,
    #[serde(default)]
    pub a_delay: Option<Matrix>,
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub b: Option<Matrix>,
    #[serde(default)]
    pub jump: Option<Matrix>,
    #[serde(default)]
    pub jump_delayed: Option<Matrix>,
    #[serde(default)]
    pub jump_delay: f64,
    #[serde(default)]
    pub d: Option<Matrix>,
    /// Initial state, held constant over the delay window.
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Periodic {
        delta: f64,
    },
    RandomDwell {
        delta_min: f64,
        delta_max: f64,
    },
    Times {
        times: Vec<f64>,
        #[serde(default)]
        class: Option<DwellClass>,
    },
    None,
}

impl ScheduleSpec {
    pub fn build(&self, t0: f64, t_end: f64, seed: u64) -> Result<ImpulseSchedule> {
        match self {
            ScheduleSpec::Periodic { delta } => ImpulseSchedule::periodic_until(t0, *delta, t_end),
            ScheduleSpec::RandomDwell {
                delta_min,
                delta_max,
            } => ImpulseSchedule::random_dwell_until(t0, *delta_min, *delta_max, t_end, seed),
            ScheduleSpec::Times { times, class } => Ok(ImpulseSchedule::new(
                times.clone(),
                class.unwrap_or(DwellClass::All),
            )),
            ScheduleSpec::None => Ok(ImpulseSchedule::empty()),
        }
    }

    /// Spacing that characterises the schedule, if any.
    pub fn delta(&self) -> Option<f64> {
        match self {
            ScheduleSpec::Periodic { delta } => Some(*delta),
            ScheduleSpec::RandomDwell { delta_max, .. } => Some(*delta_max),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integration {
    pub step: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default)]
    pub class: Option<DwellClass>,
    #[serde(default)]
    pub inputs: Option<Vec<InputSignal>>,
    #[serde(default = "default_scales")]
    pub history_scales: Vec<f64>,
}

fn default_scales() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    pub theorem: u8,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub rho1: f64,
    #[serde(default)]
    pub rho2: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub delta: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn scenario(&self) -> Result<&ScenarioSpec> {
        self.scenario
            .as_ref()
            .ok_or_else(|| Error::Config("config has no scenario".into()))
    }

    pub fn integration(&self) -> Result<Integration> {
        let i = self
            .integration
            .ok_or_else(|| Error::Config("config has no integration section".into()))?;
        if !(i.step > 0.0) || !i.step.is_finite() {
            return Err(Error::Config(format!(
                "step must be positive, got {}",
                i.step
            )));
        }
        if !(i.t_end > 0.0) || !i.t_end.is_finite() {
            return Err(Error::Config(format!(
                "t_end must be positive, got {}",
                i.t_end
            )));
        }
        Ok(i)
    }

    pub fn schedule(&self) -> &ScheduleSpec {
        self.schedule.as_ref().unwrap_or(&ScheduleSpec::None)
    }

    pub fn input(&self, dim: usize) -> Result<InputSignal> {
        let w = self.input.clone().unwrap_or(InputSignal::zero(dim));
        w.validate()?;
        if w.dim() != dim {
            return Err(Error::Config(format!(
                "input has dimension {} but the system expects {dim}",
                w.dim()
            )));
        }
        Ok(w)
    }

    pub fn build(&self) -> Result<Built> {
        let mut built = self.scenario()?.build(self.schedule().delta())?;
        if let Some(x) = &self.initial {
            if x.len() != built.system.dim() {
                return Err(Error::Config(format!(
                    "initial has {} components, system has {}",
                    x.len(),
                    built.system.dim()
                )));
            }
            built.phi = History::constant(0.0, built.system.delay_bound(), x.clone())?;
        }
        Ok(built)
    }
}

/// System, initial function and (for built-in scenarios) Lyapunov pair.
pub struct Built {
    pub system: ImpulsiveSystem,
    pub phi: History,
    pub projection: Range<usize>,
    pub pair: Option<LyapunovPair>,
    pub mode: Option<TheoremMode>,
}

impl ScenarioSpec {
    pub fn build(&self, delta: Option<f64>) -> Result<Built> {
        match self {
            ScenarioSpec::Example1 { params } => {
                let sc = example1_scenario(params)?;
                Ok(Built {
                    system: sc.system,
                    phi: sc.phi,
                    projection: sc.projection,
                    pair: Some(sc.pair),
                    mode: Some(sc.nominal.mode),
                })
            }
            ScenarioSpec::Example2 { params } => {
                let sc = example2_scenario(params, delta.unwrap_or(0.01))?;
                Ok(Built {
                    system: sc.system,
                    phi: sc.phi,
                    projection: sc.projection,
                    pair: Some(sc.pair),
                    mode: Some(sc.nominal.mode),
                })
            }
            ScenarioSpec::Linear { params } => params.build(),
        }
    }
}

fn check_shape(name: &str, m: &Matrix, rows: usize, cols: Option<usize>) -> Result<()> {
    if m.rows() != rows || cols.is_some_and(|c| m.cols() != c) {
        return Err(Error::Config(format!(
            "{name} is {}x{}, expected {rows} rows",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

impl LinearSpec {
    fn build(&self) -> Result<Built> {
        let n = self.a.rows();
        check_shape("a", &self.a, n, Some(n))?;
        if self.x0.len() != n {
            return Err(Error::Config(format!(
                "x0 has {} components, a is {n}x{n}",
                self.x0.len()
            )));
        }
        for (name, m) in [
            ("a_delay", &self.a_delay),
            ("jump", &self.jump),
            ("jump_delayed", &self.jump_delayed),
        ] {
            if let Some(m) = m {
                check_shape(name, m, n, Some(n))?;
            }
        }
        let m = self.b.as_ref().or(self.d.as_ref()).map_or(1, Matrix::cols);
        for (name, g) in [("b", &self.b), ("d", &self.d)] {
            if let Some(g) = g {
                check_shape(name, g, n, Some(m))?;
            }
        }
        if self.delay < 0.0 || self.jump_delay < 0.0 {
            return Err(Error::Config("delays must be nonnegative".into()));
        }
        let r = self.delay.max(self.jump_delay);
        let (a, ad, b, tau) = (
            self.a.clone(),
            self.a_delay.clone(),
            self.b.clone(),
            self.delay,
        );
        let (j, jd, d, dj) = (
            self.jump.clone(),
            self.jump_delayed.clone(),
            self.d.clone(),
            self.jump_delay,
        );
        let mut delays = Vec::new();
        if self.a_delay.is_some() && tau > 0.0 {
            delays.push(tau);
        }
        if self.jump_delayed.is_some() && dj > 0.0 {
            delays.push(dj);
        }
        let system = ImpulsiveSystem::new(
            n,
            m,
            r,
            move |_, v, w| {
                let mut out = a.mul_vec(&v.current()?);
                if let Some(ad) = &ad {
                    ad.mul_vec_acc(&v.at(-tau)?, &mut out);
                }
                if let Some(b) = &b {
                    b.mul_vec_acc(w, &mut out);
                }
                Ok(out)
            },
            move |_, _, v, w| {
                let mut out = vec![0.0; n];
                if let Some(j) = &j {
                    j.mul_vec_acc(&v.current()?, &mut out);
                }
                if let Some(jd) = &jd {
                    jd.mul_vec_acc(&v.at(-dj)?, &mut out);
                }
                if let Some(d) = &d {
                    d.mul_vec_acc(w, &mut out);
                }
                Ok(out)
            },
        )?
        .with_name("linear")
        .with_discrete_delays(delays);
        Ok(Built {
            system,
            phi: History::constant(0.0, r, self.x0.clone())?,
            projection: 0..n,
            pair: None,
            mode: None,
        })
    }
}
