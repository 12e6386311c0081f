//! Built-in systems: a scalar saturated delay system with distributed-delay
//! impulses, and delayed Chua drive/response synchronization under delayed
//! impulsive control.

use std::f64::consts::{E, PI};
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::certificates::{example2_derive, Example2Derivation, Example2Inputs};
use crate::error::{Error, Result};
use crate::history::History;
use crate::integrator::{simulate, Trajectory};
use crate::linalg::{norm, Matrix};
use crate::lyapunov::{gain, LyapunovPair, TheoremMode};
use crate::model::{ImpulseSchedule, ImpulsiveSystem, InputSignal, StateView};

/// `½(|x+1| - |x-1|)`, i.e. clamp to `[-1, 1]`.
pub fn sat(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub fn sat_vec(x: &[f64]) -> Vec<f64> {
    x.iter().copied().map(sat).collect()
}

/// Rate and jump constants attached to a built-in Lyapunov pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nominal {
    pub mu: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub kappa: Option<f64>,
    pub mode: TheoremMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1Params {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub eps: f64,
}

impl Default for Example1Params {
    fn default() -> Self {
        Self {
            a: 0.2,
            b: 0.1,
            tau: 1.0,
            eps: 5.0,
        }
    }
}

impl Example1Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Parameter(format!("tau = {} must be > 0", self.tau)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Parameter(format!("eps = {} must be > 0", self.eps)));
        }
        if !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::Parameter("a and b must be finite".into()));
        }
        Ok(())
    }

    /// `min{2 - (ε+2)|a| - 2|b|, ε/((ε+1)τ)}`, with the first term expanded as
    /// `2 - 2|b| - ε|a| - 2|a|`.
    pub fn mu(&self) -> f64 {
        let (a, b) = (self.a.abs(), self.b.abs());
        let flow = 2.0 - 2.0 * b - self.eps * a - 2.0 * a;
        flow.min(self.eps / ((self.eps + 1.0) * self.tau))
    }

    pub fn nominal(&self) -> Nominal {
        Nominal {
            mu: self.mu(),
            rho1: 2.0 * E,
            rho2: 3.0 * self.tau / 16.0,
            kappa: None,
            mode: TheoremMode::Stable,
        }
    }
}

/// `ẋ = -sat(x) + a sat(x(t-τ)) + b sat(w)`,
/// `Δx = ¼ sat(∫_{t-τ}^t x) + ¼ sat(w(t⁻))`.
pub fn example1_system(p: &Example1Params) -> Result<ImpulsiveSystem> {
    p.validate()?;
    let Example1Params { a, b, tau, .. } = *p;
    let sys = ImpulsiveSystem::new(
        1,
        1,
        tau,
        move |_, v, w| {
            let x = v.current()?[0];
            let xd = v.at(-tau)?[0];
            Ok(vec![-sat(x) + a * sat(xd) + b * sat(w[0])])
        },
        move |_, _, v, w| {
            let i = v.integral(tau)?[0];
            Ok(vec![0.25 * sat(i) + 0.25 * sat(w[0])])
        },
    )?;
    Ok(sys.with_name("example1").with_discrete_delays(vec![tau]))
}

/// `x²` on `|x| ≤ 1`, `e^{2(|x|-1)}` beyond.
pub fn example1_v1(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        x * x
    } else {
        (2.0 * (x.abs() - 1.0)).exp()
    }
}

/// `V1` above, `V2 = |a| ∫_{-τ}^0 sat²(x(t+s)) (ε + 1 + εs/τ) ds`.
pub fn example1_lyapunov(p: &Example1Params) -> Result<LyapunovPair> {
    p.validate()?;
    let Example1Params { a, b, tau, eps } = *p;
    let pair = LyapunovPair::new(|_, x| example1_v1(x[0]), tau)
        .with_v2(move |_, v: &StateView<'_>| {
            let i = v.integral_of(tau, |s, x| sat(x[0]).powi(2) * (eps + 1.0 + eps * s / tau))?;
            Ok(a.abs() * i)
        })
        .with_gains(
            gain(move |s| 0.5 * b * b * s * s),
            gain(|s| 3.0 / 16.0 * s * s),
        )
        .with_bounds(
            gain(|s| (s * s).min((2.0 * (s - 1.0)).exp())),
            gain(|s| (s * s).max((2.0 * (s - 1.0)).exp())),
            None,
        );
    Ok(pair)
}

/// `w = 5e^{-t}` and `w = 2 sin(14πt)`.
pub fn example1_inputs() -> Vec<InputSignal> {
    vec![
        InputSignal::exp_decay(5.0, 1.0),
        InputSignal::sinusoid(2.0, 14.0 * PI),
    ]
}

/// Delayed nonlinearity `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Zero,
    /// `g(x) = sat(x_1) · column`.
    SatFirst {
        column: Vec<f64>,
    },
}

impl Nonlinearity {
    pub fn chua() -> Self {
        Nonlinearity::SatFirst {
            column: vec![27.0 / 7.0, 0.0, 0.0],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Nonlinearity::Zero => true,
            Nonlinearity::SatFirst { column } => column.iter().all(|c| *c == 0.0),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Nonlinearity::Zero => vec![0.0; x.len()],
            Nonlinearity::SatFirst { column } => {
                let s = sat(x[0]);
                column.iter().map(|c| c * s).collect()
            }
        }
    }

    /// Lipschitz constant `‖column‖` (sat is 1-Lipschitz).
    pub fn lipschitz(&self) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::SatFirst { column } => norm(column),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example2Params {
    pub a: Matrix,
    /// Input gain of the response flow (`n × m`).
    pub b: Matrix,
    /// Impulsive coupling gain.
    pub c: Matrix,
    /// Input gain of the impulses (`n × m`).
    pub d_gain: Matrix,
    pub g: Nonlinearity,
    pub lipschitz: f64,
    /// Flow delay.
    pub r: f64,
    /// Impulse delay.
    pub d: f64,
    pub eps: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub zeta: u32,
}

impl Default for Example2Params {
    fn default() -> Self {
        let s = 1.0 / 7.0;
        Self {
            a: Matrix::from_rows(&[
                vec![-18.0 / 7.0, 9.0, 0.0],
                vec![1.0, -1.0, 1.0],
                vec![0.0, -100.0 / 7.0, 0.0],
            ])
            .expect("static matrix"),
            b: Matrix::column(&[0.0, s, s]),
            c: Matrix::identity(3).scale(-0.2),
            d_gain: Matrix::column(&[2.0 / 7.0, 0.0, 0.0]),
            g: Nonlinearity::chua(),
            lipschitz: 27.0 / 7.0,
            r: 0.02,
            d: 0.01,
            eps: 1.0,
            eps1: 1e-3,
            eps2: 1.001,
            zeta: 0,
        }
    }
}

impl Example2Params {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn delay_bound(&self) -> f64 {
        self.r.max(self.d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let shapes = self.a.is_square()
            && self.c.rows() == n
            && self.c.cols() == n
            && self.b.rows() == n
            && self.d_gain.rows() == n
            && self.d_gain.cols() == self.b.cols()
            && self.b.cols() > 0;
        if !shapes {
            return Err(Error::Parameter("inconsistent matrix shapes".into()));
        }
        if let Nonlinearity::SatFirst { column } = &self.g {
            if column.len() != n {
                return Err(Error::Parameter(
                    "nonlinearity column has wrong length".into(),
                ));
            }
        }
        if !(self.r > 0.0) || !(self.d > 0.0) {
            return Err(Error::Parameter("delays r and d must be > 0".into()));
        }
        if self.lipschitz < self.g.lipschitz() * (1.0 - 1e-12) {
            return Err(Error::Parameter(format!(
                "declared Lipschitz constant {} is below that of g ({})",
                self.lipschitz,
                self.g.lipschitz()
            )));
        }
        Ok(())
    }

    pub fn derive_inputs(&self, delta: f64) -> Example2Inputs {
        Example2Inputs {
            a: self.a.clone(),
            c: self.c.clone(),
            lipschitz: self.lipschitz,
            r: self.r,
            d: self.d,
            eps: self.eps,
            eps1: self.eps1,
            eps2: self.eps2,
            zeta: self.zeta,
            delta,
        }
    }

    pub fn derive(&self, delta: f64) -> Result<Example2Derivation> {
        example2_derive(&self.derive_inputs(delta))
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Drive system `ẋ = Ax + g(x(t-r))`, no impulses.
pub fn example2_reference_system(p: &Example2Params) -> Result<ImpulsiveSystem> {
    p.validate()?;
    let (a, g, r, n) = (p.a.clone(), p.g.clone(), p.r, p.n());
    let sys = ImpulsiveSystem::new(
        n,
        1,
        r,
        move |_, v, _| {
            let mut dx = a.mul_vec(&v.current()?);
            add_into(&mut dx, &g.eval(&v.at(-r)?));
            Ok(dx)
        },
        move |_, _, _, _| Ok(vec![0.0; n]),
    )?;
    Ok(sys
        .with_name("example2-reference")
        .with_discrete_delays(vec![r]))
}

pub fn example2_reference(
    p: &Example2Params,
    phi_x: &History,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    let sys = example2_reference_system(p)?;
    simulate(
        &sys,
        phi_x,
        &InputSignal::zero(1),
        &ImpulseSchedule::empty(),
        t_end,
        h,
    )
}

/// Reference and error advanced together on one grid, state `(x, e)`:
/// `ė = Ae + g(x(t-r) + e(t-r)) - g(x(t-r)) + Bw`, `Δe = Ce(t-d) + Dw(t⁻)`.
pub fn example2_coupled_system(p: &Example2Params) -> Result<ImpulsiveSystem> {
    p.validate()?;
    let (a, b, c, dg, g) = (
        p.a.clone(),
        p.b.clone(),
        p.c.clone(),
        p.d_gain.clone(),
        p.g.clone(),
    );
    let (r, d, n) = (p.r, p.d, p.n());
    let sys = ImpulsiveSystem::new(
        2 * n,
        p.m(),
        p.delay_bound(),
        move |_, v, w| {
            let s = v.current()?;
            let sr = v.at(-r)?;
            let (x, e) = s.split_at(n);
            let (xr, er) = sr.split_at(n);
            let gx = g.eval(xr);
            let xr_plus: Vec<f64> = xr.iter().zip(er).map(|(p, q)| p + q).collect();
            let gy = g.eval(&xr_plus);

            let mut out = a.mul_vec(x);
            add_into(&mut out, &gx);
            let mut de = a.mul_vec(e);
            for i in 0..n {
                de[i] += gy[i] - gx[i];
            }
            b.mul_vec_acc(w, &mut de);
            out.extend(de);
            Ok(out)
        },
        move |_, _, v, w| {
            let sd = v.at(-d)?;
            let mut de = c.mul_vec(&sd[n..]);
            dg.mul_vec_acc(w, &mut de);
            let mut out = vec![0.0; n];
            out.extend(de);
            Ok(out)
        },
    )?;
    Ok(sys.with_name("example2").with_discrete_delays(vec![r, d]))
}

/// Drive and response simulated directly, state `(x, y)`:
/// `ẏ = Ay + g(y(t-r)) + Bw`, `Δy = C[y(t-d) - x(t-d)] + Dw(t⁻)`.
pub fn example2_drive_response_system(p: &Example2Params) -> Result<ImpulsiveSystem> {
    p.validate()?;
    let (a, b, c, dg, g) = (
        p.a.clone(),
        p.b.clone(),
        p.c.clone(),
        p.d_gain.clone(),
        p.g.clone(),
    );
    let (r, d, n) = (p.r, p.d, p.n());
    let sys = ImpulsiveSystem::new(
        2 * n,
        p.m(),
        p.delay_bound(),
        move |_, v, w| {
            let s = v.current()?;
            let sr = v.at(-r)?;
            let mut out = a.mul_vec(&s[..n]);
            add_into(&mut out, &g.eval(&sr[..n]));
            let mut dy = a.mul_vec(&s[n..]);
            add_into(&mut dy, &g.eval(&sr[n..]));
            b.mul_vec_acc(w, &mut dy);
            out.extend(dy);
            Ok(out)
        },
        move |_, _, v, w| {
            let sd = v.at(-d)?;
            let diff: Vec<f64> = (0..n).map(|i| sd[n + i] - sd[i]).collect();
            let mut dy = c.mul_vec(&diff);
            dg.mul_vec_acc(w, &mut dy);
            let mut out = vec![0.0; n];
            out.extend(dy);
            Ok(out)
        },
    )?;
    Ok(sys
        .with_name("example2-drive-response")
        .with_discrete_delays(vec![r, d]))
}

/// Error dynamics alone. A nonlinear `g` needs the reference trajectory to
/// evaluate `g(x(t-r) + e(t-r)) - g(x(t-r))`.
pub fn example2_system(
    p: &Example2Params,
    reference: Option<Arc<Trajectory>>,
) -> Result<ImpulsiveSystem> {
    p.validate()?;
    if !p.g.is_zero() && reference.is_none() {
        return Err(Error::Config(
            "error dynamics with a nonlinear g need a reference trajectory".into(),
        ));
    }
    let (a, b, c, dg, g) = (
        p.a.clone(),
        p.b.clone(),
        p.c.clone(),
        p.d_gain.clone(),
        p.g.clone(),
    );
    let (r, d, n) = (p.r, p.d, p.n());
    let sys = ImpulsiveSystem::new(
        n,
        p.m(),
        p.delay_bound(),
        move |t, v, w| {
            let mut de = a.mul_vec(&v.current()?);
            if let Some(x) = &reference {
                let er = v.at(-r)?;
                let xr = x.eval(t - r)?;
                let y: Vec<f64> = xr.iter().zip(&er).map(|(p, q)| p + q).collect();
                let (gy, gx) = (g.eval(&y), g.eval(&xr));
                for i in 0..n {
                    de[i] += gy[i] - gx[i];
                }
            }
            b.mul_vec_acc(w, &mut de);
            Ok(de)
        },
        move |_, _, v, w| {
            let mut de = c.mul_vec(&v.at(-d)?);
            dg.mul_vec_acc(w, &mut de);
            Ok(de)
        },
    )?;
    Ok(sys
        .with_name("example2-error")
        .with_discrete_delays(vec![r, d]))
}

/// `V1 = eᵀe`, `V2 = εL ∫_{t-r}^t eᵀe`, reading `e` from components
/// `offset..offset+n`. Gains: `χ_flow(s) = ‖B‖²s²/ε1` and
/// `χ_jump(s) = (1 + 1/ξ*) ε2²/(ε2²-1) (d‖C‖‖B‖ + ‖D‖)² s²`.
pub fn example2_lyapunov(
    p: &Example2Params,
    offset: usize,
    delta: f64,
) -> Result<(LyapunovPair, Nominal)> {
    p.validate()?;
    let der = p.derive(delta)?;
    let n = p.n();
    let range = offset..offset + n;
    let (weight, r) = (p.eps * p.lipschitz, p.r);
    let nb = p.b.spectral_norm()?;
    let nd = p.d_gain.spectral_norm()?;
    let flow_gain = nb * nb / p.eps1;
    let split = der.xi.map_or(1.0, |xi| 1.0 + 1.0 / xi);
    let jump_gain =
        split * p.eps2 * p.eps2 / (p.eps2 * p.eps2 - 1.0) * (p.d * der.norm_c * nb + nd).powi(2);

    let r1 = range.clone();
    let pair = LyapunovPair::new(move |_, x| x[r1.clone()].iter().map(|v| v * v).sum(), r)
        .with_v2(move |_, v| {
            let rg = range.clone();
            Ok(weight * v.integral_of(r, |_, x| x[rg.clone()].iter().map(|e| e * e).sum())?)
        })
        .with_kappa(der.kappa)
        .with_gains(
            gain(move |s| flow_gain * s * s),
            gain(move |s| jump_gain * s * s),
        )
        .with_bounds(gain(|s| s * s), gain(|s| s * s), None);
    let nominal = Nominal {
        mu: der.mu,
        rho1: der.rho1,
        rho2: der.rho2,
        kappa: Some(der.kappa),
        mode: TheoremMode::Unstable,
    };
    Ok((pair, nominal))
}

/// `w = 0`, `w = e^{-7t}`, `w = cos(16πt)`.
pub fn example2_inputs() -> Vec<InputSignal> {
    vec![
        InputSignal::zero(1),
        InputSignal::exp_decay(1.0, 7.0),
        InputSignal::cosine(1.0, 16.0 * PI),
    ]
}

/// Ready-to-run system, Lyapunov pair and defaults.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub system: ImpulsiveSystem,
    pub pair: LyapunovPair,
    pub nominal: Nominal,
    /// State components the ISS statements are about.
    pub projection: Range<usize>,
    pub phi: History,
    pub step: f64,
    /// Nominal impulse spacing.
    pub delta: f64,
}

pub fn example1_scenario(p: &Example1Params) -> Result<Scenario> {
    Ok(Scenario {
        name: "example1".into(),
        system: example1_system(p)?,
        pair: example1_lyapunov(p)?,
        nominal: p.nominal(),
        projection: 0..1,
        phi: History::constant(0.0, p.tau, vec![1.0])?,
        step: 0.005,
        delta: 2.1,
    })
}

/// Coupled `(x, e)` scenario with constant initial functions
/// `φx ≡ (0.1, …)` and `φe ≡ (0.5, -0.5, 0.5, …)`.
pub fn example2_scenario(p: &Example2Params, delta: f64) -> Result<Scenario> {
    let n = p.n();
    let (pair, nominal) = example2_lyapunov(p, n, delta)?;
    let mut phi = vec![0.1; n];
    let e0: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
        .collect();
    phi.extend(e0);
    Ok(Scenario {
        name: "example2".into(),
        system: example2_coupled_system(p)?,
        pair,
        nominal,
        projection: n..2 * n,
        phi: History::constant(0.0, p.delay_bound(), phi)?,
        step: 0.002,
        delta,
    })
}
