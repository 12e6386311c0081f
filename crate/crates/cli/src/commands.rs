//! Subcommand bodies. Each returns the process exit code; payloads go to
//! stdout, diagnostics to stderr.

use std::path::{Path, PathBuf};

use impulsive_iss::verifier::{
    check_envelope, fit_envelope, run_ensemble, zero_input_convergence, ConvergenceReport,
    EnsembleDesign, EnsembleSpec, EnvelopeReport, EnvelopeSpec,
};
use impulsive_iss::{
    certify, simulate, CertificateInputs, CertificateReport, DwellClass, Error, ImpulseSchedule,
    InputSignal, Result, Theorem, TheoremMode,
};
use serde::Serialize;

use crate::config::{RunConfig, ScenarioSpec, ScheduleSpec};
use crate::output::{events_path, fmt_f64, write_events, write_trajectory_file};

pub const EXIT_OK: u8 = 0;
pub const EXIT_REJECTED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_NO_WITNESS: u8 = 4;

fn report_error(e: &Error) {
    eprintln!("error: {e}");
    if let Error::Precondition { violations, .. } = e {
        for v in violations {
            eprintln!("  - {v}");
        }
    }
}

/// Pretty JSON on stdout; a closed pipe is not an error.
fn emit_json<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

/// Exit code for a failure of `simulate`.
pub fn simulate_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => EXIT_DIVERGED,
        Error::Config(_)
        | Error::Parameter(_)
        | Error::Structural(_)
        | Error::Range { .. }
        | Error::DelayBound { .. }
        | Error::Precondition { .. } => EXIT_CONFIG,
        _ => EXIT_REJECTED,
    }
}

pub fn cmd_simulate(config: &Path, out: Option<PathBuf>) -> u8 {
    match run_simulate(config, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report_error(&e);
            simulate_code(&e)
        }
    }
}

fn run_simulate(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let integ = cfg.integration()?;
    let built = cfg.build()?;
    let w = cfg.input(built.system.input_dim())?;
    let sched = cfg.schedule().build(0.0, integ.t_end, cfg.seed)?;
    let traj = simulate(
        &built.system,
        &built.phi,
        &w,
        &sched,
        integ.t_end,
        integ.step,
    )?;
    let path = out
        .or(cfg.output.trajectory.clone())
        .unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    let rows = write_trajectory_file(&path, &traj, built.projection.clone(), built.pair.as_ref())?;
    let events = events_path(&path);
    write_events(&events, &traj, built.projection)?;
    log::info!(
        "{} rows to {}, {} impulses to {}",
        rows,
        path.display(),
        traj.events.len(),
        events.display()
    );
    Ok(())
}

/// Flags of the `certify` subcommand.
#[derive(Debug, Clone, Default)]
pub struct CertifyArgs {
    pub theorem: u8,
    pub mu: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
    pub kappa: Option<f64>,
    pub r: Option<f64>,
    pub delta: Option<f64>,
}

fn theorem_from(n: u8) -> Result<Theorem> {
    match n {
        1 => Ok(Theorem::T1),
        2 => Ok(Theorem::T2),
        3 => Ok(Theorem::T3),
        4 => Ok(Theorem::T4),
        _ => Err(Error::Config(format!(
            "theorem must be 1, 2, 3 or 4, got {n}"
        ))),
    }
}

impl CertifyArgs {
    fn inputs(&self) -> Result<(Theorem, CertificateInputs, Option<f64>)> {
        let theorem = theorem_from(self.theorem)?;
        let mut missing = Vec::new();
        let mut need = |name: &str, v: Option<f64>| {
            if v.is_none() {
                missing.push(format!("--{name}"));
            }
            v.unwrap_or(0.0)
        };
        let (mu, rho1, rho2) = if theorem == Theorem::T4 {
            (
                self.mu.unwrap_or(0.0),
                need("rho1", self.rho1),
                need("rho2", self.rho2),
            )
        } else {
            (
                need("mu", self.mu),
                need("rho1", self.rho1),
                need("rho2", self.rho2),
            )
        };
        if matches!(theorem, Theorem::T2 | Theorem::T3 | Theorem::T4) {
            need("kappa", self.kappa);
        }
        let r = if matches!(theorem, Theorem::T1 | Theorem::T2) {
            need("r", self.r)
        } else {
            self.r.unwrap_or(0.0)
        };
        if theorem != Theorem::T4 {
            need("delta", self.delta);
        }
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "{theorem} needs {}",
                missing.join(", ")
            )));
        }
        Ok((
            theorem,
            CertificateInputs::new(mu, rho1, rho2, self.kappa, r),
            self.delta,
        ))
    }
}

pub fn cmd_certify(args: &CertifyArgs) -> u8 {
    let rep = args
        .inputs()
        .and_then(|(t, inp, delta)| certify(t, &inp, delta));
    match rep {
        Ok(rep) => {
            emit_json(&rep);
            for d in &rep.diagnostics {
                log::info!("{d}");
            }
            if rep.admissible_at_query == Some(true) {
                EXIT_OK
            } else {
                EXIT_REJECTED
            }
        }
        Err(e) => {
            report_error(&e);
            EXIT_CONFIG
        }
    }
}

#[derive(Debug, Serialize)]
struct RunSummary {
    label: String,
    phi_norm: f64,
    final_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<EnvelopeReport>,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    envelope: Option<EnvelopeSpec>,
    per_run: Vec<RunSummary>,
    zero_input: Option<ConvergenceReport>,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl VerifyReport {
    fn failed(msg: String) -> Self {
        Self {
            envelope: None,
            per_run: Vec::new(),
            zero_input: None,
            pass: false,
            error: Some(msg),
        }
    }
}

/// Flow-stable systems are tested over `inf_dwell` classes, impulse-stabilized
/// ones over `sup_dwell`.
fn default_class(spec: &ScheduleSpec, mode: Option<TheoremMode>) -> DwellClass {
    match (spec, mode) {
        (ScheduleSpec::RandomDwell { delta_max, .. }, _) => DwellClass::SupDwell(*delta_max),
        (ScheduleSpec::Periodic { delta }, Some(TheoremMode::Stable)) => {
            DwellClass::InfDwell(*delta)
        }
        (ScheduleSpec::Periodic { delta }, _) => DwellClass::SupDwell(*delta),
        _ => DwellClass::All,
    }
}

pub fn cmd_verify_iss(config: &Path, ensemble: usize, seed: Option<u64>) -> u8 {
    let (code, report) = match run_verify(config, ensemble, seed) {
        Ok(r) => {
            let code = match (r.pass, &r.envelope) {
                (true, _) => EXIT_OK,
                (false, Some(_)) => EXIT_REJECTED,
                (false, None) => EXIT_NO_WITNESS,
            };
            (code, r)
        }
        Err(e @ (Error::NoWitness(_) | Error::Divergence { .. })) => {
            report_error(&e);
            (EXIT_NO_WITNESS, VerifyReport::failed(e.to_string()))
        }
        Err(e) => {
            report_error(&e);
            return simulate_code(&e).max(EXIT_CONFIG);
        }
    };
    emit_json(&report);
    code
}

fn run_verify(config: &Path, ensemble: usize, seed: Option<u64>) -> Result<VerifyReport> {
    if ensemble == 0 {
        return Err(Error::Config("ensemble size must be positive".into()));
    }
    let cfg = RunConfig::load(config)?;
    let integ = cfg.integration()?;
    let built = cfg.build()?;
    let m = built.system.input_dim();
    let w = cfg.input(m)?;
    let ens = cfg.ensemble.clone();
    let inputs = match ens.as_ref().and_then(|e| e.inputs.clone()) {
        Some(list) => list,
        None if w.is_zero() => vec![w],
        None => vec![InputSignal::zero(m), w],
    };
    for i in &inputs {
        i.validate()?;
        if i.dim() != m {
            return Err(Error::Config(format!(
                "ensemble input has dimension {}, system expects {m}",
                i.dim()
            )));
        }
    }
    let design = EnsembleDesign {
        schedules: ensemble,
        class: ens
            .as_ref()
            .and_then(|e| e.class)
            .unwrap_or_else(|| default_class(cfg.schedule(), built.mode)),
        nominal_delta: cfg.schedule().delta().unwrap_or(1.0),
        inputs,
        history_scales: ens.map_or_else(|| vec![0.5, 1.0, 2.0], |e| e.history_scales),
        seed: seed.unwrap_or(cfg.seed),
        t_end: integ.t_end,
    };
    let mut spec =
        EnsembleSpec::generate(&built.phi, built.projection.clone(), integ.step, &design)?;
    if let ScheduleSpec::None = cfg.schedule() {
        for mem in &mut spec.members {
            mem.schedule = ImpulseSchedule::empty();
        }
    }
    let runs = run_ensemble(&built.system, &spec)?;
    let zero: Vec<_> = runs.iter().filter(|r| r.zero_input).cloned().collect();
    let zero_input = (!zero.is_empty()).then(|| zero_input_convergence(&zero));
    match fit_envelope(&runs) {
        Ok(env) => {
            let checks: Vec<EnvelopeReport> =
                runs.iter().map(|r| check_envelope(r, &env)).collect();
            let pass = checks.iter().all(|c| c.passed);
            let per_run = runs
                .iter()
                .zip(checks)
                .map(|(r, c)| RunSummary {
                    label: r.label.clone(),
                    phi_norm: r.phi_norm,
                    final_norm: r.final_norm(),
                    check: Some(c),
                })
                .collect();
            Ok(VerifyReport {
                envelope: Some(env),
                per_run,
                zero_input,
                pass,
                error: None,
            })
        }
        Err(Error::NoWitness(msg)) => {
            log::warn!("{msg}");
            Ok(VerifyReport {
                envelope: None,
                per_run: runs
                    .iter()
                    .map(|r| RunSummary {
                        label: r.label.clone(),
                        phi_norm: r.phi_norm,
                        final_norm: r.final_norm(),
                        check: None,
                    })
                    .collect(),
                zero_input,
                pass: false,
                error: Some(format!("no ISS witness found: {msg}")),
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Delta,
    Epsilon,
    Kappa,
    Rho1,
    Rho2,
    Mu,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Self::Delta),
            "epsilon" => Ok(Self::Epsilon),
            "kappa" => Ok(Self::Kappa),
            "rho1" => Ok(Self::Rho1),
            "rho2" => Ok(Self::Rho2),
            "mu" => Ok(Self::Mu),
            _ => Err(Error::Config(format!(
                "unknown sweep parameter '{s}' (expected delta, epsilon, kappa, rho1, rho2 or mu)"
            ))),
        }
    }
}

fn apply(p: SweepParam, v: f64, inp: &mut CertificateInputs) {
    match p {
        SweepParam::Kappa => inp.kappa = Some(v),
        SweepParam::Rho1 => inp.rho1 = v,
        SweepParam::Rho2 => inp.rho2 = v,
        SweepParam::Mu => inp.mu = v,
        SweepParam::Delta | SweepParam::Epsilon => {}
    }
}

/// Certificate for one grid point of a sweep.
fn certificate_at(cfg: &RunConfig, param: SweepParam, v: f64) -> Result<CertificateReport> {
    let query = |default: Option<f64>| {
        if param == SweepParam::Delta {
            Some(v)
        } else {
            default
        }
    };
    if let Some(c) = &cfg.certificate {
        if param == SweepParam::Epsilon {
            return Err(Error::Config(
                "epsilon sweeps need a built-in scenario".into(),
            ));
        }
        let mut inp = CertificateInputs::new(c.mu, c.rho1, c.rho2, c.kappa, c.r);
        apply(param, v, &mut inp);
        return certify(theorem_from(c.theorem)?, &inp, query(c.delta));
    }
    let delta = query(cfg.schedule().delta());
    match cfg.scenario()? {
        ScenarioSpec::Example1 { params } => {
            let mut p = *params;
            if param == SweepParam::Epsilon {
                p.eps = v;
            }
            let n = p.nominal();
            let mut inp = CertificateInputs::new(n.mu, n.rho1, n.rho2, n.kappa, p.tau);
            apply(param, v, &mut inp);
            certify(Theorem::T1, &inp, delta.or(Some(2.1)))
        }
        ScenarioSpec::Example2 { params } => {
            let mut p = params.clone();
            if param == SweepParam::Epsilon {
                p.eps = v;
            }
            let dq = delta.unwrap_or(0.01);
            let crowded = ((p.d / dq) - 1e-9).ceil() as i64 - 1;
            if crowded > p.zeta as i64 {
                log::warn!(
                    "delta = {dq}: periodic impulses put {crowded} impulses inside the impulse delay, but zeta = {}",
                    p.zeta
                );
            }
            let d = p.derive(dq)?;
            match param {
                SweepParam::Delta | SweepParam::Epsilon => Ok(d.certificate),
                _ => {
                    let mut inp = d.certificate.inputs;
                    apply(param, v, &mut inp);
                    certify(Theorem::T3, &inp, d.certificate.delta_query)
                }
            }
        }
        ScenarioSpec::Linear { .. } => Err(Error::Config(
            "sweeps over a linear scenario need a certificate section".into(),
        )),
    }
}

/// Final projected norm under a periodic schedule of spacing `delta`.
fn final_norm_at(cfg: &RunConfig, delta: f64) -> Result<f64> {
    let integ = cfg.integration()?;
    let built = cfg.scenario()?.build(Some(delta))?;
    let w = cfg.input(built.system.input_dim())?;
    let sched = ImpulseSchedule::periodic_until(0.0, delta, integ.t_end)?;
    let traj = simulate(
        &built.system,
        &built.phi,
        &w,
        &sched,
        integ.t_end,
        integ.step,
    )?;
    Ok(impulsive_iss::linalg::norm(
        &traj.final_state()[built.projection],
    ))
}

pub struct SweepArgs {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

pub fn cmd_sweep(config: &Path, args: &SweepArgs, out: Option<PathBuf>) -> u8 {
    match run_sweep(config, args, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report_error(&e);
            simulate_code(&e)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn run_sweep(config: &Path, args: &SweepArgs, out: Option<PathBuf>) -> Result<()> {
    let param: SweepParam = args.param.parse()?;
    if args.steps == 0 {
        return Err(Error::Config("steps must be at least 1".into()));
    }
    if !args.from.is_finite() || !args.to.is_finite() {
        return Err(Error::Config("sweep range must be finite".into()));
    }
    let cfg = RunConfig::load(config)?;
    let simulate_too =
        param == SweepParam::Delta && cfg.scenario.is_some() && cfg.integration.is_some();
    let grid: Vec<f64> = if args.steps == 1 {
        vec![args.from]
    } else {
        (0..args.steps)
            .map(|i| args.from + (args.to - args.from) * i as f64 / (args.steps - 1) as f64)
            .collect()
    };

    let mut header = vec!["value", "theorem", "margin", "admissible", "delta_star"];
    if simulate_too {
        header.push("final_norm");
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &v in &grid {
        let mut row = match certificate_at(&cfg, param, v) {
            Ok(rep) => vec![
                fmt_f64(v),
                rep.theorem.to_string(),
                fmt_opt(rep.margin_at_query),
                rep.admissible_at_query
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
                fmt_opt(rep.delta_star),
            ],
            // Outside the theorem's hypotheses: no margin, not admissible.
            Err(Error::Precondition {
                theorem,
                violations,
            }) => {
                log::warn!(
                    "{} = {v}: {theorem} preconditions fail: {}",
                    args.param,
                    violations.join("; ")
                );
                vec![
                    fmt_f64(v),
                    theorem,
                    String::new(),
                    "false".into(),
                    String::new(),
                ]
            }
            Err(e) => return Err(e),
        };
        if simulate_too {
            row.push(match final_norm_at(&cfg, v) {
                Ok(n) => fmt_f64(n),
                Err(Error::Divergence { .. }) => "inf".into(),
                Err(e) => return Err(e),
            });
        }
        rows.push(row);
    }

    let sink: Box<dyn std::io::Write> = match &out {
        Some(p) => Box::new(
            std::fs::File::create(p)
                .map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    wr.write_record(&header).map_err(csv_err)?;
    for r in rows {
        wr.write_record(&r).map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Error::Config(format!("write: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_params_parse() {
        assert_eq!("rho2".parse::<SweepParam>().unwrap(), SweepParam::Rho2);
        assert!(matches!(
            "gamma".parse::<SweepParam>(),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn certify_flag_completeness() {
        let args = CertifyArgs {
            theorem: 1,
            mu: Some(0.4),
            rho1: Some(5.0),
            rho2: Some(0.1),
            delta: Some(2.0),
            ..Default::default()
        };
        assert!(matches!(args.inputs(), Err(Error::Config(m)) if m.contains("--r")));
        let t4 = CertifyArgs {
            theorem: 4,
            rho1: Some(0.5),
            rho2: Some(0.5),
            kappa: Some(0.0),
            ..Default::default()
        };
        assert!(t4.inputs().is_ok());
        assert!(CertifyArgs { theorem: 7, ..t4 }.inputs().is_err());
    }

    #[test]
    fn class_defaults() {
        let p = ScheduleSpec::Periodic { delta: 2.0 };
        assert_eq!(
            default_class(&p, Some(TheoremMode::Stable)),
            DwellClass::InfDwell(2.0)
        );
        assert_eq!(
            default_class(&p, Some(TheoremMode::Unstable)),
            DwellClass::SupDwell(2.0)
        );
        assert_eq!(default_class(&ScheduleSpec::None, None), DwellClass::All);
    }

    #[test]
    fn exit_codes_by_error() {
        assert_eq!(
            simulate_code(&Error::Divergence {
                time: 1.0,
                norm: 1e13
            }),
            EXIT_DIVERGED
        );
        assert_eq!(simulate_code(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(simulate_code(&Error::Numeric("x".into())), EXIT_REJECTED);
    }
}
