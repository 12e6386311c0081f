//! Closed-form dwell-time certificates.
//!
//! * T1: `ρ1 ≥ 1`, `ρ = ρ1 + ρ2 e^{μr}`, ISS over ℓ_inf(δ) for `μδ > ln ρ`.
//! * T2: `ρ1 < 1` with `ρ1 + ρ2 + (1-ρ1)κ ≥ 1`,
//!   `ρ = ρ1 + [ρ2 + (1-ρ1)κ] e^{μr}`, same dwell condition.
//! * T3: destabilizing flow, `ln[ρ1 + ρ2 + (1-ρ1)κ] < -μδ` over ℓ_sup(δ).
//! * T4: `ρ1 + ρ2 + (1-ρ1)κ < 1` gives ISS for every schedule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateInputs {
    pub mu: f64,
    pub rho1: f64,
    pub rho2: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub r: f64,
}

impl CertificateInputs {
    pub fn new(mu: f64, rho1: f64, rho2: f64, kappa: Option<f64>, r: f64) -> Self {
        Self {
            mu,
            rho1,
            rho2,
            kappa,
            r,
        }
    }

    /// `ρ1 + ρ2 + (1 - ρ1)κ`.
    pub fn combo(&self) -> Option<f64> {
        self.kappa
            .map(|k| self.rho1 + self.rho2 + (1.0 - self.rho1) * k)
    }

    fn basic_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [
            ("mu", self.mu),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("r", self.r),
        ] {
            if !x.is_finite() {
                v.push(format!("{name} = {x} is not finite"));
            }
        }
        if self.rho2 < 0.0 {
            v.push(format!("rho2 = {} must be >= 0", self.rho2));
        }
        if self.r < 0.0 {
            v.push(format!("r = {} must be >= 0", self.r));
        }
        if let Some(k) = self.kappa {
            if !k.is_finite() || k < 0.0 {
                v.push(format!("kappa = {k} must be finite and >= 0"));
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    T1,
    T2,
    T3,
    T4,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Theorem::T1 => "T1",
            Theorem::T2 => "T2",
            Theorem::T3 => "T3",
            Theorem::T4 => "T4",
        };
        f.write_str(s)
    }
}

/// Admissible dwell times `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "delta_star", rename_all = "snake_case")]
pub enum AdmissibleSet {
    /// `δ > δ*` (ℓ_inf schedules).
    Above(f64),
    /// `0 < δ < δ*` (ℓ_sup schedules).
    Below(f64),
    All,
    Empty,
}

impl AdmissibleSet {
    pub fn contains(&self, delta: f64) -> bool {
        match *self {
            AdmissibleSet::Above(d) => delta > d,
            AdmissibleSet::Below(d) => delta > 0.0 && delta < d,
            AdmissibleSet::All => true,
            AdmissibleSet::Empty => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub theorem: Theorem,
    pub inputs: CertificateInputs,
    pub rho: Option<f64>,
    pub combo: Option<f64>,
    pub delta_star: Option<f64>,
    pub admissible: AdmissibleSet,
    pub delta_query: Option<f64>,
    /// Signed slack of the dwell inequality at `delta_query`; positive means
    /// satisfied.
    pub margin_at_query: Option<f64>,
    pub admissible_at_query: Option<bool>,
    pub diagnostics: Vec<String>,
}

impl CertificateReport {
    fn new(theorem: Theorem, inputs: CertificateInputs, admissible: AdmissibleSet) -> Self {
        Self {
            theorem,
            inputs,
            rho: None,
            combo: None,
            delta_star: None,
            admissible,
            delta_query: None,
            margin_at_query: None,
            admissible_at_query: None,
            diagnostics: Vec::new(),
        }
    }
}

fn fail(theorem: Theorem, violations: Vec<String>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Precondition {
            theorem: theorem.to_string(),
            violations,
        })
    }
}

fn require_kappa(inp: &CertificateInputs, v: &mut Vec<String>) -> f64 {
    match inp.kappa {
        Some(k) => k,
        None => {
            v.push("kappa is required".into());
            0.0
        }
    }
}

fn check_rho1_below_one(inp: &CertificateInputs, v: &mut Vec<String>) {
    if !(inp.rho1 >= 0.0 && inp.rho1 < 1.0) {
        v.push(format!("rho1 = {} must lie in [0, 1)", inp.rho1));
    }
}

fn dwell_above(
    theorem: Theorem,
    inp: CertificateInputs,
    rho: f64,
    delta: Option<f64>,
) -> CertificateReport {
    let ln_rho = rho.ln();
    let delta_star = ln_rho / inp.mu;
    let mut rep = CertificateReport::new(theorem, inp, AdmissibleSet::Above(delta_star));
    rep.rho = Some(rho);
    rep.delta_star = Some(delta_star);
    if let Some(d) = delta {
        let margin = inp.mu * d - ln_rho;
        rep.delta_query = Some(d);
        rep.margin_at_query = Some(margin);
        rep.admissible_at_query = Some(margin > 0.0);
    }
    rep
}

/// Destabilizing impulses: `ρ = ρ1 + ρ2 e^{μr}`, `δ* = ln ρ / μ`.
pub fn thm1_certificate(inp: &CertificateInputs, delta: Option<f64>) -> Result<CertificateReport> {
    let mut v = inp.basic_violations();
    if !(inp.mu > 0.0) {
        v.push(format!("mu = {} must be > 0", inp.mu));
    }
    if !(inp.rho1 >= 1.0) {
        v.push(format!(
            "rho1 = {} must be >= 1 (use T2 for rho1 < 1)",
            inp.rho1
        ));
    }
    fail(Theorem::T1, v)?;
    let rho = inp.rho1 + inp.rho2 * (inp.mu * inp.r).exp();
    let mut rep = dwell_above(Theorem::T1, *inp, rho, delta);
    if is_example1(inp) {
        rep.diagnostics.push(format!(
            "Example 1 dwell bound 2.06 is not reproduced: ln(rho)/mu = {:.6}",
            rho.ln() / inp.mu
        ));
    }
    Ok(rep)
}

/// Example 1 constants, with `ρ1 = 2e` accepted to five decimals.
fn is_example1(inp: &CertificateInputs) -> bool {
    (inp.rho1 - 2.0 * std::f64::consts::E).abs() < 1e-4
        && (inp.rho2 - 3.0 / 16.0).abs() < 1e-12
        && (inp.mu - 0.4).abs() < 1e-12
        && inp.r == 1.0
}

/// `ρ1 < 1` but `ρ1 + ρ2 + (1-ρ1)κ ≥ 1`.
pub fn thm2_certificate(inp: &CertificateInputs, delta: Option<f64>) -> Result<CertificateReport> {
    let mut v = inp.basic_violations();
    if !(inp.mu > 0.0) {
        v.push(format!("mu = {} must be > 0", inp.mu));
    }
    check_rho1_below_one(inp, &mut v);
    let kappa = require_kappa(inp, &mut v);
    let combo = inp.rho1 + inp.rho2 + (1.0 - inp.rho1) * kappa;
    if inp.kappa.is_some() && !(combo >= 1.0) {
        v.push(format!(
            "rho1 + rho2 + (1 - rho1) kappa = {combo} must be >= 1 (T4 applies instead)"
        ));
    }
    fail(Theorem::T2, v)?;
    let rho = inp.rho1 + (inp.rho2 + (1.0 - inp.rho1) * kappa) * (inp.mu * inp.r).exp();
    let mut rep = dwell_above(Theorem::T2, *inp, rho, delta);
    rep.combo = Some(combo);
    Ok(rep)
}

/// Stabilizing impulses against a destabilizing flow: admissible
/// `0 < δ < -ln(combo)/μ`. `combo ≥ 1` is reported as an empty set.
pub fn thm3_certificate(inp: &CertificateInputs, delta: Option<f64>) -> Result<CertificateReport> {
    let mut v = inp.basic_violations();
    if !(inp.mu > 0.0) {
        v.push(format!("mu = {} must be > 0", inp.mu));
    }
    check_rho1_below_one(inp, &mut v);
    let kappa = require_kappa(inp, &mut v);
    fail(Theorem::T3, v)?;
    Ok(thm3_report(
        inp,
        inp.rho1 + inp.rho2 + (1.0 - inp.rho1) * kappa,
        delta,
    ))
}

fn thm3_report(inp: &CertificateInputs, combo: f64, delta: Option<f64>) -> CertificateReport {
    let ln_combo = combo.ln();

    let (admissible, delta_star) = if combo >= 1.0 {
        (AdmissibleSet::Empty, Some(-ln_combo / inp.mu + 0.0))
    } else if combo == 0.0 {
        (AdmissibleSet::All, None)
    } else {
        let d = -ln_combo / inp.mu;
        (AdmissibleSet::Below(d), Some(d))
    };
    let mut rep = CertificateReport::new(Theorem::T3, *inp, admissible);
    rep.combo = Some(combo);
    rep.delta_star = delta_star;
    if combo >= 1.0 {
        rep.diagnostics.push(format!(
            "infeasible: combo = {combo} >= 1, no dwell time is admissible"
        ));
    }
    if let Some(d) = delta {
        rep.delta_query = Some(d);
        if combo > 0.0 {
            rep.margin_at_query = Some(-inp.mu * d - ln_combo);
        }
        rep.admissible_at_query = Some(admissible.contains(d));
    }
    rep
}

/// Passes iff `ρ1 + ρ2 + (1-ρ1)κ < 1`, independently of the schedule.
pub fn thm4_check(inp: &CertificateInputs) -> Result<CertificateReport> {
    let mut v = inp.basic_violations();
    if !(inp.mu >= 0.0) {
        v.push(format!("mu = {} must be >= 0", inp.mu));
    }
    check_rho1_below_one(inp, &mut v);
    let kappa = require_kappa(inp, &mut v);
    fail(Theorem::T4, v)?;
    let combo = inp.rho1 + inp.rho2 + (1.0 - inp.rho1) * kappa;
    let admissible = if combo < 1.0 {
        AdmissibleSet::All
    } else {
        AdmissibleSet::Empty
    };
    let mut rep = CertificateReport::new(Theorem::T4, *inp, admissible);
    rep.combo = Some(combo);
    rep.margin_at_query = Some(1.0 - combo);
    rep.admissible_at_query = Some(combo < 1.0);
    Ok(rep)
}

pub fn certify(
    theorem: Theorem,
    inp: &CertificateInputs,
    delta: Option<f64>,
) -> Result<CertificateReport> {
    match theorem {
        Theorem::T1 => thm1_certificate(inp, delta),
        Theorem::T2 => thm2_certificate(inp, delta),
        Theorem::T3 => thm3_certificate(inp, delta),
        Theorem::T4 => thm4_check(inp),
    }
}

/// Our T3 bound against the older `ln(1/(ρ1 + κ))/μ` (only for `ρ2 = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineComparison {
    pub ours: f64,
    pub theirs: Option<f64>,
    pub ratio: Option<f64>,
    pub diagnostics: Vec<String>,
}

pub fn compare_with_baseline(inp: &CertificateInputs) -> Result<BaselineComparison> {
    if inp.rho2 != 0.0 {
        return Err(Error::Precondition {
            theorem: "baseline comparison".into(),
            violations: vec![format!("rho2 = {} must be 0", inp.rho2)],
        });
    }
    let rep = thm3_certificate(inp, None)?;
    let kappa = inp.kappa.unwrap_or(0.0);
    let combo = rep.combo.unwrap_or(f64::NAN);
    let ours = -combo.ln() / inp.mu;
    let mut diagnostics = Vec::new();
    let sum = inp.rho1 + kappa;
    let theirs = if sum < 1.0 {
        Some((1.0 / sum).ln() / inp.mu)
    } else {
        diagnostics.push(format!(
            "rho1 + kappa = {sum} >= 1: comparison bound undefined"
        ));
        None
    };
    if let Some(t) = theirs {
        if ours < t {
            diagnostics.push(format!("unexpected: ours {ours} < theirs {t}"));
        }
    }
    Ok(BaselineComparison {
        ours,
        theirs,
        ratio: theirs.map(|t| ours / t),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComboMin {
    /// Minimizer `ξ*`; absent when the infimum is only approached.
    pub xi: Option<f64>,
    pub value: f64,
}

/// `min_{ξ>0} (1-κ)(1+ξ)a² + (1+1/ξ)b² + κ = (√(1-κ) a + b)² + κ`.
pub fn min_combo(a: f64, b: f64, kappa: f64) -> Result<ComboMin> {
    if !(a >= 0.0) || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Parameter(format!(
            "a = {a}, b = {b} must be finite and >= 0"
        )));
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::Parameter(format!(
            "kappa = {kappa} must lie in [0, 1)"
        )));
    }
    let s = (1.0 - kappa).sqrt();
    if a == 0.0 || b == 0.0 {
        return Ok(ComboMin {
            xi: None,
            value: a * a * (1.0 - kappa) + b * b + kappa,
        });
    }
    Ok(ComboMin {
        xi: Some(b / (a * s)),
        value: (s * a + b).powi(2) + kappa,
    })
}

/// Inputs of the drive/response synchronization certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example2Inputs {
    pub a: Matrix,
    pub c: Matrix,
    /// Lipschitz constant of the delayed nonlinearity.
    pub lipschitz: f64,
    /// Flow delay.
    pub r: f64,
    /// Impulse delay.
    pub d: f64,
    pub eps: f64,
    #[serde(default = "default_eps1")]
    pub eps1: f64,
    #[serde(default = "default_eps2")]
    pub eps2: f64,
    #[serde(default)]
    pub zeta: u32,
    pub delta: f64,
}

fn default_eps1() -> f64 {
    1e-3
}

fn default_eps2() -> f64 {
    1.001
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example2Derivation {
    pub lambda_max_sym: f64,
    pub norm_a: f64,
    pub norm_c: f64,
    pub norm_i_plus_c: f64,
    /// `λmax(A+Aᵀ) + L(ε + 1/ε)`.
    pub mu_nominal: f64,
    /// `mu_nominal + ε1`.
    pub mu: f64,
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub xi: Option<f64>,
    pub rho1: f64,
    pub rho2: f64,
    pub combo_min: f64,
    /// Left side of the nominal test, without ε1 and ε2.
    pub nominal_lhs: f64,
    /// `-mu_nominal · δ`.
    pub nominal_rhs: f64,
    pub nominal_feasible: bool,
    pub certificate: CertificateReport,
}

/// Derive `μ`, `κ`, `ρ1`, `ρ2` for the synchronization error system and
/// certify it with T3 at `δ`.
pub fn example2_derive(p: &Example2Inputs) -> Result<Example2Derivation> {
    let mut v = Vec::new();
    if !(p.eps > 0.0) {
        v.push(format!("eps = {} must be > 0", p.eps));
    }
    if !(p.eps1 > 0.0) {
        v.push(format!("eps1 = {} must be > 0", p.eps1));
    }
    if !(p.eps2 > 1.0) {
        v.push(format!("eps2 = {} must be > 1", p.eps2));
    }
    if !(p.lipschitz >= 0.0) || !(p.r >= 0.0) || !(p.d >= 0.0) {
        v.push("lipschitz, r and d must be >= 0".into());
    }
    if !p.a.is_square() || p.c.rows() != p.a.rows() || p.c.cols() != p.a.cols() {
        v.push("A and C must be square of the same size".into());
    }
    if !v.is_empty() {
        return Err(Error::Precondition {
            theorem: "example2".into(),
            violations: v,
        });
    }
    let n = p.a.rows();
    let lambda_max_sym = p.a.lambda_max_sym_sum()?;
    let norm_a = p.a.spectral_norm()?;
    let norm_c = p.c.spectral_norm()?;
    let norm_i_plus_c = Matrix::identity(n).add(&p.c)?.spectral_norm()?;

    let l = p.lipschitz;
    let mu_nominal = lambda_max_sym + l * (p.eps + 1.0 / p.eps);
    let mu = mu_nominal + p.eps1;
    let kappa = p.eps * p.r * l;
    let zeta = f64::from(p.zeta);
    let a = norm_i_plus_c;
    let b = p.eps2 * p.d * norm_c * (norm_a + l) + zeta * norm_c * norm_c;
    let m = min_combo(a, b, kappa)?;

    let b0 = p.d * norm_c * (norm_a + l) + zeta * norm_c * norm_c;
    let nominal_lhs = (((1.0 - kappa).sqrt() * a + b0).powi(2) + kappa).ln();
    let nominal_rhs = -mu_nominal * p.delta;

    // Without an interior minimizer one of a, b vanishes and the infimum is
    // the ξ-limit ρ1 = a², ρ2 = b².
    let (rho1, rho2) = match m.xi {
        Some(xi) => ((1.0 + xi) * a * a, (1.0 + 1.0 / xi) * b * b),
        None => (a * a, b * b),
    };
    let inputs = CertificateInputs {
        mu,
        rho1,
        rho2,
        kappa: Some(kappa),
        r: p.r,
    };
    let certificate = if rho1 < 1.0 {
        thm3_certificate(&inputs, Some(p.delta))?
    } else {
        // ρ1 ≥ 1 forces combo ≥ 1: report infeasible instead of a
        // precondition failure.
        let mut rep = thm3_report(&inputs, m.value, Some(p.delta));
        rep.diagnostics
            .push(format!("rho1 = {rho1} >= 1 at the minimizer"));
        rep
    };

    Ok(Example2Derivation {
        lambda_max_sym,
        norm_a,
        norm_c,
        norm_i_plus_c,
        mu_nominal,
        mu,
        kappa,
        a,
        b,
        xi: m.xi,
        rho1,
        rho2,
        combo_min: m.value,
        nominal_lhs,
        nominal_rhs,
        nominal_feasible: nominal_lhs < nominal_rhs,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn inp(mu: f64, rho1: f64, rho2: f64, kappa: Option<f64>, r: f64) -> CertificateInputs {
        CertificateInputs::new(mu, rho1, rho2, kappa, r)
    }

    #[test]
    fn thm1_examples() {
        let id = thm1_certificate(&inp(1.0, 1.0, 0.0, None, 0.0), Some(0.1)).unwrap();
        assert_eq!(id.rho, Some(1.0));
        assert_eq!(id.delta_star, Some(0.0));
        assert!(id.admissible.contains(1e-9));
        let two = thm1_certificate(&inp(1.0, 1.0, 1.0, None, 0.0), None).unwrap();
        assert_relative_eq!(two.delta_star.unwrap(), LN_2, epsilon = 1e-15);
    }

    #[test]
    fn thm1_preconditions_listed() {
        match thm1_certificate(&inp(-1.0, 0.5, -0.1, None, 0.0), None) {
            Err(Error::Precondition {
                theorem,
                violations,
            }) => {
                assert_eq!(theorem, "T1");
                assert_eq!(violations.len(), 3, "{violations:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thm2_examples() {
        let rep = thm2_certificate(&inp(1.0, 0.5, 0.5, Some(0.2), 0.0), None).unwrap();
        assert_relative_eq!(rep.combo.unwrap(), 1.1, epsilon = 1e-15);
        assert_relative_eq!(rep.rho.unwrap(), 1.1, epsilon = 1e-15);
        assert_relative_eq!(rep.delta_star.unwrap(), 1.1f64.ln(), epsilon = 1e-15);

        let k0 = inp(0.7, 0.0, 1.0, Some(0.0), 0.5);
        let rep = thm2_certificate(&k0, None).unwrap();
        assert_eq!(rep.rho.unwrap(), k0.rho1 + k0.rho2 * (k0.mu * k0.r).exp());

        assert!(matches!(
            thm2_certificate(&inp(1.0, 0.9, 0.0, Some(0.5), 0.0), None),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn thm3_examples() {
        let rep = thm3_certificate(&inp(1.0, 0.0, 0.0, Some(0.5), 0.0), Some(0.5)).unwrap();
        assert_relative_eq!(rep.delta_star.unwrap(), LN_2, epsilon = 1e-15);
        assert_eq!(rep.admissible_at_query, Some(true));
        assert!(rep.margin_at_query.unwrap() > 0.0);

        let edge = thm3_certificate(&inp(1.0, 0.5, 0.5, Some(0.0), 0.0), Some(0.1)).unwrap();
        assert_eq!(edge.admissible, AdmissibleSet::Empty);
        assert_eq!(edge.delta_star, Some(0.0));
        assert_eq!(edge.admissible_at_query, Some(false));

        let all = thm3_certificate(&inp(1.0, 0.0, 0.0, Some(0.0), 0.0), Some(10.0)).unwrap();
        assert_eq!(all.admissible, AdmissibleSet::All);
    }

    #[test]
    fn thm4_examples() {
        assert_eq!(
            thm4_check(&inp(1.0, 0.5, 0.2, Some(0.4), 0.0))
                .unwrap()
                .admissible,
            AdmissibleSet::All
        );
        assert_eq!(
            thm4_check(&inp(1.0, 0.5, 0.5, Some(0.0), 0.0))
                .unwrap()
                .admissible,
            AdmissibleSet::Empty
        );
        assert_eq!(
            thm4_check(&inp(1.0, 0.0, 0.0, Some(0.999), 0.0))
                .unwrap()
                .admissible,
            AdmissibleSet::All
        );
        assert!(thm4_check(&inp(1.0, 0.5, 0.0, None, 0.0)).is_err());
    }

    #[test]
    fn example1_constants() {
        // Independent evaluation: ln(2e + 0.1875 e^{0.4}) / 0.4.
        let rho = 2.0 * E + 0.1875 * 0.4f64.exp();
        let rep = thm1_certificate(&inp(0.4, 2.0 * E, 3.0 / 16.0, None, 1.0), Some(2.1)).unwrap();
        assert_relative_eq!(rep.rho.unwrap(), 5.716280787725829, max_relative = 1e-12);
        assert_relative_eq!(rep.rho.unwrap(), rho, max_relative = 1e-15);
        assert_relative_eq!(
            rep.delta_star.unwrap(),
            4.358295954940514,
            max_relative = 1e-12
        );
        assert_eq!(rep.admissible_at_query, Some(false));
        assert!(rep.diagnostics.iter().any(|d| d.contains("2.06")));
        let other = thm1_certificate(&inp(0.4, 3.0, 3.0 / 16.0, None, 1.0), Some(2.1)).unwrap();
        assert!(other.diagnostics.iter().all(|d| !d.contains("2.06")));
    }

    #[test]
    fn baseline_comparison_examples() {
        let c = compare_with_baseline(&inp(1.0, 0.25, 0.0, Some(0.25), 0.0)).unwrap();
        assert_relative_eq!(c.ours, -(0.4375f64.ln()), epsilon = 1e-15);
        assert_relative_eq!(c.theirs.unwrap(), LN_2, epsilon = 1e-15);
        assert!(c.ours > c.theirs.unwrap());
        let eq = compare_with_baseline(&inp(1.0, 0.0, 0.0, Some(0.5), 0.0)).unwrap();
        assert_relative_eq!(eq.ours, eq.theirs.unwrap(), epsilon = 1e-15);
        let k0 = compare_with_baseline(&inp(2.0, 0.3, 0.0, Some(0.0), 0.0)).unwrap();
        assert_relative_eq!(k0.ours, -(0.3f64.ln()) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(k0.theirs.unwrap(), k0.ours, epsilon = 1e-15);
        let undefined = compare_with_baseline(&inp(1.0, 0.6, 0.0, Some(0.5), 0.0)).unwrap();
        assert!(undefined.theirs.is_none() && !undefined.diagnostics.is_empty());
    }

    #[test]
    fn min_combo_examples() {
        let m = min_combo(1.0, 1.0, 0.0).unwrap();
        assert_eq!((m.xi, m.value), (Some(1.0), 4.0));
        let m = min_combo(0.8, 0.0, 0.5).unwrap();
        assert!(m.xi.is_none());
        assert_relative_eq!(m.value, 0.82, epsilon = 1e-15);
        assert!(min_combo(1.0, 1.0, 1.0).is_err());
    }

    /// Geometric grid of 10⁵ points on `[1e-6, 1e6]`, then golden-section
    /// refinement between the neighbours of the best grid point.
    fn sweep_min(a: f64, b: f64, kappa: f64) -> f64 {
        let f = |xi: f64| (1.0 - kappa) * (1.0 + xi) * a * a + (1.0 + 1.0 / xi) * b * b + kappa;
        let n = 100_000;
        let node = |i: usize| 10f64.powf(-6.0 + 12.0 * i as f64 / (n - 1) as f64);
        let best = (0..n)
            .min_by(|&i, &j| f(node(i)).total_cmp(&f(node(j))))
            .unwrap();
        let (mut lo, mut hi) = (node(best.saturating_sub(1)), node((best + 1).min(n - 1)));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(m1) < f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f(0.5 * (lo + hi)).min(f(node(best)))
    }

    #[test]
    fn min_combo_matches_sweep() {
        let m = min_combo(0.8, 0.03, 0.0771).unwrap();
        assert_relative_eq!(m.value, sweep_min(0.8, 0.03, 0.0771), max_relative = 1e-9);
    }

    #[test]
    fn no_impulse_action_is_infeasible() {
        let a = Matrix::from_rows(&[vec![-1.0, 2.0], vec![0.5, -3.0]]).unwrap();
        let p = Example2Inputs {
            a,
            c: Matrix::zeros(2, 2),
            lipschitz: 1.0,
            r: 0.1,
            d: 0.05,
            eps: 1.0,
            eps1: 1e-3,
            eps2: 1.001,
            zeta: 0,
            delta: 0.01,
        };
        let d = example2_derive(&p).unwrap();
        assert_eq!((d.a, d.b), (1.0, 0.0));
        assert_relative_eq!(d.combo_min, 1.0, epsilon = 1e-15);
        assert_eq!(d.certificate.admissible, AdmissibleSet::Empty);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn min_combo_closed_form(a in 0.01f64..2.0, b in 0.001f64..1.0, kappa in 0.0f64..0.95) {
            // Restrict to minimizers inside the sweep range.
            let m = min_combo(a, b, kappa).unwrap();
            let xi = m.xi.unwrap();
            prop_assume!(xi > 2e-6 && xi < 5e5);
            let s = sweep_min(a, b, kappa);
            prop_assert!(((m.value - s) / s).abs() <= 1e-9, "closed {} sweep {}", m.value, s);
        }

        #[test]
        fn baseline_never_less_conservative(rho1 in 0.0f64..0.99, frac in 0.001f64..0.999, mu in 0.01f64..10.0) {
            let kappa = frac * (1.0 - rho1);
            let c = compare_with_baseline(&inp(mu, rho1, 0.0, Some(kappa), 0.0)).unwrap();
            prop_assert!(c.ours >= c.theirs.unwrap() * (1.0 - 1e-12));
        }

        #[test]
        fn thm1_monotone(mu in 0.01f64..5.0, rho1 in 1.0f64..10.0, rho2 in 0.0f64..5.0, r in 0.0f64..3.0, bump in 0.0f64..1.0) {
            let base = thm1_certificate(&inp(mu, rho1, rho2, None, r), None).unwrap().delta_star.unwrap();
            for bigger in [inp(mu, rho1 + bump, rho2, None, r), inp(mu, rho1, rho2 + bump, None, r), inp(mu, rho1, rho2, None, r + bump)] {
                prop_assert!(thm1_certificate(&bigger, None).unwrap().delta_star.unwrap() >= base);
            }
            let no_delay_term = thm1_certificate(&inp(mu, rho1, 0.0, None, r), None).unwrap().delta_star.unwrap();
            let faster = thm1_certificate(&inp(mu + bump, rho1, 0.0, None, r), None).unwrap().delta_star.unwrap();
            prop_assert!(faster <= no_delay_term);
        }

        #[test]
        fn admissible_set_matches_margin(mu in 0.01f64..5.0, rho1 in 0.0f64..0.99, rho2 in 0.0f64..0.5, kappa in 0.0f64..0.9, delta in 1e-4f64..3.0) {
            let rep = thm3_certificate(&inp(mu, rho1, rho2, Some(kappa), 0.1), Some(delta)).unwrap();
            if let (Some(m), Some(ok)) = (rep.margin_at_query, rep.admissible_at_query) {
                prop_assert_eq!(m > 0.0, ok);
            }
            let t4 = thm4_check(&inp(mu, rho1, rho2, Some(kappa), 0.1)).unwrap();
            prop_assert_eq!(t4.admissible == AdmissibleSet::All, rep.admissible != AdmissibleSet::Empty);
        }
    }
}
