//! Operator data of Wigner-von Neumann type.
//!
//! The data is a list of terms `c_j exp(-i phi_j x) gamma_j(x)` where the
//! envelope `gamma_j` is a slowly varying profile, optionally carrying a phase
//! `exp(i xi_j(x))`. Power-law envelopes are clamped to `x_min^{-delta}` on
//! `(0, x_min]`, which keeps them bounded and of bounded variation.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// Real phase function `xi(x)`; the envelope is multiplied by `exp(i xi(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Phase {
    #[default]
    None,
    /// Linear interpolation between samples, nearest endpoint outside.
    Table { x: Vec<f64>, xi: Vec<f64> },
    Linear { offset: f64, slope: f64 },
}

impl Phase {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Phase::None => 0.0,
            Phase::Linear { offset, slope } => offset + slope * x,
            Phase::Table { x: xs, xi } => interpolate(xs, xi, x),
        }
    }

    /// Total variation over the table (or over `[a, b]` for analytic phases).
    pub fn variation(&self, a: f64, b: f64) -> f64 {
        match self {
            Phase::None => 0.0,
            Phase::Linear { slope, .. } => slope.abs() * (b - a).abs(),
            Phase::Table { xi, .. } => xi.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
        }
    }
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => ys[0],
        n => {
            if x <= xs[0] {
                return ys[0];
            }
            if x >= xs[n - 1] {
                return ys[n - 1];
            }
            let hi = xs.partition_point(|&v| v <= x).min(n - 1);
            let lo = hi - 1;
            let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
            ys[lo] + w * (ys[hi] - ys[lo])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeShape {
    /// `x_min^{-delta}` on `(0, x_min]`, `x^{-delta}` beyond.
    PowerLaw {
        delta: f64,
        #[serde(default = "one")]
        x_min: f64,
    },
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// Real samples with linear interpolation, nearest endpoint outside.
    Sampled { x: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(flatten)]
    pub shape: EnvelopeShape,
    #[serde(default)]
    pub phase: Phase,
    /// Declared total variation `tau_j`. Filled from the closed form for
    /// power-law and constant envelopes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_variation: Option<f64>,
    /// Declared `int_0^inf |gamma|^p` keyed by `p`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub declared_lp: BTreeMap<u32, f64>,
}

impl Envelope {
    pub fn power_law(delta: f64, x_min: f64) -> Self {
        Self {
            shape: EnvelopeShape::PowerLaw { delta, x_min },
            phase: Phase::None,
            declared_variation: None,
            declared_lp: BTreeMap::new(),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            shape: EnvelopeShape::Constant { value },
            phase: Phase::None,
            declared_variation: None,
            declared_lp: BTreeMap::new(),
        }
    }

    pub fn sampled(x: Vec<f64>, values: Vec<f64>, variation: f64, lp: BTreeMap<u32, f64>) -> Self {
        Self {
            shape: EnvelopeShape::Sampled { x, values },
            phase: Phase::None,
            declared_variation: Some(variation),
            declared_lp: lp,
        }
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_declared_lp(mut self, p: u32, value: f64) -> Self {
        self.declared_lp.insert(p, value);
        self
    }

    /// Real profile without the phase factor.
    pub fn profile(&self, x: f64) -> f64 {
        match &self.shape {
            EnvelopeShape::PowerLaw { delta, x_min } => x.max(*x_min).powf(-delta),
            EnvelopeShape::Constant { value } => *value,
            EnvelopeShape::Sampled { x: xs, values } => interpolate(xs, values, x),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let g = self.profile(x);
        match self.phase {
            Phase::None => Complex64::new(g, 0.0),
            ref ph => Complex64::from_polar(g, ph.eval(x)),
        }
    }

    /// Declared variation, falling back to the closed form where one exists.
    pub fn variation(&self) -> Option<f64> {
        if let Some(v) = self.declared_variation {
            return Some(v);
        }
        match &self.shape {
            EnvelopeShape::PowerLaw { delta, x_min } => Some(x_min.powf(-delta)),
            EnvelopeShape::Constant { .. } => Some(0.0),
            EnvelopeShape::Sampled { .. } => None,
        }
    }

    pub fn lp(&self, p: u32) -> Result<f64> {
        envelope_lp(self, p)
    }
}

/// `int_0^inf |gamma(t)|^p dt`: closed form for the clamped power law, the
/// declared constant otherwise.
pub fn envelope_lp(envelope: &Envelope, p: u32) -> Result<f64> {
    match &envelope.shape {
        EnvelopeShape::PowerLaw { delta, x_min } => {
            let dp = delta * p as f64;
            if dp <= 1.0 {
                return Err(Error::Divergent { product: dp });
            }
            let head = x_min * x_min.powf(-dp);
            let tail = x_min.powf(1.0 - dp) / (dp - 1.0);
            Ok(head + tail)
        }
        _ => envelope.declared_lp.get(&p).copied().ok_or_else(|| {
            Error::Precondition(format!("no declared L^{p} constant for a non-power-law envelope"))
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WvnTerm {
    pub c: Complex64,
    pub phi: f64,
    pub envelope: Envelope,
}

impl WvnTerm {
    pub fn new(c: Complex64, phi: f64, envelope: Envelope) -> Self {
        Self { c, phi, envelope }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> Complex64 {
        self.c * Complex64::from_polar(1.0, -self.phi * x) * self.envelope.eval(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorData {
    pub p: u32,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_finite")]
    pub finite: bool,
    #[serde(default)]
    pub terms: Vec<WvnTerm>,
}

fn default_finite() -> bool {
    true
}

impl OperatorData {
    pub fn new(p: u32, terms: Vec<WvnTerm>) -> Self {
        Self {
            p,
            alpha: None,
            finite: true,
            terms,
        }
    }

    pub fn empty(p: u32) -> Self {
        Self::new(p, Vec::new())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn truncation(mut self) -> Self {
        self.finite = false;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.phi).collect()
    }

    pub fn max_abs_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.phi.abs()).fold(0.0, f64::max)
    }

    pub fn evaluate_phi(&self, x: f64) -> Result<Complex64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("phi(x) requires x > 0, got {x}")));
        }
        Ok(self.phi(x))
    }

    /// Unchecked evaluation used on the integration hot path (x >= x_start > 0).
    #[inline]
    pub(crate) fn phi(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Sum of `|c_j| |gamma_j(x)|`, the triangle-inequality bound on `|phi(x)|`.
    pub fn modulus_bound(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.c.norm() * t.envelope.profile(x).abs())
            .sum()
    }

    /// `tau = sup_j Var(gamma_j)` over the declared or closed-form variations.
    pub fn tau(&self) -> Option<f64> {
        self.terms
            .iter()
            .map(|t| t.envelope.variation())
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }

    /// `sigma^p = sup_j int |gamma_j|^p`.
    pub fn sigma_p(&self) -> Option<f64> {
        self.terms
            .iter()
            .map(|t| envelope_lp(&t.envelope, self.p).ok())
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub notes: Vec<String>,
    pub tau: Option<f64>,
    pub sigma_p: Option<f64>,
    /// Partial sum of `|c_j|^alpha` over the listed terms of a truncation.
    pub alpha_partial_sum: Option<f64>,
    /// Partial sum of `|c_j|` over the listed terms.
    pub l1_partial_sum: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate(data: &OperatorData) -> ValidationReport {
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    let p = data.p;

    let p_ok = p >= 3 && p % 2 == 1;
    if !p_ok {
        violations.push(format!("p must be odd >= 3 (got {p})"));
    }
    if let Some(alpha) = data.alpha {
        if p_ok {
            let upper = 1.0 / (p as f64 - 2.0);
            if !(alpha > 0.0 && alpha < upper) {
                violations.push(format!(
                    "alpha must lie in (0, 1/(p-2)) = (0, {upper}) (got {alpha})"
                ));
            }
        } else if !(alpha > 0.0) {
            violations.push(format!("alpha must be positive (got {alpha})"));
        }
    }

    let mut has_power_law = false;
    for (j, term) in data.terms.iter().enumerate() {
        if !(term.c.re.is_finite() && term.c.im.is_finite()) {
            violations.push(format!("term {j}: amplitude is not finite"));
        }
        if !term.phi.is_finite() {
            violations.push(format!("term {j}: frequency is not finite"));
        }
        let env = &term.envelope;
        match &env.shape {
            EnvelopeShape::PowerLaw { delta, x_min } => {
                has_power_law = true;
                if !(*delta > 0.0) {
                    violations.push(format!("term {j}: power-law delta must be positive"));
                }
                if !(*x_min > 0.0) {
                    violations.push(format!("term {j}: x_min must be positive"));
                }
                if let Some(v) = env.declared_variation {
                    let needed = x_min.powf(-delta);
                    if v < needed {
                        violations.push(format!(
                            "term {j}: declared variation {v} is below x_min^-delta = {needed}"
                        ));
                    }
                }
                if let Err(e) = envelope_lp(env, p) {
                    violations.push(format!("term {j}: {e}"));
                }
            }
            EnvelopeShape::Constant { .. } => {
                if !env.declared_lp.contains_key(&p) {
                    violations.push(format!("term {j}: missing declared L^{p} constant"));
                }
            }
            EnvelopeShape::Sampled { x, values } => {
                if x.len() != values.len() || x.is_empty() {
                    violations.push(format!("term {j}: sample grid and values differ in length"));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    violations.push(format!("term {j}: sample grid must be strictly increasing"));
                }
                if env.declared_variation.is_none() {
                    violations.push(format!("term {j}: sampled envelope needs a declared variation"));
                }
                if !env.declared_lp.contains_key(&p) {
                    violations.push(format!("term {j}: missing declared L^{p} constant"));
                }
            }
        }
        if let Phase::Table { x, xi } = &env.phase {
            if x.len() != xi.len() || x.windows(2).any(|w| !(w[1] > w[0])) {
                violations.push(format!("term {j}: malformed phase table"));
            }
        }
    }
    if has_power_law {
        notes.push(
            "power-law envelopes are clamped to x_min^-delta on (0, x_min]; the profile near 0 is a modelling choice"
                .to_string(),
        );
    }

    let l1_partial_sum: f64 = data.terms.iter().map(|t| t.c.norm()).sum();
    let alpha_partial_sum = match (data.finite, data.alpha) {
        (false, Some(alpha)) => {
            let s: f64 = data.terms.iter().map(|t| t.c.norm().powf(alpha)).sum();
            notes.push(format!(
                "truncated datum: sum |c_j|^alpha over {} listed terms = {s}; this certifies the truncation only",
                data.terms.len()
            ));
            notes.push(
                "sum |c_j| is reported on the truncation; for alpha < 1 it is implied by the alpha condition for the full sum"
                    .to_string(),
            );
            Some(s)
        }
        _ => None,
    };

    ValidationReport {
        violations,
        notes,
        tau: data.tau(),
        sigma_p: data.sigma_p(),
        alpha_partial_sum,
        l1_partial_sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(c: f64, phi: f64, env: Envelope) -> OperatorData {
        OperatorData::new(3, vec![WvnTerm::new(Complex64::new(c, 0.0), phi, env)])
    }

    #[test]
    fn empty_data_evaluates_to_zero() {
        let d = OperatorData::empty(3);
        assert_eq!(d.evaluate_phi(1.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn constant_unit_term_is_one() {
        let d = single(1.0, 0.0, Envelope::constant(1.0).with_declared_lp(3, 1.0));
        for x in [0.1, 1.0, 7.5, 1e4] {
            assert_eq!(d.evaluate_phi(x).unwrap(), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn power_law_term_matches_direct_arithmetic() {
        let d = single(1.0, 2.0, Envelope::power_law(1.0 / 3.0, 1.0));
        let v = d.evaluate_phi(8.0).unwrap();
        // 8^{-1/3} = 1/2 exactly; e^{-16i} from cos/sin directly.
        let expected = Complex64::new(16f64.cos(), -16f64.sin()) * 0.5;
        assert!((v - expected).norm() < 1e-15, "{v} vs {expected}");
    }

    #[test]
    fn nonpositive_x_is_a_domain_error() {
        let d = OperatorData::empty(3);
        assert!(matches!(d.evaluate_phi(0.0), Err(Error::Domain(_))));
        assert!(matches!(d.evaluate_phi(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn phase_contributes_positive_exponent() {
        let env = Envelope::constant(1.0).with_phase(Phase::Linear {
            offset: 0.25,
            slope: 0.0,
        });
        let d = single(1.0, 0.0, env);
        let v = d.evaluate_phi(3.0).unwrap();
        assert!((v - Complex64::from_polar(1.0, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn table_phase_interpolates_and_clamps() {
        let ph = Phase::Table {
            x: vec![1.0, 2.0, 4.0],
            xi: vec![0.0, 1.0, 3.0],
        };
        assert_eq!(ph.eval(0.5), 0.0);
        assert_eq!(ph.eval(1.5), 0.5);
        assert_eq!(ph.eval(3.0), 2.0);
        assert_eq!(ph.eval(10.0), 3.0);
        assert_eq!(ph.variation(1.0, 4.0), 3.0);
    }

    #[test]
    fn sampled_envelope_clamps_to_endpoints() {
        let env = Envelope::sampled(vec![1.0, 3.0], vec![2.0, 1.0], 1.0, BTreeMap::from([(3, 4.0)]));
        assert_eq!(env.profile(0.1), 2.0);
        assert_eq!(env.profile(2.0), 1.5);
        assert_eq!(env.profile(9.0), 1.0);
        assert_eq!(envelope_lp(&env, 3).unwrap(), 4.0);
    }

    #[test]
    fn clamped_power_law_is_nonincreasing() {
        let env = Envelope::power_law(0.4, 2.0);
        assert_eq!(env.profile(0.5), env.profile(2.0));
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let x = 2.0 * 1.05f64.powi(k);
            let g = env.profile(x);
            assert!(g <= prev);
            prev = g;
        }
        assert_eq!(env.variation(), Some(2f64.powf(-0.4)));
    }

    #[test]
    fn lp_closed_form_matches_quadrature() {
        let env = Envelope::power_law(1.0 / 3.0, 1.0);
        let closed = envelope_lp(&env, 5).unwrap();
        assert!((closed - 2.5).abs() < 1e-14);

        // Independent check: head is a rectangle; tail via t = 1/u^3 maps
        // int_1^inf t^{-5/3} dt to int_0^1 3 u^2 u^5 / u^... evaluated with Simpson.
        // Substituting t = s^{-k} with k = 3 gives int_0^1 3 s^{-4} s^{5} ds = int_0^1 3 s ds.
        let n = 2000;
        let h = 1.0 / n as f64;
        let f = |s: f64| {
            if s == 0.0 {
                0.0
            } else {
                let t = s.powi(-3);
                t.powf(-5.0 / 3.0) * 3.0 * s.powi(-4)
            }
        };
        let mut acc = f(0.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        let tail = acc * h / 3.0;
        assert!((1.0 + tail - closed).abs() < 1e-10, "{tail}");
    }

    #[test]
    fn lp_pass_through_and_divergence() {
        let env = Envelope::constant(1.0).with_declared_lp(3, 0.75);
        assert_eq!(envelope_lp(&env, 3).unwrap(), 0.75);
        let env = Envelope::power_law(0.2, 1.0);
        assert!(matches!(envelope_lp(&env, 3), Err(Error::Divergent { .. })));
    }

    #[test]
    fn validate_rejects_even_p() {
        let rep = OperatorData::empty(4).validate();
        assert!(rep.violations.iter().any(|v| v.contains("p must be odd")));
    }

    #[test]
    fn validate_alpha_bounds() {
        assert!(OperatorData::empty(3).with_alpha(0.9).validate().is_valid());
        let rep = OperatorData::empty(3).with_alpha(1.5).validate();
        assert!(rep.violations.iter().any(|v| v.contains("alpha")));
    }

    #[test]
    fn validate_reports_alpha_partial_sum() {
        let terms = (1..=20)
            .map(|j| {
                WvnTerm::new(
                    Complex64::new(2f64.powi(-j), 0.0),
                    j as f64,
                    Envelope::power_law(0.5, 1.0),
                )
            })
            .collect();
        let data = OperatorData::new(5, terms).with_alpha(0.2).truncation();
        let rep = data.validate();
        assert!(rep.is_valid(), "{:?}", rep.violations);
        // Geometric series oracle: r (1 - r^20) / (1 - r), r = 2^{-0.2}.
        let r = 2f64.powf(-0.2);
        let oracle = r * (1.0 - r.powi(20)) / (1.0 - r);
        let s = rep.alpha_partial_sum.unwrap();
        assert!((s - oracle).abs() < 1e-12);
        assert!((s - 6.30477).abs() < 1e-4, "{s}");
    }

    #[test]
    fn validate_flags_missing_lp_constant() {
        let rep = single(1.0, 1.0, Envelope::constant(1.0)).validate();
        assert!(rep.violations.iter().any(|v| v.contains("missing declared")));
    }

    #[test]
    fn json_round_trip_uses_normative_field_names() {
        let text = r#"{
            "p": 5, "alpha": null, "finite": true,
            "terms": [{"c": [1.0, -0.5], "phi": 2.0,
                       "envelope": {"kind": "power_law", "delta": 0.3, "x_min": 1.0,
                                    "phase": {"kind": "none"}}}]
        }"#;
        let d = OperatorData::from_json(text).unwrap();
        assert_eq!(d.p, 5);
        assert_eq!(d.terms[0].c, Complex64::new(1.0, -0.5));
        let back = OperatorData::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn modulus_bounded_by_triangle_inequality(
                amps in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -5.0f64..5.0, 0.1f64..1.5), 0..6),
                x in 0.01f64..1e4,
            ) {
                let terms = amps.iter().map(|&(re, im, phi, delta)| {
                    WvnTerm::new(Complex64::new(re, im), phi, Envelope::power_law(delta, 1.0))
                }).collect();
                let d = OperatorData::new(3, terms);
                let v = d.evaluate_phi(x).unwrap();
                prop_assert!(v.norm() <= d.modulus_bound(x) * (1.0 + 1e-12) + 1e-300);
            }
        }
    }
}
