//! Operator data with an embedded eigenvalue at a point of `S_5 \ S_3`.
//!
//! Three terms `a e^{-i phi x}`, `b e^{-i psi x}`, `c e^{-i rho x}` with envelope
//! `x^{-delta}` and `psi < rho < phi`, `2 rho - phi - psi = 1`. At
//! `eta = phi + psi - rho` the second- and fourth-order conditions make the
//! non-oscillatory part of `theta'` vanish, and the resonant term
//! `Re(Lambda x^{-3 delta} e^{i(xi + 2 theta)})` drives `log r`. Locking
//! `xi + 2 theta` to a constant phase then gives power decay (or growth) of the
//! solution with rate `|Lambda|` when `delta = 1/3`.
//!
//! The phase `xi` is built by co-integrating a low-pass copy `theta_bar` of the
//! Pruefer angle, `theta_bar' = (k / x)(theta - theta_bar)`, and setting
//! `xi = Psi - 2 theta_bar` on the first term.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_data::{Envelope, OperatorData, Phase, WvnTerm};
use crate::prufer::diagnostics::linear_fit;
use crate::prufer::{
    dop853, integrate_direct, subordinacy_ratio, vector_from_prufer, BoundaryCondition, PruferTrajectory, SolveConfig,
};
use crate::recursion::RecursionEngine;

pub const POLE_GUARD: f64 = 1e-12;
pub const FOURTH_ORDER_TOL: f64 = 1e-10;
pub const DEFAULT_GAIN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Decay,
    Growth,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Decay => "decay",
            Branch::Growth => "growth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub phi: f64,
    pub psi: f64,
    pub rho: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub delta: f64,
    pub p: u32,
    pub eta: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub lambda: Complex64,
    /// Locked value of `xi + 2 theta` on the decaying branch, `pi - arg Lambda`.
    pub target_phase: f64,
}

impl ExampleSpec {
    pub fn frequencies(&self) -> [f64; 3] {
        [self.phi, self.psi, self.rho]
    }

    pub fn amplitudes(&self) -> [Complex64; 3] {
        [self.a, self.b, self.c]
    }

    /// `Psi` with `Re(Lambda e^{i Psi}) = -|Lambda|` (decay) or `+|Lambda|` (growth).
    pub fn branch_phase(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Decay => PI - self.lambda.arg(),
            Branch::Growth => -self.lambda.arg(),
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        let p = self.p as f64;
        if !(delta > 1.0 / p && delta <= 1.0 / (p - 2.0)) {
            return Err(Error::Precondition(format!(
                "delta must lie in (1/p, 1/(p-2)] = ({}, {}], got {delta}",
                1.0 / p,
                1.0 / (p - 2.0)
            )));
        }
        self.delta = delta;
        Ok(self)
    }

    /// The operator data without any phase.
    pub fn operator_data(&self) -> OperatorData {
        let env = Envelope::power_law(self.delta, 1.0);
        OperatorData::new(
            self.p,
            vec![
                WvnTerm::new(self.a, self.phi, env.clone()),
                WvnTerm::new(self.b, self.psi, env.clone()),
                WvnTerm::new(self.c, self.rho, env),
            ],
        )
    }
}

/// Amplitudes satisfying the second-order condition, with real phases 0.
pub fn solve_coefficients(phi: f64, psi: f64, rho: f64, a_mod: f64, b_mod: f64) -> Result<ExampleSpec> {
    if !(psi < rho && rho < phi) {
        return Err(Error::Constraint(format!(
            "need psi < rho < phi, got psi = {psi}, rho = {rho}, phi = {phi}"
        )));
    }
    let gap = 2.0 * rho - phi - psi;
    if (gap - 1.0).abs() > 1e-12 {
        return Err(Error::Constraint(format!("need 2 rho - phi - psi = 1, got {gap}")));
    }
    let c_sq = a_mod * a_mod / (psi - rho) + b_mod * b_mod / (phi - rho);
    if !(c_sq > 0.0) {
        return Err(Error::Infeasible(format!("|c|^2 = {c_sq} is not positive")));
    }
    let eta = phi + psi - rho;
    let mut spec = ExampleSpec {
        phi,
        psi,
        rho,
        a: Complex64::new(a_mod, 0.0),
        b: Complex64::new(b_mod, 0.0),
        c: Complex64::new(c_sq.sqrt(), 0.0),
        delta: 1.0 / 3.0,
        p: 5,
        eta,
        e: eta / 2.0,
        lambda: Complex64::default(),
        target_phase: 0.0,
    };
    let res = verify_conditions(&spec, eta)?;
    if res.fourth.abs() > FOURTH_ORDER_TOL * (1.0 + c_sq * c_sq) {
        return Err(Error::Constraint(format!("fourth-order residual {} too large", res.fourth)));
    }
    spec.lambda = compute_lambda(&spec)?;
    spec.target_phase = spec.branch_phase(Branch::Decay);
    Ok(spec)
}

/// The headline instance: `phi = sqrt 5`, `rho = sqrt 3`, `psi = 2 sqrt 3 - sqrt 5 - 1`.
pub fn reference_spec(a_mod: f64, b_mod: f64) -> Result<ExampleSpec> {
    let (s5, s3) = (5f64.sqrt(), 3f64.sqrt());
    solve_coefficients(s5, 2.0 * s3 - s5 - 1.0, s3, a_mod, b_mod)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionResiduals {
    pub second: f64,
    pub fourth: f64,
}

fn guard(d: f64) -> Result<f64> {
    if d.abs() < POLE_GUARD {
        return Err(Error::Pole(format!("denominator {d:e} below {POLE_GUARD:e}")));
    }
    Ok(d)
}

/// Second- and fourth-order conditions for three terms, as written for `M = 3`
/// (each unordered pair once).
pub fn verify_conditions(spec: &ExampleSpec, eta: f64) -> Result<ConditionResiduals> {
    let (a2, b2, c2) = (spec.a.norm_sqr(), spec.b.norm_sqr(), spec.c.norm_sqr());
    let dp = guard(spec.phi - eta)?;
    let ds = guard(spec.psi - eta)?;
    let dr = guard(spec.rho - eta)?;
    let second = a2 / dp + b2 / ds + c2 / dr;
    let fourth = a2 * a2 / dp.powi(3)
        + b2 * b2 / ds.powi(3)
        + c2 * c2 / dr.powi(3)
        + a2 * b2 / (dp * dp * ds * ds) * (spec.phi + spec.psi - 2.0 * eta)
        + a2 * c2 / (dp * dp * dr * dr) * (spec.phi + spec.rho - 2.0 * eta)
        + b2 * c2 / (ds * ds * dr * dr) * (spec.psi + spec.rho - 2.0 * eta);
    Ok(ConditionResiduals { second, fourth })
}

/// General `M`-term conditions: `sum |c_j|^2 / (phi_j - eta)` and
/// `sum_{j1, j2} |c_j1 c_j2|^2 (phi_j1 + phi_j2 - 2 eta) / ((phi_j1 - eta)^2 (phi_j2 - eta)^2)`.
pub fn general_conditions(c: &[Complex64], phi: &[f64], eta: f64) -> Result<ConditionResiduals> {
    let d: Vec<f64> = phi.iter().map(|p| guard(p - eta)).collect::<Result<_>>()?;
    let second = c.iter().zip(&d).map(|(c, d)| c.norm_sqr() / d).sum();
    let mut fourth = 0.0;
    for j1 in 0..c.len() {
        for j2 in 0..c.len() {
            fourth += c[j1].norm_sqr() * c[j2].norm_sqr() * (phi[j1] + phi[j2] - 2.0 * eta)
                / (d[j1] * d[j1] * d[j2] * d[j2]);
        }
    }
    Ok(ConditionResiduals { second, fourth })
}

/// `Lambda = C f_{3,1}(eta; [phi, psi]; [rho]) a b conj(c)` with `C = 2! 1! = 2`.
pub fn compute_lambda(spec: &ExampleSpec) -> Result<Complex64> {
    let [f, s, r] = spec.frequencies();
    if f == s || f == r || s == r {
        return Err(Error::Precondition("the multiplicity constant needs distinct frequencies".into()));
    }
    let engine = RecursionEngine::<f64>::new();
    let f31 = engine
        .f(spec.eta, &[f, s], &[r])
        .get()
        .ok_or_else(|| Error::Pole("f_{3,1} is singular at eta".into()))?;
    Ok(2.0 * f31 * spec.a * spec.b * spec.c.conj())
}

/// Closed form `2 a b conj(c) / ((phi - eta)(psi - eta))`.
pub fn lambda_closed_form(spec: &ExampleSpec) -> Complex64 {
    2.0 * spec.a * spec.b * spec.c.conj() / ((spec.phi - spec.eta) * (spec.psi - spec.eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaCoefficients {
    /// Coefficient of `x^{-2 delta}`.
    pub x_2delta: Complex64,
    /// Coefficient of `x^{-4 delta}` (p = 5 and above).
    pub x_4delta: Complex64,
}

/// `f_{4,0}(eta; [p1, p2]; [p1, p2]) = -(i/2)(p1 + p2 - 2 eta) / ((p1 - eta)^2 (p2 - eta)^2)`.
pub fn f40_closed_form(p1: f64, p2: f64, eta: f64) -> Complex64 {
    Complex64::new(0.0, -0.5 * (p1 + p2 - 2.0 * eta) / ((p1 - eta).powi(2) * (p2 - eta).powi(2)))
}

pub fn omega_coefficients(c: &[Complex64], phi: &[f64], eta: f64, p: u32) -> Result<OmegaCoefficients> {
    let d: Vec<f64> = phi.iter().map(|v| guard(v - eta)).collect::<Result<_>>()?;
    let s: f64 = c.iter().zip(&d).map(|(c, d)| c.norm_sqr() / d).sum();
    let mut x4 = Complex64::default();
    if p >= 5 {
        for j1 in 0..c.len() {
            for j2 in 0..c.len() {
                x4 += f40_closed_form(phi[j1], phi[j2], eta) * (c[j1] * c[j2]).norm_sqr();
            }
        }
    }
    Ok(OmegaCoefficients {
        x_2delta: Complex64::new(0.0, -s),
        x_4delta: x4,
    })
}

pub fn compute_omega(spec: &ExampleSpec, eta: f64) -> Result<OmegaCoefficients> {
    omega_coefficients(&spec.amplitudes(), &spec.frequencies(), eta, spec.p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayForm {
    Power,
    StretchedExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedDecay {
    #[serde(rename = "B")]
    pub b: f64,
    pub form: DecayForm,
    /// Exponent `1 - (p-2) delta` of the stretched form, 0 for a power law.
    pub exponent: f64,
    pub degenerate: bool,
}

/// `|u| ~ x^{-B}` when `delta = 1/(p-2)`, else
/// `exp(-B x^{1-(p-2)delta} / (1-(p-2)delta))`, with `B = |Lambda|`.
pub fn predicted_decay(spec: &ExampleSpec) -> PredictedDecay {
    let k = spec.p as f64 - 2.0;
    let power = (spec.delta - 1.0 / k).abs() <= 1e-15;
    let b = spec.lambda.norm();
    PredictedDecay {
        b,
        form: if power {
            DecayForm::Power
        } else {
            DecayForm::StretchedExponential
        },
        exponent: if power { 0.0 } else { 1.0 - k * spec.delta },
        degenerate: b == 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLock {
    /// The data with `xi` tabulated on the first term.
    pub data: OperatorData,
    /// Pruefer trajectory of the co-integrated solution.
    pub trajectory: PruferTrajectory,
    /// Total variation of `xi` over the integration window.
    pub xi_variation: f64,
    pub gain: f64,
    pub target_phase: f64,
}

/// Default gain of the phase filter: at least 20 and at least `4 |Lambda|`.
pub fn default_gain(spec: &ExampleSpec) -> f64 {
    DEFAULT_GAIN.max(4.0 * spec.lambda.norm())
}

/// Co-integrate `(theta, log r, theta_bar)` with `xi = Psi - 2 theta_bar` on the
/// first term and `theta_bar' = (gain / x)(theta - theta_bar)`.
pub fn build_xi(
    spec: &ExampleSpec,
    branch: Branch,
    bc: BoundaryCondition,
    cfg: &SolveConfig,
    gain: Option<f64>,
) -> Result<PhaseLock> {
    cfg.check()?;
    let psi_target = spec.branch_phase(branch);
    let gain = gain.unwrap_or_else(|| default_gain(spec));
    let base = spec.operator_data();
    let eta = spec.eta;
    let delta = spec.delta;
    let freqs = spec.frequencies();
    let amps = spec.amplitudes();
    let x_min = 1.0;
    let phi_at = |x: f64, xi: f64| -> Complex64 {
        let g = x.max(x_min).powf(-delta);
        let mut s = amps[0] * Complex64::from_polar(g, xi - freqs[0] * x);
        s += amps[1] * Complex64::from_polar(g, -freqs[1] * x);
        s += amps[2] * Complex64::from_polar(g, -freqs[2] * x);
        s
    };
    let rhs = |x: f64, y: &[f64], d: &mut [f64]| {
        let xi = psi_target - 2.0 * y[2];
        let z = Complex64::from_polar(1.0, eta * x + 2.0 * y[0]) * phi_at(x, xi);
        d[0] = -z.im;
        d[1] = z.re;
        d[2] = gain / x * (y[0] - y[2]);
    };
    let grid = cfg.grid();
    let mut table_x = vec![cfg.x_start];
    let mut table_xi = vec![psi_target - 2.0 * bc.theta0];
    let y0 = [bc.theta0, 0.0, bc.theta0];
    let sol = dop853::solve(rhs, cfg.x_start, &y0, &grid, &cfg.step_control(&base, eta), |x, y| {
        table_x.push(x);
        table_xi.push(psi_target - 2.0 * y[2]);
    })?;
    let xi_variation = table_xi.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let mut data = base;
    data.terms[0].envelope = data.terms[0]
        .envelope
        .clone()
        .with_phase(Phase::Table { x: table_x, xi: table_xi });
    Ok(PhaseLock {
        data,
        trajectory: PruferTrajectory {
            x: grid,
            theta: sol.samples.iter().map(|s| s[0]).collect(),
            log_r: sol.samples.iter().map(|s| s[1]).collect(),
            log_r_start: 0.0,
            max_step_dtheta: None,
        },
        xi_variation,
        gain,
        target_phase: psi_target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Least-squares slope of `log r` against the regressor.
    pub slope: f64,
    pub r2: f64,
    pub samples: usize,
    pub x_from: f64,
}

/// Fit `log r` on the final decade, against `log x` for the power form and
/// against `x^{k}/k`, `k = 1 - (p-2) delta`, for the stretched form.
pub fn fit_rate(traj: &PruferTrajectory, form: DecayForm, exponent: f64) -> Result<RateFit> {
    let x_max = *traj
        .x
        .last()
        .ok_or_else(|| Error::Precondition("empty trajectory".into()))?;
    let x_from = x_max / 10.0;
    let (xs, ys): (Vec<f64>, Vec<f64>) = traj
        .x
        .iter()
        .zip(&traj.log_r)
        .filter(|(x, _)| **x >= x_from)
        .map(|(x, l)| {
            let reg = match form {
                DecayForm::Power => x.ln(),
                DecayForm::StretchedExponential => x.powf(exponent) / exponent,
            };
            (reg, *l)
        })
        .unzip();
    if xs.len() < 50 {
        return Err(Error::Precondition(format!(
            "the final decade holds {} samples, need at least 50",
            xs.len()
        )));
    }
    let (slope, _, r2) = linear_fit(&xs, &ys);
    Ok(RateFit {
        slope,
        r2,
        samples: xs.len(),
        x_from,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRun {
    pub branch: Branch,
    pub lock: PhaseLock,
    pub fit: RateFit,
    pub predicted_b: f64,
    /// `-slope` on the decay branch, `+slope` on the growth branch.
    pub fitted_b: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(rename = "predicted_B")]
    pub predicted_b: f64,
    #[serde(rename = "fitted_B")]
    pub fitted_b: f64,
    pub rel_err: f64,
}

impl ExampleRun {
    pub fn report(&self) -> FitReport {
        FitReport {
            predicted_b: self.predicted_b,
            fitted_b: self.fitted_b,
            rel_err: self.rel_err,
        }
    }
}

pub fn run_example(spec: &ExampleSpec, branch: Branch, bc: BoundaryCondition, cfg: &SolveConfig) -> Result<ExampleRun> {
    let lock = build_xi(spec, branch, bc, cfg, None)?;
    let pred = predicted_decay(spec);
    let fit = fit_rate(&lock.trajectory, pred.form, pred.exponent)?;
    let fitted_b = match branch {
        Branch::Decay => -fit.slope,
        Branch::Growth => fit.slope,
    };
    let rel_err = if pred.b > 0.0 {
        (fitted_b - pred.b).abs() / pred.b
    } else {
        fitted_b.abs()
    };
    Ok(ExampleRun {
        branch,
        lock,
        fit,
        predicted_b: pred.b,
        fitted_b,
        rel_err,
    })
}

/// Subordinacy ratio of the locked decaying solution against a second solution
/// of the same (tabulated-phase) data started at `theta0 - pi/2`.
pub fn decay_subordinacy(spec: &ExampleSpec, run: &ExampleRun, bc: BoundaryCondition, cfg: &SolveConfig) -> Result<Vec<f64>> {
    let decaying = vector_from_prufer(&run.lock.trajectory, spec.eta);
    let other_bc = BoundaryCondition::new(bc.theta0 - PI / 2.0);
    let other = integrate_direct(&run.lock.data, spec.eta, other_bc.initial_vector(spec.eta, cfg.x_start), cfg)?;
    subordinacy_ratio(&decaying, &other)
}
