//! The eigenequation `Lambda_phi U = E U` on the half line, with `eta = 2E`.
//!
//! Solutions are integrated either directly,
//! `u1' = -i(E u1 - phi u2)`, `u2' = i(E u2 - conj(phi) u1)`,
//! or in Pruefer variables,
//! `theta' = -Im(e^{i(eta x + 2 theta)} phi)`, `(log r)' = Re(e^{i(eta x + 2 theta)} phi)`,
//! where `U = r ((1+i) e^{-i(eta x/2 + theta)}, (1-i) e^{i(eta x/2 + theta)})`.

pub mod diagnostics;
pub mod dop853;
mod tableau;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_data::OperatorData;

pub use diagnostics::{boundedness_diagnostic, subordinacy_ratio, BoundednessReport, Verdict, WindowSup};
pub use dop853::StepControl;

pub const MIN_STEP: f64 = 1e-12;

/// Reduce an angle to `[lo, lo + period)`.
pub(crate) fn wrap(angle: f64, lo: f64, period: f64) -> f64 {
    if angle >= lo && angle < lo + period {
        return angle;
    }
    let v = (angle - lo).rem_euclid(period) + lo;
    if v >= lo + period {
        lo
    } else {
        v
    }
}

/// Left boundary condition as the Pruefer angle at `x_start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub theta0: f64,
}

impl BoundaryCondition {
    /// Normalises `theta0` into `[-pi, pi)`.
    pub fn new(theta0: f64) -> Self {
        Self {
            theta0: wrap(theta0, -PI, 2.0 * PI),
        }
    }

    /// Boundary parameter `omega = e^{iw}` maps to `theta0 = w - pi/4 (mod pi)`.
    /// The representative is taken in `[-pi/2, pi/2)`.
    pub fn from_omega_angle(w: f64) -> Self {
        Self {
            theta0: wrap(w - FRAC_PI_4, -FRAC_PI_2, PI),
        }
    }

    /// `w` in `[-pi/4, 3pi/4)` with `theta0 = w - pi/4 (mod pi)`.
    pub fn omega_angle(&self) -> f64 {
        wrap(self.theta0 + FRAC_PI_4, -FRAC_PI_4, PI)
    }

    /// `U(x)` for Pruefer data `r = 1`, `theta = theta0` at `x`.
    pub fn initial_vector(&self, eta: f64, x: f64) -> [Complex64; 2] {
        vector_at(eta, x, self.theta0, 0.0)
    }
}

pub(crate) fn vector_at(eta: f64, x: f64, theta: f64, log_r: f64) -> [Complex64; 2] {
    let r = log_r.exp();
    let phase = Complex64::from_polar(1.0, -(eta * x / 2.0 + theta));
    let u1 = Complex64::new(r, r) * phase;
    [u1, u1.conj()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub x_start: f64,
    pub x_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step cap as a fraction of the shortest oscillation period.
    pub max_step_fraction: f64,
    /// Number of log-spaced output samples.
    pub sample_count: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            x_start: 1.0,
            x_max: 1e3,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step_fraction: 0.1,
            sample_count: 400,
        }
    }
}

impl SolveConfig {
    pub fn with_range(mut self, x_start: f64, x_max: f64) -> Self {
        self.x_start = x_start;
        self.x_max = x_max;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.sample_count = n;
        self
    }

    pub fn check(&self) -> Result<()> {
        if !(self.x_start > 0.0 && self.x_start < self.x_max && self.x_max.is_finite()) {
            return Err(Error::Precondition(format!(
                "need 0 < x_start < x_max, got {} and {}",
                self.x_start, self.x_max
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step_fraction > 0.0) {
            return Err(Error::Precondition("tolerances and step fraction must be positive".into()));
        }
        if self.sample_count < 2 {
            return Err(Error::Precondition("need at least two samples".into()));
        }
        Ok(())
    }

    /// `max_step_fraction * 2 pi / (max_j |phi_j| + |eta| + 1)`.
    pub fn max_step(&self, data: &OperatorData, eta: f64) -> f64 {
        self.max_step_fraction * 2.0 * PI / (data.max_abs_frequency() + eta.abs() + 1.0)
    }

    pub fn step_control(&self, data: &OperatorData, eta: f64) -> StepControl {
        StepControl {
            rtol: self.rel_tol,
            atol: self.abs_tol,
            max_step: self.max_step(data, eta),
            min_step: MIN_STEP,
        }
    }

    /// Log-spaced grid with exact endpoints.
    pub fn grid(&self) -> Vec<f64> {
        log_grid(self.x_start, self.x_max, self.sample_count)
    }
}

pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect();
    g[0] = a;
    g[n - 1] = b;
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruferTrajectory {
    pub x: Vec<f64>,
    /// Continuous (unwrapped) angle.
    pub theta: Vec<f64>,
    /// `log r(x) - log r(x_start)`.
    pub log_r: Vec<f64>,
    /// `log r(x_start)`, so that `r = exp(log_r_start + log_r)`.
    pub log_r_start: f64,
    /// Largest change of theta over one internal step, when known.
    pub max_step_dtheta: Option<f64>,
}

impl PruferTrajectory {
    pub fn r(&self) -> Vec<f64> {
        self.log_r.iter().map(|l| (l + self.log_r_start).exp()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,theta,log_r")?;
        for i in 0..self.x.len() {
            writeln!(w, "{},{},{}", self.x[i], self.theta[i], self.log_r[i])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorTrajectory {
    pub x: Vec<f64>,
    pub u1: Vec<Complex64>,
    pub u2: Vec<Complex64>,
    /// Continuous argument of `u1`, tracked on every internal step.
    pub arg_u1: Option<Vec<f64>>,
}

impl VectorTrajectory {
    pub fn norm_sq(&self) -> Vec<f64> {
        self.u1
            .iter()
            .zip(&self.u2)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }
}

fn unwrap_step(prev: f64, raw: f64) -> f64 {
    prev + wrap(raw - prev, -PI, 2.0 * PI)
}

/// Integrate in Pruefer variables with `theta(x_start) = theta0`, `log r(x_start) = 0`.
pub fn integrate_prufer(data: &OperatorData, eta: f64, bc: BoundaryCondition, cfg: &SolveConfig) -> Result<PruferTrajectory> {
    cfg.check()?;
    let grid = cfg.grid();
    let rhs = |x: f64, y: &[f64], d: &mut [f64]| {
        let z = Complex64::from_polar(1.0, eta * x + 2.0 * y[0]) * data.phi(x);
        d[0] = -z.im;
        d[1] = z.re;
    };
    let mut last_theta = bc.theta0;
    let mut max_dtheta: f64 = 0.0;
    let sol = dop853::solve(rhs, cfg.x_start, &[bc.theta0, 0.0], &grid, &cfg.step_control(data, eta), |_, y| {
        max_dtheta = max_dtheta.max((y[0] - last_theta).abs());
        last_theta = y[0];
    })?;
    Ok(PruferTrajectory {
        x: grid,
        theta: sol.samples.iter().map(|s| s[0]).collect(),
        log_r: sol.samples.iter().map(|s| s[1]).collect(),
        log_r_start: 0.0,
        max_step_dtheta: Some(max_dtheta),
    })
}

/// Integrate the eigenequation directly from `U(x_start) = u0`.
pub fn integrate_direct(data: &OperatorData, eta: f64, u0: [Complex64; 2], cfg: &SolveConfig) -> Result<VectorTrajectory> {
    cfg.check()?;
    if u0[0].norm_sqr() + u0[1].norm_sqr() == 0.0 {
        return Err(Error::Precondition("initial vector must be nonzero".into()));
    }
    let grid = cfg.grid();
    let e = eta / 2.0;
    let rhs = |x: f64, y: &[f64], d: &mut [f64]| {
        let p = data.phi(x);
        let u1 = Complex64::new(y[0], y[1]);
        let u2 = Complex64::new(y[2], y[3]);
        let i = Complex64::i();
        let d1 = -i * (u1 * e - p * u2);
        let d2 = i * (u2 * e - p.conj() * u1);
        d[0] = d1.re;
        d[1] = d1.im;
        d[2] = d2.re;
        d[3] = d2.im;
    };
    let y0 = [u0[0].re, u0[0].im, u0[1].re, u0[1].im];
    let mut arg = u0[0].arg();
    let mut args = Vec::with_capacity(grid.len());
    let mut gi = 0;
    while gi < grid.len() && grid[gi] <= cfg.x_start {
        args.push(arg);
        gi += 1;
    }
    let sol = dop853::solve(rhs, cfg.x_start, &y0, &grid, &cfg.step_control(data, eta), |x, y| {
        arg = unwrap_step(arg, y[1].atan2(y[0]));
        while gi < grid.len() && grid[gi] <= x {
            args.push(arg);
            gi += 1;
        }
    })?;
    Ok(VectorTrajectory {
        x: grid,
        u1: sol.samples.iter().map(|s| Complex64::new(s[0], s[1])).collect(),
        u2: sol.samples.iter().map(|s| Complex64::new(s[2], s[3])).collect(),
        arg_u1: Some(args),
    })
}

/// Pruefer variables of a solution: `r = |u1| / sqrt 2`,
/// `theta = pi/4 - arg u1 - eta x / 2`, unwrapped.
pub fn prufer_from_vector(traj: &VectorTrajectory, eta: f64) -> Result<PruferTrajectory> {
    if traj.u1.iter().any(|u| u.norm() < 1e-300) {
        return Err(Error::Degenerate("u1 vanishes on the grid".into()));
    }
    let args: Vec<f64> = match &traj.arg_u1 {
        Some(a) if a.len() == traj.x.len() => a.clone(),
        _ => {
            let mut out = Vec::with_capacity(traj.u1.len());
            for u in &traj.u1 {
                let raw = u.arg();
                let next = out.last().map_or(raw, |&prev| unwrap_step(prev, raw));
                out.push(next);
            }
            out
        }
    };
    let log_r_abs: Vec<f64> = traj.u1.iter().map(|u| (u.norm() / SQRT_2).ln()).collect();
    let base = log_r_abs.first().copied().unwrap_or(0.0);
    Ok(PruferTrajectory {
        x: traj.x.clone(),
        theta: traj
            .x
            .iter()
            .zip(&args)
            .map(|(x, a)| FRAC_PI_4 - a - eta * x / 2.0)
            .collect(),
        log_r: log_r_abs.iter().map(|l| l - base).collect(),
        log_r_start: base,
        max_step_dtheta: None,
    })
}

/// Rebuild `U` from Pruefer samples.
pub fn vector_from_prufer(traj: &PruferTrajectory, eta: f64) -> VectorTrajectory {
    let (mut u1, mut u2) = (Vec::new(), Vec::new());
    for i in 0..traj.x.len() {
        let [a, b] = vector_at(eta, traj.x[i], traj.theta[i], traj.log_r[i] + traj.log_r_start);
        u1.push(a);
        u2.push(b);
    }
    VectorTrajectory {
        x: traj.x.clone(),
        u1,
        u2,
        arg_u1: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WronskianReport {
    pub w: Vec<Complex64>,
    /// `max_x |W(x) - W(x_start)| / |W(x_start)|`.
    pub max_rel_drift: f64,
}

pub(crate) fn same_grid(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.to_bits() != y.to_bits()) {
        return Err(Error::Precondition("trajectories must share a grid".into()));
    }
    Ok(())
}

/// `W(x) = i (u1_a u2_b - u2_a u1_b)`.
pub fn wronskian(a: &VectorTrajectory, b: &VectorTrajectory) -> Result<WronskianReport> {
    same_grid(&a.x, &b.x)?;
    let i = Complex64::i();
    let w: Vec<Complex64> = (0..a.x.len())
        .map(|k| i * (a.u1[k] * b.u2[k] - a.u2[k] * b.u1[k]))
        .collect();
    let w0 = w.first().copied().unwrap_or_default();
    let max_rel_drift = if w0.norm() == 0.0 {
        w.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else {
        w.iter().map(|v| (v - w0).norm() / w0.norm()).fold(0.0, f64::max)
    };
    Ok(WronskianReport { w, max_rel_drift })
}

/// `4 r_a r_b sin(theta_a - theta_b)`, the Wronskian in Pruefer form.
pub fn prufer_wronskian(a: &PruferTrajectory, b: &PruferTrajectory) -> Result<Vec<f64>> {
    same_grid(&a.x, &b.x)?;
    let (ra, rb) = (a.r(), b.r());
    Ok((0..a.x.len())
        .map(|k| 4.0 * ra[k] * rb[k] * (a.theta[k] - b.theta[k]).sin())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_data::{Envelope, WvnTerm};

    fn cfg(x_max: f64) -> SolveConfig {
        SolveConfig::default().with_range(1.0, x_max).with_samples(200)
    }

    fn generic_data() -> OperatorData {
        OperatorData::new(
            3,
            vec![
                WvnTerm::new(Complex64::new(0.7, -0.2), 1.3, Envelope::power_law(0.6, 1.0)),
                WvnTerm::new(Complex64::new(-0.4, 0.5), -2.1, Envelope::power_law(0.6, 1.0)),
            ],
        )
    }

    #[test]
    fn boundary_condition_maps() {
        let bc = BoundaryCondition::new(7.0);
        assert!(bc.theta0 >= -PI && bc.theta0 < PI);
        assert!((bc.theta0 - (7.0 - 2.0 * PI)).abs() < 1e-15);
        let bc = BoundaryCondition::from_omega_angle(1.0);
        assert!((bc.theta0 - (1.0 - FRAC_PI_4)).abs() < 1e-15);
        assert!((bc.omega_angle() - 1.0).abs() < 1e-15);
        // Re((1+i) e^{i(w - theta0)}) = 0 characterises the map.
        for w in [-2.0, 0.3, 2.9] {
            let bc = BoundaryCondition::from_omega_angle(w);
            let z = Complex64::new(1.0, 1.0) * Complex64::from_polar(1.0, w - bc.theta0);
            assert!(z.re.abs() < 1e-14, "{w}: {z}");
        }
    }

    #[test]
    fn zero_data_keeps_prufer_constant() {
        let tr = integrate_prufer(&OperatorData::empty(3), 1.7, BoundaryCondition::new(0.3), &cfg(50.0)).unwrap();
        assert!(tr.theta.iter().all(|&t| t == 0.3));
        assert!(tr.log_r.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn resonant_constant_term_phase_line() {
        let data = OperatorData::new(
            3,
            vec![WvnTerm::new(Complex64::new(1.0, 0.0), 0.8, Envelope::constant(1.0))],
        );
        let tr = integrate_prufer(&data, 0.8, BoundaryCondition::new(0.0), &cfg(30.0)).unwrap();
        for (x, (t, l)) in tr.x.iter().zip(tr.theta.iter().zip(&tr.log_r)) {
            assert!(t.abs() < 1e-12);
            assert!((l - (x - 1.0)).abs() < 1e-8 * x, "{x}: {l}");
        }
    }

    #[test]
    fn free_direct_solution() {
        let tr = integrate_direct(
            &OperatorData::empty(3),
            2.0,
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            &cfg(40.0),
        )
        .unwrap();
        for (k, &x) in tr.x.iter().enumerate() {
            let want = Complex64::from_polar(1.0, -(x - 1.0));
            assert!((tr.u1[k] - want).norm() < 1e-8, "{x}");
            assert_eq!(tr.u2[k], Complex64::new(0.0, 0.0));
            assert!((tr.norm_sq()[k] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn round_trip_at_start() {
        let [u1, u2] = vector_at(2.0, 1.0, 0.2, 0.0);
        let v = VectorTrajectory {
            x: vec![1.0],
            u1: vec![u1],
            u2: vec![u2],
            arg_u1: None,
        };
        let p = prufer_from_vector(&v, 2.0).unwrap();
        let want = wrap(0.2, -PI, 2.0 * PI);
        assert!((wrap(p.theta[0], -PI, 2.0 * PI) - want).abs() < 1e-14);
        assert_eq!(p.log_r[0], 0.0);
        assert!(p.log_r_start.abs() < 1e-15);
    }

    #[test]
    fn norm_identity_and_cross_solver() {
        let data = generic_data();
        let eta = 0.37;
        let bc = BoundaryCondition::new(0.3);
        let c = cfg(300.0);
        let pr = integrate_prufer(&data, eta, bc, &c).unwrap();
        let dv = integrate_direct(&data, eta, bc.initial_vector(eta, 1.0), &c).unwrap();
        let pv = prufer_from_vector(&dv, eta).unwrap();
        let r = pv.r();
        for (k, n) in dv.norm_sq().iter().enumerate() {
            assert!((n - 4.0 * r[k] * r[k]).abs() < 1e-12 * n);
        }
        let sup = pr
            .log_r
            .iter()
            .zip(&pv.log_r)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-6, "{sup}");
        let th = pr
            .theta
            .iter()
            .zip(&pv.theta)
            .map(|(a, b)| wrap(a - b, -PI, 2.0 * PI).abs())
            .fold(0.0, f64::max);
        assert!(th < 1e-6, "{th}");
    }

    #[test]
    fn wronskian_examples() {
        let data = generic_data();
        let c = cfg(200.0);
        let a = integrate_direct(&data, 0.5, BoundaryCondition::new(0.1).initial_vector(0.5, 1.0), &c).unwrap();
        assert!(wronskian(&a, &a).unwrap().w.iter().all(|w| w.norm() == 0.0));

        let free = OperatorData::empty(3);
        let e1 = integrate_direct(&free, 0.5, [Complex64::new(1.0, 0.0), Complex64::default()], &c).unwrap();
        let e2 = integrate_direct(&free, 0.5, [Complex64::default(), Complex64::new(1.0, 0.0)], &c).unwrap();
        let w = wronskian(&e1, &e2).unwrap();
        assert!(w.max_rel_drift < 1e-9, "{}", w.max_rel_drift);

        let b = integrate_direct(&data, 0.5, BoundaryCondition::new(0.1 - FRAC_PI_2).initial_vector(0.5, 1.0), &c).unwrap();
        let rep = wronskian(&a, &b).unwrap();
        assert!(rep.max_rel_drift < 1e-8, "{}", rep.max_rel_drift);
        let pw = prufer_wronskian(&prufer_from_vector(&a, 0.5).unwrap(), &prufer_from_vector(&b, 0.5).unwrap()).unwrap();
        for (w, p) in rep.w.iter().zip(&pw) {
            assert!((w.re - p).abs() < 1e-8 * p.abs().max(1.0), "{w} vs {p}");
            assert!(w.im.abs() < 1e-8 * p.abs().max(1.0));
        }
    }

    #[test]
    fn vector_from_prufer_inverts() {
        let data = generic_data();
        let pr = integrate_prufer(&data, 0.9, BoundaryCondition::new(-1.0), &cfg(80.0)).unwrap();
        let back = prufer_from_vector(&vector_from_prufer(&pr, 0.9), 0.9).unwrap();
        for k in 0..pr.x.len() {
            assert!((pr.log_r[k] - back.log_r[k]).abs() < 1e-12);
            let d = wrap(pr.theta[k] - back.theta[k], -PI, 2.0 * PI);
            assert!(d.abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_bitwise() {
        let data = generic_data();
        let a = integrate_prufer(&data, 0.2, BoundaryCondition::new(0.4), &cfg(100.0)).unwrap();
        let b = integrate_prufer(&data, 0.2, BoundaryCondition::new(0.4), &cfg(100.0)).unwrap();
        assert_eq!(a, b);
        assert!(a.max_step_dtheta.unwrap() < FRAC_PI_2);
    }

    #[test]
    fn csv_header() {
        let tr = integrate_prufer(&OperatorData::empty(3), 1.0, BoundaryCondition::new(0.0), &cfg(4.0)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,theta,log_r\n1,0,0\n"));
    }
}
