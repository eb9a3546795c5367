//! Explicit Runge-Kutta 8(5,3) with adaptive step control.
//!
//! Error norm and step-size controller follow Hairer-Wanner DOP853. Steps are
//! shortened to land exactly on each output sample, so no dense output is
//! needed.

use super::tableau::{A, B, C, E3, E5, N_STAGES};
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// State at each requested sample.
    pub samples: Vec<Vec<f64>>,
    pub accepted: usize,
    pub rejected: usize,
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn initial_step<F>(rhs: &mut F, x0: f64, y0: &[f64], f0: &[f64], ctl: &StepControl) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let scale: Vec<f64> = y0.iter().map(|y| ctl.atol + y.abs() * ctl.rtol).collect();
    let d0 = rms(&y0.iter().zip(&scale).map(|(y, s)| y / s).collect::<Vec<_>>());
    let d1 = rms(&f0.iter().zip(&scale).map(|(f, s)| f / s).collect::<Vec<_>>());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(x0 + h0, &y1, &mut f1);
    let d2 = rms(
        &f1.iter()
            .zip(f0)
            .zip(&scale)
            .map(|((a, b), s)| (a - b) / s)
            .collect::<Vec<_>>(),
    ) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(ctl.max_step)
}

/// Integrate `y' = rhs(x, y)` from `x0` and record the state at each point of
/// the increasing `grid` (points at or before `x0` get the initial state).
/// `on_step` sees every accepted step.
pub fn solve<F, S>(mut rhs: F, x0: f64, y0: &[f64], grid: &[f64], ctl: &StepControl, mut on_step: S) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut k = vec![vec![0.0; n]; N_STAGES + 1];
    let mut x = x0;
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut stage = vec![0.0; n];
    rhs(x, &y, &mut k[0]);

    let mut samples = Vec::with_capacity(grid.len());
    let mut gi = 0;
    while gi < grid.len() && grid[gi] <= x {
        samples.push(y.clone());
        gi += 1;
    }
    let mut h_abs = initial_step(&mut rhs, x, &y, &k[0].clone(), ctl);
    let (mut accepted, mut rejected) = (0usize, 0usize);

    while gi < grid.len() {
        let target = grid[gi];
        let min_step = ctl.min_step.max(10.0 * (next_up(x) - x));
        h_abs = h_abs.min(ctl.max_step);
        let mut step_rejected = false;
        loop {
            if h_abs < min_step {
                return Err(Error::StepUnderflow { x, h: h_abs });
            }
            let clamped = x + h_abs >= target;
            let h = if clamped { target - x } else { h_abs };

            for s in 1..N_STAGES {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    stage[i] = y[i] + h * acc;
                }
                let (_, rest) = k.split_at_mut(s);
                rhs(x + C[s] * h, &stage, &mut rest[0]);
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(N_STAGES) {
                    acc += B[j] * kj[i];
                }
                y_new[i] = y[i] + h * acc;
            }
            let x_new = if clamped { target } else { x + h };
            {
                let (_, last) = k.split_at_mut(N_STAGES);
                rhs(x_new, &y_new, &mut last[0]);
            }

            let (mut e5, mut e3) = (0.0, 0.0);
            for i in 0..n {
                let scale = ctl.atol + y[i].abs().max(y_new[i].abs()) * ctl.rtol;
                let (mut a5, mut a3) = (0.0, 0.0);
                for (s, ks) in k.iter().enumerate() {
                    a5 += E5[s] * ks[i];
                    a3 += E3[s] * ks[i];
                }
                e5 += (a5 / scale).powi(2);
                e3 += (a3 / scale).powi(2);
            }
            let err = if e5 == 0.0 && e3 == 0.0 {
                0.0
            } else {
                h.abs() * e5 / ((e5 + 0.01 * e3) * n as f64).sqrt()
            };

            if err < 1.0 {
                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT))
                };
                if step_rejected {
                    factor = factor.min(1.0);
                }
                h_abs = if clamped && !step_rejected {
                    (h * factor).max(h_abs)
                } else {
                    h * factor
                };
                x = x_new;
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, N_STAGES);
                accepted += 1;
                on_step(x, &y);
                break;
            }
            h_abs = h * MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
            step_rejected = true;
            rejected += 1;
        }
        while gi < grid.len() && grid[gi] <= x {
            samples.push(y.clone());
            gi += 1;
        }
    }
    Ok(Solution {
        samples,
        accepted,
        rejected,
    })
}

fn next_up(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        return x;
    }
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits + 1)
    } else {
        f64::from_bits(bits - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl() -> StepControl {
        StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.5,
            min_step: 1e-12,
        }
    }

    #[test]
    fn exponential_growth() {
        let grid = [0.0, 0.5, 1.0, 2.0];
        let sol = solve(|_, y, d| d[0] = y[0], 0.0, &[1.0], &grid, &ctl(), |_, _| {}).unwrap();
        for (x, s) in grid.iter().zip(&sol.samples) {
            assert!((s[0] - x.exp()).abs() < 1e-9 * x.exp(), "{x}: {}", s[0]);
        }
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 10.0).collect();
        let sol = solve(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &grid,
            &ctl(),
            |_, _| {},
        )
        .unwrap();
        for (x, s) in grid.iter().zip(&sol.samples) {
            assert!((s[0] - x.cos()).abs() < 1e-8, "{x}");
            assert!((s[1] + x.sin()).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn eighth_order_convergence() {
        // Fixed steps (huge tolerances, capped step): error ratio for h vs h/2
        // should be about 2^8.
        let run = |h: f64| {
            let c = StepControl {
                rtol: 1e3,
                atol: 1e3,
                max_step: h,
                min_step: 1e-12,
            };
            let sol = solve(|_, y, d| d[0] = y[0], 0.0, &[1.0], &[4.0], &c, |_, _| {}).unwrap();
            (sol.samples[0][0] - 4f64.exp()).abs()
        };
        let ratio = run(1.0) / run(0.5);
        assert!(ratio > 100.0, "{ratio}");
    }

    #[test]
    fn lands_on_samples_and_is_deterministic() {
        let grid = [0.3, 0.7, 1.1];
        let mut seen = Vec::new();
        let a = solve(|_, y, d| d[0] = -y[0], 0.0, &[1.0], &grid, &ctl(), |x, _| seen.push(x)).unwrap();
        for g in grid {
            assert!(seen.contains(&g));
        }
        let b = solve(|_, y, d| d[0] = -y[0], 0.0, &[1.0], &grid, &ctl(), |_, _| {}).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn underflow_reported() {
        let c = StepControl {
            rtol: 1e-12,
            atol: 1e-14,
            max_step: 1.0,
            min_step: 1e-3,
        };
        let r = solve(|x, _, d| d[0] = 1.0 / (1.0 - x).powi(2), 0.0, &[0.0], &[2.0], &c, |_, _| {});
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}
