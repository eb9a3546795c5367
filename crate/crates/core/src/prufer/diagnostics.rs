//! Growth diagnostics for integrated solutions.
//!
//! Verdicts are numerical evidence on a finite window, not proofs.

use serde::{Deserialize, Serialize};

use super::{same_grid, PruferTrajectory, VectorTrajectory};
use crate::error::{Error, Result};

pub const BOUNDED_WINDOW_DIFF: f64 = 0.5;
pub const BOUNDED_SLOPE: f64 = 0.05;
pub const POWER_SLOPE: f64 = 0.1;
pub const POWER_R2: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSup {
    pub x_lo: f64,
    pub x_hi: f64,
    pub sup_log_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    /// Regressor: `"log x"`, `"x"` or `"x^(1-d)"`.
    pub against: &'static str,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    /// `log r ~ +b log x`.
    PowerGrowth { b: f64 },
    /// `log r ~ -b log x`.
    PowerDecay { b: f64 },
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    pub windows: Vec<WindowSup>,
    /// `|sup_last - sup_previous|` over the last two dyadic windows.
    pub last_window_diff: f64,
    /// Fits use samples with `x >= fit_from`, the upper half of the log range.
    pub fit_from: f64,
    pub fits: Vec<Fit>,
    pub verdict: Verdict,
    pub note: &'static str,
}

impl BoundednessReport {
    pub fn log_fit(&self) -> &Fit {
        &self.fits[0]
    }
}

/// Ordinary least squares `y = slope * x + intercept`, with `R^2`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        1.0 - ss_res / syy
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, intercept, r2)
}

/// Dyadic window sups of `log r`, fits against `log x`, `x` and (when `d` is
/// given) `x^(1-d)`, and a verdict:
///
/// * bounded when the last two window sups differ by < 0.5 and the `log x`
///   slope is < 0.05;
/// * power growth when that slope is > 0.1 with `R^2 > 0.9`;
/// * power decay when it is < -0.1 with `R^2 > 0.9`;
/// * indeterminate otherwise.
pub fn boundedness_diagnostic(traj: &PruferTrajectory, d: Option<f64>) -> Result<BoundednessReport> {
    let (x0, x1) = match (traj.x.first(), traj.x.last()) {
        (Some(&a), Some(&b)) if a > 0.0 && b > a => (a, b),
        _ => return Err(Error::Precondition("trajectory needs an increasing positive grid".into())),
    };
    let mut windows = Vec::new();
    let mut lo = x0;
    while lo < x1 {
        let hi = 2.0 * lo;
        // A trailing partial window counts once it spans half a doubling.
        if hi > x1 && x1 < lo * std::f64::consts::SQRT_2 {
            break;
        }
        let sup = traj
            .x
            .iter()
            .zip(&traj.log_r)
            .filter(|(x, _)| **x >= lo && (**x < hi || (hi > x1 && **x <= x1)))
            .map(|(_, l)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        if sup.is_finite() {
            windows.push(WindowSup {
                x_lo: lo,
                x_hi: hi.min(x1),
                sup_log_r: sup,
            });
        }
        lo = hi;
    }
    if windows.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 dyadic windows, got {}",
            windows.len()
        )));
    }
    let n = windows.len();
    let last_window_diff = (windows[n - 1].sup_log_r - windows[n - 2].sup_log_r).abs();

    let fit_from = (x0 * x1).sqrt();
    let (xs, ys): (Vec<f64>, Vec<f64>) = traj
        .x
        .iter()
        .zip(&traj.log_r)
        .filter(|(x, _)| **x >= fit_from)
        .map(|(x, l)| (*x, *l))
        .unzip();
    let mut fits = Vec::new();
    let mut push = |against: &'static str, f: &dyn Fn(f64) -> f64| {
        let reg: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let (slope, intercept, r2) = linear_fit(&reg, &ys);
        fits.push(Fit {
            against,
            slope,
            intercept,
            r2,
        });
    };
    push("log x", &|x: f64| x.ln());
    push("x", &|x: f64| x);
    if let Some(d) = d {
        push("x^(1-d)", &|x: f64| x.powf(1.0 - d));
    }

    let log = fits[0];
    let verdict = if last_window_diff < BOUNDED_WINDOW_DIFF && log.slope < BOUNDED_SLOPE {
        Verdict::Bounded
    } else if log.slope > POWER_SLOPE && log.r2 > POWER_R2 {
        Verdict::PowerGrowth { b: log.slope }
    } else if log.slope < -POWER_SLOPE && log.r2 > POWER_R2 {
        Verdict::PowerDecay { b: -log.slope }
    } else {
        Verdict::Indeterminate
    };
    Ok(BoundednessReport {
        windows,
        last_window_diff,
        fit_from,
        fits,
        verdict,
        note: "numerical evidence on a finite window, not a proof",
    })
}

/// `int_{x_start}^x |U_a|^2 / int_{x_start}^x |U_b|^2` by cumulative trapezoid
/// quadrature on the common grid. The first entry is the ratio of integrands.
pub fn subordinacy_ratio(a: &VectorTrajectory, b: &VectorTrajectory) -> Result<Vec<f64>> {
    same_grid(&a.x, &b.x)?;
    let (na, nb) = (a.norm_sq(), b.norm_sq());
    let mut out = Vec::with_capacity(a.x.len());
    if a.x.is_empty() {
        return Ok(out);
    }
    out.push(na[0] / nb[0]);
    let (mut ia, mut ib) = (0.0, 0.0);
    for k in 1..a.x.len() {
        let h = a.x[k] - a.x[k - 1];
        ia += 0.5 * h * (na[k] + na[k - 1]);
        ib += 0.5 * h * (nb[k] + nb[k - 1]);
        out.push(ia / ib);
    }
    Ok(out)
}
