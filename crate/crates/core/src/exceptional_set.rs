//! Exceptional energy sets `S_p` for finitely many frequencies.
//!
//! `S_p` holds `E = eta / 2` for every `eta = sum_{j<=m} phi_{k_j} - sum_{j<m} phi_{l_j}`
//! with `m <= (p-1)/2`. Witness indices are 0-based into the frequency list.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recursion::{enumerate_combinations, Witness, DEFAULT_COMBINATION_CAP};

pub const SET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpPoint {
    #[serde(rename = "E")]
    pub e: f64,
    pub eta: f64,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalSet {
    pub p: u32,
    pub phi: Vec<f64>,
    pub points: Vec<SpPoint>,
}

impl ExceptionalSet {
    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.e).collect()
    }

    /// Distance from `e` to the nearest point, infinite for an empty set.
    pub fn distance(&self, e: f64) -> f64 {
        self.points.iter().map(|p| (p.e - e).abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, e: f64, tol: f64) -> bool {
        is_exceptional(e, self, tol).is_some()
    }
}

fn check_p(p: u32) -> Result<()> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(Error::Precondition(format!("p must be odd >= 3, got {p}")));
    }
    Ok(())
}

pub fn build_sp(phi: &[f64], p: u32) -> Result<ExceptionalSet> {
    build_sp_with_cap(phi, p, DEFAULT_COMBINATION_CAP)
}

pub fn build_sp_with_cap(phi: &[f64], p: u32, cap: f64) -> Result<ExceptionalSet> {
    check_p(p)?;
    if phi.is_empty() {
        return Err(Error::Precondition("frequency set is empty".into()));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("frequencies must be finite".into()));
    }
    let m_max = ((p - 1) / 2) as usize;
    let points = enumerate_combinations(phi, m_max, cap)?
        .into_iter()
        .map(|pt| SpPoint {
            e: pt.eta / 2.0,
            eta: pt.eta,
            witness: pt.witness,
        })
        .collect();
    Ok(ExceptionalSet {
        p,
        phi: phi.to_vec(),
        points,
    })
}

/// Witness of the nearest point within `tol` of `e`.
pub fn is_exceptional(e: f64, set: &ExceptionalSet, tol: f64) -> Option<&Witness> {
    set.points
        .iter()
        .map(|p| ((p.e - e).abs(), p))
        .filter(|(d, _)| *d <= tol)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| &p.witness)
}

/// Points of `S_p` with no point of `S_{p-2}` within 1e-12.
pub fn sp_difference(phi: &[f64], p: u32) -> Result<Vec<SpPoint>> {
    check_p(p)?;
    if p < 5 {
        return Err(Error::Precondition(format!("set difference needs p >= 5, got {p}")));
    }
    let big = build_sp(phi, p)?;
    let small = build_sp(phi, p - 2)?;
    Ok(big
        .points
        .into_iter()
        .filter(|pt| !small.points.iter().any(|q| (q.eta - pt.eta).abs() <= SET_TOL))
        .collect())
}
