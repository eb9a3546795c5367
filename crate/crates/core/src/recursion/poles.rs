//! Energies where the recursion functions have nonremovable singularities.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_COMBINATION_CAP: f64 = 1e7;
pub const DEDUP_TOL: f64 = 1e-12;

/// `eta = sum_{j<=m} Phi[k_j] - sum_{j<m} Phi[l_j]` with 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub m: usize,
    pub k: Vec<usize>,
    pub l: Vec<usize>,
}

impl Witness {
    pub fn eta(&self, phi: &[f64]) -> f64 {
        let plus: f64 = self.k.iter().map(|&i| phi[i]).sum();
        let minus: f64 = self.l.iter().map(|&i| phi[i]).sum();
        plus - minus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolePoint {
    pub eta: f64,
    pub witness: Witness,
}

/// All `eta` reachable with `1 <= m <= m_max`, sorted, deduplicated at 1e-12.
///
/// Each point keeps the first witness in enumeration order: smallest `m`,
/// then lexicographic on the sorted index tuples.
pub fn enumerate_combinations(phi: &[f64], m_max: usize, cap: f64) -> Result<Vec<PolePoint>> {
    if m_max == 0 || phi.is_empty() {
        return Ok(Vec::new());
    }
    let count = (phi.len() as f64).powi(2 * m_max as i32 - 1);
    if count > cap {
        return Err(Error::SizeCap { count, cap });
    }
    let n = phi.len();
    let mut candidates: Vec<(usize, PolePoint)> = Vec::new();
    for m in 1..=m_max {
        for k in (0..n).combinations_with_replacement(m) {
            for l in (0..n).combinations_with_replacement(m - 1) {
                let witness = Witness { m, k: k.clone(), l };
                let eta = witness.eta(phi);
                candidates.push((candidates.len(), PolePoint { eta, witness }));
            }
        }
    }
    candidates.sort_by(|a, b| a.1.eta.total_cmp(&b.1.eta).then(a.0.cmp(&b.0)));

    let mut out: Vec<PolePoint> = Vec::new();
    let mut best: Option<(usize, f64, PolePoint)> = None;
    for (ord, pt) in candidates {
        match &mut best {
            Some((b_ord, anchor, b_pt)) if pt.eta - *anchor <= DEDUP_TOL => {
                if ord < *b_ord {
                    *b_ord = ord;
                    *b_pt = pt;
                }
            }
            _ => {
                if let Some((_, _, p)) = best.take() {
                    out.push(p);
                }
                let anchor = pt.eta;
                best = Some((ord, anchor, pt));
            }
        }
    }
    if let Some((_, _, p)) = best {
        out.push(p);
    }
    Ok(out)
}

/// Candidate nonremovable singularities for a finite frequency set and odd `p`.
pub fn nonremovable_poles(phi: &[f64], p: u32) -> Result<Vec<PolePoint>> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(Error::Precondition(format!("p must be odd >= 3, got {p}")));
    }
    enumerate_combinations(phi, ((p - 1) / 2) as usize, DEFAULT_COMBINATION_CAP)
}
