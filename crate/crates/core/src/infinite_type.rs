//! Truncated small-divisor sums and related bookkeeping for infinite-type data.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_data::OperatorData;
use crate::recursion::RecursionEngine;

/// Cap on the number of ordered index tuples enumerated in one sum.
pub const TUPLE_CAP: f64 = 1e7;
/// Distance at which a grid energy is flagged as sitting on a single frequency.
pub const FREQUENCY_FLAG_TOL: f64 = 1e-9;
/// Without a certificate, the sum counts as settled when the `J/2 -> J`
/// increment is at most this fraction of the partial sum.
pub const SETTLED_FRACTION: f64 = 0.1;

/// Dominating envelope for `|c_j|`, `j` counted from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientBound {
    /// `|c_j| <= a ratio^j`, `0 < ratio < 1`.
    Geometric { a: f64, ratio: f64 },
    /// `|c_j| <= a j^{-q}`, `q > 1`.
    Power { a: f64, q: f64 },
}

impl CoefficientBound {
    /// Upper bound for `sum_{j > n} |c_j|`.
    pub fn tail(&self, n: usize) -> Result<f64> {
        match *self {
            CoefficientBound::Geometric { a, ratio } if ratio > 0.0 && ratio < 1.0 && a >= 0.0 => {
                Ok(a * ratio.powi(n as i32 + 1) / (1.0 - ratio))
            }
            CoefficientBound::Power { a, q } if q > 1.0 && a >= 0.0 && n >= 1 => {
                Ok(a * (n as f64).powf(1.0 - q) / (q - 1.0))
            }
            b => Err(Error::Precondition(format!("unusable coefficient bound {b:?} at n = {n}"))),
        }
    }
}

/// User-declared bounds that make a tail certificate possible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDeclaration {
    pub coefficients: CoefficientBound,
    /// Lower bound for every `|denominator|` met by tuples touching an omitted index.
    pub min_denominator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisorVerdict {
    ConvergentEvidence,
    DivergentEvidence,
    PoleHit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorSumReport {
    pub eta: f64,
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "J_trunc")]
    pub j_trunc: usize,
    pub partial: f64,
    /// Partial sum over the first `J_trunc / 2` terms.
    pub partial_half: f64,
    pub tail_certificate: Option<f64>,
    pub verdict: DivisorVerdict,
    pub pole_hits: usize,
    pub tuples: usize,
}

fn check_trunc(data: &OperatorData, j_trunc: usize) -> Result<()> {
    if j_trunc > data.terms.len() {
        return Err(Error::Precondition(format!(
            "J_trunc = {j_trunc} exceeds the {} listed terms",
            data.terms.len()
        )));
    }
    Ok(())
}

fn check_cap(j: usize, len: usize) -> Result<()> {
    let count = (j as f64).powi(len as i32);
    if count > TUPLE_CAP {
        return Err(Error::SizeCap { count, cap: TUPLE_CAP });
    }
    Ok(())
}

/// Visit every index tuple in `[0, j)^len` in lexicographic order.
fn for_each_tuple(j: usize, len: usize, mut visit: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    if j == 0 {
        return Ok(());
    }
    let mut idx = vec![0usize; len];
    loop {
        visit(&idx)?;
        let mut d = len;
        loop {
            if d == 0 {
                return Ok(());
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < j {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Upper bound on `|h_I|` when every denominator is at least `m` in modulus:
/// the recursion unfolds into `C_{P-1}` products of `I` reciprocals.
pub fn h_bound(i: usize, m: f64) -> f64 {
    let p = i.div_ceil(2);
    catalan_f64(p - 1) / m.powi(i as i32)
}

/// `sum |h_I(eta; phi_k; phi_l) prod c_k prod conj(c_l)|` over ordered index
/// tuples from the first `j_trunc` terms. `h` is memoized on ordered
/// sub-tuples, so shared prefixes and suffixes are computed once.
pub fn small_divisor_sum(
    data: &OperatorData,
    eta: f64,
    i: usize,
    j_trunc: usize,
    tail: Option<&TailDeclaration>,
) -> Result<DivisorSumReport> {
    if i.is_multiple_of(2) || i < 1 || i + 2 > data.p as usize {
        return Err(Error::Precondition(format!("I must be odd with 1 <= I <= p - 2, got I = {i}, p = {}", data.p)));
    }
    check_trunc(data, j_trunc)?;
    check_cap(j_trunc, i)?;
    let p = i.div_ceil(2);
    let phi: Vec<f64> = data.terms.iter().map(|t| t.phi).collect();
    let modc: Vec<f64> = data.terms.iter().map(|t| t.c.norm()).collect();
    let engine = RecursionEngine::<f64>::new();
    let half = j_trunc / 2;
    let (mut partial, mut partial_half) = (0.0, 0.0);
    let (mut pole_hits, mut tuples) = (0usize, 0usize);
    let mut pos = vec![0.0; p];
    let mut neg = vec![0.0; p - 1];
    for_each_tuple(j_trunc, i, |idx| {
        tuples += 1;
        for (s, &k) in idx[..p].iter().enumerate() {
            pos[s] = phi[k];
        }
        for (s, &l) in idx[p..].iter().enumerate() {
            neg[s] = phi[l];
        }
        match engine.eval_h(eta, &pos, &neg)?.get() {
            Some(h) => {
                let w = h.norm() * idx.iter().map(|&k| modc[k]).product::<f64>();
                partial += w;
                if idx.iter().all(|&k| k < half) {
                    partial_half += w;
                }
            }
            None => pole_hits += 1,
        }
        Ok(())
    })?;

    let tail_certificate = match tail {
        Some(decl) => {
            if !(decl.min_denominator > 0.0) {
                return Err(Error::Precondition("min_denominator must be positive".into()));
            }
            let s: f64 = modc[..j_trunc].iter().sum();
            let t = decl.coefficients.tail(j_trunc)?;
            Some(h_bound(i, decl.min_denominator) * ((s + t).powi(i as i32) - s.powi(i as i32)))
        }
        None => None,
    };
    let verdict = if pole_hits > 0 {
        DivisorVerdict::PoleHit
    } else if tail_certificate.is_some_and(f64::is_finite) || partial - partial_half <= SETTLED_FRACTION * partial {
        DivisorVerdict::ConvergentEvidence
    } else {
        DivisorVerdict::DivergentEvidence
    };
    Ok(DivisorSumReport {
        eta,
        i,
        j_trunc,
        partial,
        partial_half,
        tail_certificate,
        verdict,
        pole_hits,
        tuples,
    })
}

/// `E_{I,K} = 2 sum |g_{I,K}(eta; phi_k; phi_l) prod c_k prod conj(c_l)|` over
/// ordered tuples from the first `j_trunc` terms. Past the tuple cap, `K >= 2`
/// falls back to the bound `E_{I,K} <= sum_i E_{i,1} E_{I-i,K-1}`.
pub fn e_ik(data: &OperatorData, eta: f64, i: usize, k: usize, j_trunc: usize) -> Result<f64> {
    if k > i || i + 2 > data.p as usize || i == 0 {
        return Err(Error::Precondition(format!("need K <= I <= p - 2, got I = {i}, K = {k}, p = {}", data.p)));
    }
    if k == 0 || (i - k) % 2 == 1 {
        return Ok(0.0);
    }
    check_trunc(data, j_trunc)?;
    let engine = RecursionEngine::<f64>::new();
    e_ik_inner(data, &engine, eta, i, k, j_trunc)
}

fn e_ik_inner(data: &OperatorData, engine: &RecursionEngine, eta: f64, i: usize, k: usize, j: usize) -> Result<f64> {
    if (j as f64).powi(i as i32) <= TUPLE_CAP {
        return e_ik_direct(data, engine, eta, i, k, j);
    }
    if k < 2 {
        return Err(Error::SizeCap {
            count: (j as f64).powi(i as i32),
            cap: TUPLE_CAP,
        });
    }
    e_ik_reduced(data, engine, eta, i, k, j)
}

fn e_ik_reduced(data: &OperatorData, engine: &RecursionEngine, eta: f64, i: usize, k: usize, j: usize) -> Result<f64> {
    let mut total = 0.0;
    for a in (1..i).step_by(2) {
        let b = i - a;
        if b < k - 1 || (b - (k - 1)) % 2 == 1 {
            continue;
        }
        let left = e_ik_inner(data, engine, eta, a, 1, j)?;
        let right = e_ik_inner(data, engine, eta, b, k - 1, j)?;
        total += left * right;
    }
    Ok(total)
}

fn e_ik_direct(data: &OperatorData, engine: &RecursionEngine, eta: f64, i: usize, k: usize, j: usize) -> Result<f64> {
    let p = (i + k) / 2;
    let phi: Vec<f64> = data.terms.iter().map(|t| t.phi).collect();
    let modc: Vec<f64> = data.terms.iter().map(|t| t.c.norm()).collect();
    let mut total = 0.0;
    for_each_tuple(j, i, |idx| {
        let pos: Vec<f64> = idx[..p].iter().map(|&s| phi[s]).collect();
        let neg: Vec<f64> = idx[p..].iter().map(|&s| phi[s]).collect();
        let g = engine
            .g(eta, &pos, &neg)
            .get()
            .ok_or_else(|| Error::Pole(format!("g_{{{i},{k}}} is singular at eta = {eta}")))?;
        total += g.norm() * idx.iter().map(|&s| modc[s]).product::<f64>();
        Ok(())
    })?;
    Ok(2.0 * total)
}

/// `C_n = binom(2n, n) / (n + 1)`.
pub fn catalan(n: usize) -> BigUint {
    let mut c = BigUint::from(1u32);
    for k in 0..n {
        // C_{k+1} = C_k 2(2k+1)/(k+2), exact at every step.
        c = c * BigUint::from(2 * (2 * k + 1)) / BigUint::from(k + 2);
    }
    c
}

/// `C_0..=C_n` from `C_n = sum_j C_j C_{n-1-j}`.
pub fn catalan_table(n: usize) -> Vec<BigUint> {
    let mut t: Vec<BigUint> = vec![BigUint::from(1u32)];
    for m in 1..=n {
        let next = (0..m).map(|j| &t[j] * &t[m - 1 - j]).sum();
        t.push(next);
    }
    t
}

fn catalan_f64(n: usize) -> f64 {
    catalan(n).to_string().parse().unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionBound {
    pub p: u32,
    pub alpha: f64,
    pub bound: f64,
    /// False once the bound reaches 1.
    pub informative: bool,
}

/// `(p - 2) alpha`, computed on the shortest decimal form of `alpha` so that
/// `hausdorff_bound(5, 0.2)` is exactly `0.6`.
pub fn hausdorff_bound(p: u32, alpha: f64) -> Result<DimensionBound> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(Error::Domain(format!("p must be odd >= 3, got {p}")));
    }
    let limit = 1.0 / (p as f64 - 2.0);
    if !(alpha > 0.0 && alpha <= limit) {
        return Err(Error::Domain(format!("alpha must lie in (0, {limit}], got {alpha}")));
    }
    let bound = if alpha == limit {
        1.0
    } else {
        decimal_scale(alpha, p as u64 - 2).min(1.0)
    };
    Ok(DimensionBound {
        p,
        alpha,
        bound,
        informative: bound < 1.0,
    })
}

fn decimal_scale(x: f64, factor: u64) -> f64 {
    let text = format!("{x:e}");
    let (mantissa, exp) = text.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: u128 = format!("{int}{frac}").parse().expect("decimal digits");
    let scaled = digits * factor as u128;
    format!("{scaled}e{}", exp - frac.len() as i32).parse().expect("float")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub eta: f64,
    pub max_partial: f64,
    pub pole_hits: usize,
    /// Within `1e-9` of a single frequency, where `h_1` is singular.
    pub near_frequency: bool,
    pub reports: Vec<DivisorSumReport>,
}

/// Small-divisor sums for every odd `I <= p - 2` at each grid point.
pub fn exceptional_profile(
    data: &OperatorData,
    p: u32,
    eta_grid: &[f64],
    j_trunc: usize,
    tail: Option<&TailDeclaration>,
) -> Result<Vec<ProfileEntry>> {
    if eta_grid.iter().any(|e| !e.is_finite()) {
        return Err(Error::Precondition("eta grid must be finite".into()));
    }
    let mut scoped = data.clone();
    scoped.p = p;
    eta_grid
        .par_iter()
        .map(|&eta| {
            let reports = (1..=(p as usize).saturating_sub(2))
                .step_by(2)
                .map(|i| small_divisor_sum(&scoped, eta, i, j_trunc, tail))
                .collect::<Result<Vec<_>>>()?;
            Ok(ProfileEntry {
                eta,
                max_partial: reports.iter().map(|r| r.partial).fold(0.0, f64::max),
                pole_hits: reports.iter().map(|r| r.pole_hits).sum(),
                near_frequency: data.terms[..j_trunc]
                    .iter()
                    .any(|t| (t.phi - eta).abs() < FREQUENCY_FLAG_TOL),
                reports,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_data::{Envelope, WvnTerm};
    use crate::recursion::dyck_profiles;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn data(p: u32, terms: &[(f64, f64)]) -> OperatorData {
        OperatorData::new(
            p,
            terms
                .iter()
                .map(|&(c, phi)| WvnTerm::new(Complex64::new(c, 0.0), phi, Envelope::power_law(0.4, 1.0)))
                .collect(),
        )
    }

    /// `c_j = 2^{-j}`, `phi_j = 1 + (j mod 3)`: every `m <= 2` combination is an
    /// integer, so a half-integer `eta` keeps all denominators at least 1/2 away.
    pub(crate) fn geometric(n: usize) -> OperatorData {
        let terms: Vec<(f64, f64)> = (1..=n).map(|j| (0.5f64.powi(j as i32), 1.0 + (j % 3) as f64)).collect();
        data(5, &terms)
    }

    #[test]
    fn first_order_sum() {
        let d = data(3, &[(1.0, 2.0)]);
        let r = small_divisor_sum(&d, 0.0, 1, 1, None).unwrap();
        assert_eq!(r.partial, 0.5);
        let d = data(3, &[(1.0, 2.0), (0.5, -1.0), (2.0, 3.5)]);
        let r = small_divisor_sum(&d, 0.3, 1, 3, None).unwrap();
        let oracle = 1.0 / 1.7 + 0.5 / 1.3 + 2.0 / 3.2;
        assert!((r.partial - oracle).abs() < 1e-15);
    }

    #[test]
    fn third_order_brute_force() {
        let (c, f) = ([0.7, 1.3], [2.0, 4.5]);
        let d = data(5, &[(c[0], f[0]), (c[1], f[1])]);
        let eta = 0.4;
        let mut oracle = 0.0;
        for k1 in 0..2 {
            for k2 in 0..2 {
                for l in 0..2 {
                    let h = 1.0 / ((f[k1] - eta) * (f[k2] - eta) * (f[k1] + f[k2] - f[l] - eta));
                    oracle += (h * c[k1] * c[k2] * c[l]).abs();
                }
            }
        }
        let r = small_divisor_sum(&d, eta, 3, 2, None).unwrap();
        assert_eq!(r.tuples, 8);
        assert!((r.partial - oracle).abs() < 1e-14 * oracle);
    }

    #[test]
    fn pole_hit_recorded() {
        let d = data(3, &[(1.0, 2.0), (1.0, 3.0)]);
        let r = small_divisor_sum(&d, 2.0, 1, 2, None).unwrap();
        assert_eq!(r.pole_hits, 1);
        assert_eq!(r.verdict, DivisorVerdict::PoleHit);
        assert_eq!(r.partial, 1.0);
    }

    #[test]
    fn bad_index_and_cap() {
        let d = geometric(4);
        assert!(small_divisor_sum(&d, 0.5, 2, 4, None).is_err());
        assert!(small_divisor_sum(&d, 0.5, 5, 4, None).is_err());
        assert!(small_divisor_sum(&d, 0.5, 1, 5, None).is_err());
        let mut big = geometric(40);
        big.p = 7;
        assert!(matches!(small_divisor_sum(&big, 0.5, 5, 40, None), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn tail_certificate_covers_true_tail() {
        let full = geometric(64);
        let decl = TailDeclaration {
            coefficients: CoefficientBound::Geometric { a: 1.0, ratio: 0.5 },
            min_denominator: 0.5,
        };
        for i in [1, 3] {
            let far = small_divisor_sum(&full, 0.5, i, 64, None).unwrap().partial;
            for j in [8, 16, 32] {
                let r = small_divisor_sum(&full, 0.5, i, j, Some(&decl)).unwrap();
                let cert = r.tail_certificate.unwrap();
                assert!(far - r.partial <= cert, "I={i} J={j}: {} > {cert}", far - r.partial);
                assert_eq!(r.verdict, DivisorVerdict::ConvergentEvidence);
            }
        }
    }

    #[test]
    fn constant_coefficients_look_divergent() {
        let terms: Vec<(f64, f64)> = (1..=40).map(|j| (1.0, 1.0 + (j % 3) as f64)).collect();
        let r = small_divisor_sum(&data(3, &terms), 0.5, 1, 40, None).unwrap();
        assert_eq!(r.verdict, DivisorVerdict::DivergentEvidence);
    }

    #[test]
    fn e_ik_values() {
        let d = data(3, &[(1.0, 2.0)]);
        assert!((e_ik(&d, 0.0, 1, 1, 1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(e_ik(&d, 0.0, 1, 0, 1).unwrap(), 0.0);
        assert!(e_ik(&d, 0.0, 3, 1, 1).is_err());
    }

    #[test]
    fn reduction_bounds_direct_value() {
        let mut d = geometric(6);
        d.p = 7;
        let engine = RecursionEngine::new();
        for (i, k) in [(3, 3), (4, 2), (5, 3), (5, 5)] {
            let direct = e_ik_direct(&d, &engine, 0.3, i, k, 6).unwrap();
            let bound = e_ik_reduced(&d, &engine, 0.3, i, k, 6).unwrap();
            assert!(bound >= direct * (1.0 - 1e-12), "({i},{k}): {bound} < {direct}");
        }
    }

    #[test]
    fn catalan_numbers() {
        let expect = [1u32, 1, 2, 5, 14, 42];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(catalan(n), BigUint::from(*e));
        }
        let table = catalan_table(20);
        for (n, v) in table.iter().enumerate() {
            assert_eq!(&catalan(n), v);
        }
        assert_eq!(catalan(35).to_string(), "3116285494907301262");
        for i in [2usize, 4, 6, 8] {
            let count = dyck_profiles(i).unwrap().len();
            assert_eq!(BigUint::from(count), catalan(i / 2 - 1), "I = {i}");
        }
    }

    #[test]
    fn dimension_bound() {
        assert_eq!(hausdorff_bound(5, 0.2).unwrap().bound, 0.6);
        assert_eq!(hausdorff_bound(3, 0.5).unwrap().bound, 0.5);
        let edge = hausdorff_bound(5, 1.0 / 3.0).unwrap();
        assert_eq!(edge.bound, 1.0);
        assert!(!edge.informative);
        assert!(hausdorff_bound(5, 0.4).is_err());
        assert!(hausdorff_bound(4, 0.2).is_err());
        assert!(hausdorff_bound(5, 0.0).is_err());
    }

    #[test]
    fn profile_flags_frequencies() {
        let d = geometric(6);
        let prof = exceptional_profile(&d, 5, &[2.0, 0.5], 6, None).unwrap();
        assert!(prof[0].near_frequency && prof[0].pole_hits > 0);
        assert!(!prof[1].near_frequency && prof[1].pole_hits == 0);
        assert_eq!(prof[1].reports.len(), 2);
        let empty = OperatorData::empty(5);
        let prof = exceptional_profile(&empty, 5, &[0.3, 1.1], 0, None).unwrap();
        assert!(prof.iter().all(|e| e.max_partial == 0.0));
    }

    proptest! {
        #[test]
        fn partial_is_monotone_in_j(eta in -3.0f64..3.0, n in 2usize..9) {
            let d = geometric(n);
            let mut last = 0.0;
            for j in 1..=n {
                let r = small_divisor_sum(&d, eta, 3, j, None).unwrap();
                prop_assert!(r.partial >= last);
                last = r.partial;
            }
        }

        #[test]
        fn dimension_bound_is_linear(k in 1u32..1000) {
            let alpha = k as f64 / 4000.0;
            let b = hausdorff_bound(5, alpha).unwrap().bound;
            prop_assert!((b - 3.0 * alpha).abs() <= 1e-15);
        }
    }
}
