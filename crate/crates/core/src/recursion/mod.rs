//! Critical-point coefficient functions.
//!
//! `f_{I,K}` and `g_{I,K}` are indexed by a [`FreqSignature`]: `P` positive and
//! `N` negative frequencies with `I = P + N`, `K = P - N`. `h_I` is the
//! order-sensitive building block of `g_{I,1}`.
//!
//! Evaluation is generic over the working precision ([`Scalar`]); `f64` is the
//! default and [`TwoFloat`] gives roughly 32 digits for evaluations near poles.

mod dyck;
mod poles;
mod scalar;

use std::collections::HashMap;
use std::sync::RwLock;

use itertools::Itertools;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dyck::{dyck_profiles, f_i0_via_h};
pub use poles::{enumerate_combinations, nonremovable_poles, PolePoint, Witness, DEFAULT_COMBINATION_CAP};
pub use scalar::Scalar;
pub use twofloat::TwoFloat;

pub const DEFAULT_POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Finite,
    Pole,
}

/// A complex value tagged finite or pole. The value is meaningless for a pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guarded<T> {
    pub value: Complex<T>,
    pub status: Status,
}

pub type GuardedComplex = Guarded<f64>;

impl<T: Scalar> Guarded<T> {
    pub fn finite(value: Complex<T>) -> Self {
        Self {
            value,
            status: Status::Finite,
        }
    }

    pub fn pole() -> Self {
        Self {
            value: Complex::new(T::nan(), T::nan()),
            status: Status::Pole,
        }
    }

    pub fn zero() -> Self {
        Self::finite(Complex::new(T::zero(), T::zero()))
    }

    pub fn one() -> Self {
        Self::finite(Complex::new(T::one(), T::zero()))
    }

    pub fn is_pole(&self) -> bool {
        self.status == Status::Pole
    }

    pub fn get(&self) -> Option<Complex<T>> {
        match self.status {
            Status::Finite => Some(self.value),
            Status::Pole => None,
        }
    }

    pub fn to_c64(&self) -> GuardedComplex {
        match self.status {
            Status::Finite => Guarded::finite(Complex::new(self.value.re.f64(), self.value.im.f64())),
            Status::Pole => Guarded::pole(),
        }
    }
}

/// Positive and negative frequency tuples indexing `f_{I,K}` and `g_{I,K}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqSignature {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl FreqSignature {
    pub fn new(pos: Vec<f64>, neg: Vec<f64>) -> Self {
        Self { pos, neg }
    }

    pub fn p(&self) -> usize {
        self.pos.len()
    }

    pub fn n(&self) -> usize {
        self.neg.len()
    }

    pub fn i(&self) -> usize {
        self.pos.len() + self.neg.len()
    }

    pub fn k(&self) -> i64 {
        self.pos.len() as i64 - self.neg.len() as i64
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.neg.clone(), self.pos.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    kind: u8,
    eta: u64,
    pos: Vec<u64>,
    neg: Vec<u64>,
}

const KIND_F: u8 = 0;
const KIND_G: u8 = 1;
const KIND_H: u8 = 2;

fn key(kind: u8, eta: f64, pos: &[f64], neg: &[f64]) -> Key {
    Key {
        kind,
        eta: eta.to_bits(),
        pos: pos.iter().map(|v| v.to_bits()).collect(),
        neg: neg.iter().map(|v| v.to_bits()).collect(),
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    out.sort_by(f64::total_cmp);
    out
}

fn sum<T: Scalar>(v: &[f64]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + T::of(x))
}

fn abs_sum(v: &[f64]) -> f64 {
    v.iter().sum::<f64>().abs()
}

/// Residuals of one reduction-identity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionResidual {
    pub f_abs: f64,
    pub f_rel: f64,
    pub g_abs: f64,
    pub g_rel: f64,
    pub status: Status,
}

/// Memoizing evaluator for `f`, `g` and `h`.
///
/// `f` and `g` are cached on sorted tuples, `h` on the ordered ones. The cache
/// is shared behind a read-write lock, so one engine can serve many threads.
pub struct RecursionEngine<T: Scalar = f64> {
    pole_tol: f64,
    memo: RwLock<HashMap<Key, Guarded<T>>>,
}

impl<T: Scalar> Default for RecursionEngine<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> RecursionEngine<T> {
    pub fn new() -> Self {
        Self::with_pole_tol(DEFAULT_POLE_TOL)
    }

    pub fn with_pole_tol(pole_tol: f64) -> Self {
        Self {
            pole_tol,
            memo: RwLock::new(HashMap::new()),
        }
    }

    pub fn pole_tol(&self) -> f64 {
        self.pole_tol
    }

    pub fn cache_len(&self) -> usize {
        self.memo.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn clear_cache(&self) {
        if let Ok(mut m) = self.memo.write() {
            m.clear();
        }
    }

    fn lookup(&self, k: &Key) -> Option<Guarded<T>> {
        self.memo.read().ok().and_then(|m| m.get(k).copied())
    }

    fn store(&self, k: Key, v: Guarded<T>) -> Guarded<T> {
        if let Ok(mut m) = self.memo.write() {
            m.insert(k, v);
        }
        v
    }

    /// Guard a denominator against the scale `1 + |sum pos| + |sum neg| + K |eta|`.
    fn guarded_inverse(&self, d: T, scale: f64) -> Option<T> {
        if d.abs().f64() < self.pole_tol * scale {
            None
        } else {
            Some(T::one() / d)
        }
    }

    pub fn eval_f(&self, eta: f64, sig: &FreqSignature) -> Guarded<T> {
        self.f(eta, &sig.pos, &sig.neg)
    }

    pub fn eval_g(&self, eta: f64, sig: &FreqSignature) -> Guarded<T> {
        self.g(eta, &sig.pos, &sig.neg)
    }

    /// `f_{I,K}(eta; pos; neg)` for unsorted tuples.
    pub fn f(&self, eta: f64, pos: &[f64], neg: &[f64]) -> Guarded<T> {
        self.f_sorted(eta, &sorted(pos), &sorted(neg))
    }

    pub fn g(&self, eta: f64, pos: &[f64], neg: &[f64]) -> Guarded<T> {
        self.g_sorted(eta, &sorted(pos), &sorted(neg))
    }

    fn f_sorted(&self, eta: f64, pos: &[f64], neg: &[f64]) -> Guarded<T> {
        let (p, n) = (pos.len(), neg.len());
        if p + n < 1 || n > p {
            return Guarded::zero();
        }
        if p == 1 && n == 0 {
            return Guarded::one();
        }
        let k = key(KIND_F, eta, pos, neg);
        if let Some(v) = self.lookup(&k) {
            return v;
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        if p > 0 {
            match self.removal_sum(eta, pos, neg, true) {
                Some(s) => acc = acc + s / T::of(p as f64),
                None => return self.store(k, Guarded::pole()),
            }
        }
        if n > 0 {
            match self.removal_sum(eta, pos, neg, false) {
                Some(s) => acc = acc - s / T::of(n as f64),
                None => return self.store(k, Guarded::pole()),
            }
        }
        self.store(k, Guarded::finite(acc))
    }

    /// Sum over m of `g(pos \ m; neg)` or `g(pos; neg \ m)`. Equal entries give
    /// identical sub-signatures, so each distinct value is evaluated once.
    fn removal_sum(&self, eta: f64, pos: &[f64], neg: &[f64], from_pos: bool) -> Option<Complex<T>> {
        let src = if from_pos { pos } else { neg };
        let mut acc = Complex::new(T::zero(), T::zero());
        let mut m = 0;
        while m < src.len() {
            let mut run = 1;
            while m + run < src.len() && src[m + run].to_bits() == src[m].to_bits() {
                run += 1;
            }
            let mut rest = src.to_vec();
            rest.remove(m);
            let v = if from_pos {
                self.g_sorted(eta, &rest, neg)
            } else {
                self.g_sorted(eta, pos, &rest)
            };
            acc = acc + v.get()? * T::of(run as f64);
            m += run;
        }
        Some(acc)
    }

    fn g_sorted(&self, eta: f64, pos: &[f64], neg: &[f64]) -> Guarded<T> {
        let (p, n) = (pos.len(), neg.len());
        if p + n < 1 || p <= n {
            return Guarded::zero();
        }
        let k = key(KIND_G, eta, pos, neg);
        if let Some(v) = self.lookup(&k) {
            return v;
        }
        let kk = (p - n) as f64;
        let d = sum::<T>(pos) - sum::<T>(neg) - T::of(kk) * T::of(eta);
        let scale = 1.0 + abs_sum(pos) + abs_sum(neg) + kk * eta.abs();
        let Some(inv) = self.guarded_inverse(d, scale) else {
            return self.store(k, Guarded::pole());
        };
        let out = match self.f_sorted(eta, pos, neg).get() {
            Some(f) => Guarded::finite(f * Complex::new(T::zero(), T::of(kk) * inv)),
            None => Guarded::pole(),
        };
        self.store(k, out)
    }

    /// `h_I(eta; pos; neg)` on ordered tuples with `|pos| = |neg| + 1`.
    pub fn eval_h(&self, eta: f64, pos: &[f64], neg: &[f64]) -> Result<Guarded<T>> {
        if pos.is_empty() || pos.len() != neg.len() + 1 {
            return Err(Error::Precondition(format!(
                "h needs |pos| = |neg| + 1 >= 1, got {} and {}",
                pos.len(),
                neg.len()
            )));
        }
        Ok(self.h(eta, pos, neg))
    }

    /// `h_I` for an even index, identically zero.
    pub fn eval_h_even(&self) -> Guarded<T> {
        Guarded::zero()
    }

    fn h(&self, eta: f64, pos: &[f64], neg: &[f64]) -> Guarded<T> {
        let p = pos.len();
        if p == 1 {
            let d = T::of(pos[0]) - T::of(eta);
            return match self.guarded_inverse(d, 1.0 + pos[0].abs() + eta.abs()) {
                Some(inv) => Guarded::finite(Complex::new(inv, T::zero())),
                None => Guarded::pole(),
            };
        }
        let k = key(KIND_H, eta, pos, neg);
        if let Some(v) = self.lookup(&k) {
            return v;
        }
        let d = sum::<T>(pos) - sum::<T>(neg) - T::of(eta);
        let scale = 1.0 + abs_sum(pos) + abs_sum(neg) + eta.abs();
        let Some(inv) = self.guarded_inverse(d, scale) else {
            return self.store(k, Guarded::pole());
        };
        let order = 2 * p - 1;
        let mut acc = T::zero();
        for m in (1..order - 1).step_by(2) {
            let split_p = m.div_ceil(2);
            let split_n = (m - 1) / 2;
            let left = self.h(eta, &pos[..split_p], &neg[..split_n]);
            let right = self.h(eta, &pos[split_p..], &neg[split_n..p - 2]);
            match (left.get(), right.get()) {
                (Some(l), Some(r)) => acc = acc + l.re * r.re,
                _ => return self.store(k, Guarded::pole()),
            }
        }
        self.store(k, Guarded::finite(Complex::new(acc * inv, T::zero())))
    }

    /// `i` times the average of `h_I` over all orderings of pos and of neg.
    pub fn h_symmetrized(&self, eta: f64, pos: &[f64], neg: &[f64]) -> Result<Guarded<T>> {
        self.eval_h(eta, pos, neg)?;
        let mut acc = T::zero();
        let mut count = 0usize;
        for sp in pos.iter().copied().permutations(pos.len()) {
            for sn in neg.iter().copied().permutations(neg.len()) {
                match self.h(eta, &sp, &sn).get() {
                    Some(v) => acc = acc + v.re,
                    None => return Ok(Guarded::pole()),
                }
                count += 1;
            }
        }
        Ok(Guarded::finite(Complex::new(T::zero(), acc / T::of(count as f64))))
    }

    /// Relative residual of `g_{I,1} = i * symmetrized h_I`.
    pub fn check_g_h(&self, eta: f64, pos: &[f64], neg: &[f64]) -> Result<Option<f64>> {
        let rhs = self.h_symmetrized(eta, pos, neg)?;
        let lhs = self.g(eta, pos, neg);
        Ok(match (lhs.get(), rhs.get()) {
            (Some(l), Some(r)) => Some(relative(l, r, l.norm().f64().max(r.norm().f64()))),
            _ => None,
        })
    }

    /// Both residuals of the reduction identity
    /// `F_{I,K} = sum_i F_{i,k} (.) g_{I-i,K-k}` for `F` in `{f, g}`.
    pub fn check_reduction(&self, eta: f64, sig: &FreqSignature, k: usize) -> Result<ReductionResidual> {
        let big_i = sig.i();
        let big_k = sig.k();
        if !(k >= 1 && (k as i64) < big_k && big_k as usize <= big_i) {
            return Err(Error::Precondition(format!(
                "reduction needs 0 < k < K <= I, got k = {k}, K = {big_k}, I = {big_i}"
            )));
        }
        let (p, n) = (sig.p(), sig.n());
        let zero = Complex::new(T::zero(), T::zero());
        let (mut f_rhs, mut g_rhs) = (zero, zero);
        let (mut f_mag, mut g_mag) = (0.0, 0.0);
        let mut pole = false;
        for i in k..big_i {
            if (i - k) % 2 == 1 {
                continue;
            }
            let (p1, n1) = ((i + k) / 2, (i - k) / 2);
            if p1 > p || n1 > n {
                continue;
            }
            let tail = |a: &[f64], b: &[f64]| self.g(eta, a, b);
            let fa = sym_product(|a: &[f64], b: &[f64]| self.f(eta, a, b), (p1, n1), tail, sig)?;
            let ga = sym_product(|a: &[f64], b: &[f64]| self.g(eta, a, b), (p1, n1), tail, sig)?;
            match (fa.get(), ga.get()) {
                (Some(fv), Some(gv)) => {
                    f_rhs = f_rhs + fv;
                    g_rhs = g_rhs + gv;
                    f_mag += fv.norm().f64();
                    g_mag += gv.norm().f64();
                }
                _ => pole = true,
            }
        }
        let (fl, gl) = (self.eval_f(eta, sig), self.eval_g(eta, sig));
        match (fl.get(), gl.get()) {
            (Some(fl), Some(gl)) if !pole => Ok(ReductionResidual {
                f_abs: (fl - f_rhs).norm().f64(),
                f_rel: relative(fl, f_rhs, f_mag),
                g_abs: (gl - g_rhs).norm().f64(),
                g_rel: relative(gl, g_rhs, g_mag),
                status: Status::Finite,
            }),
            _ => Ok(ReductionResidual {
                f_abs: f64::NAN,
                f_rel: f64::NAN,
                g_abs: f64::NAN,
                g_rel: f64::NAN,
                status: Status::Pole,
            }),
        }
    }
}

fn relative<T: Scalar>(a: Complex<T>, b: Complex<T>, mag: f64) -> f64 {
    let denom = a.norm().f64().max(mag).max(f64::MIN_POSITIVE);
    (a - b).norm().f64() / denom
}

/// Symmetric product: the average over all splits of the signature into a
/// `(p1, n1)` part fed to `fa` and the complementary part fed to `fb`.
///
/// Averaging over index subsets equals the average over all permutations,
/// since each subset pair occurs equally often among them.
pub fn sym_product<T, FA, FB>(fa: FA, arity: (usize, usize), fb: FB, sig: &FreqSignature) -> Result<Guarded<T>>
where
    T: Scalar,
    FA: Fn(&[f64], &[f64]) -> Guarded<T>,
    FB: Fn(&[f64], &[f64]) -> Guarded<T>,
{
    let (p1, n1) = arity;
    let (p, n) = (sig.p(), sig.n());
    if p1 > p || n1 > n {
        return Err(Error::Precondition(format!(
            "symmetric product arity ({p1}, {n1}) exceeds signature ({p}, {n})"
        )));
    }
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut count = 0usize;
    let pick = |src: &[f64], idx: &[usize]| -> (Vec<f64>, Vec<f64>) {
        let mut inside = Vec::with_capacity(idx.len());
        let mut outside = Vec::with_capacity(src.len() - idx.len());
        for (j, &v) in src.iter().enumerate() {
            if idx.contains(&j) {
                inside.push(v);
            } else {
                outside.push(v);
            }
        }
        (inside, outside)
    };
    for s in (0..p).combinations(p1) {
        let (pa, pb) = pick(&sig.pos, &s);
        for t in (0..n).combinations(n1) {
            let (na, nb) = pick(&sig.neg, &t);
            match (fa(&pa, &na).get(), fb(&pb, &nb).get()) {
                (Some(x), Some(y)) => acc = acc + x * y,
                _ => return Ok(Guarded::pole()),
            }
            count += 1;
        }
    }
    Ok(Guarded::finite(acc / T::of(count as f64)))
}
