//! Seeded randomized check of the recursion identities.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::recursion::{f_i0_via_h, FreqSignature, RecursionEngine, Scalar};

pub const MAX_ORDER: usize = 9;
pub const PASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IdentityStat {
    pub max_residual: f64,
    pub checked: usize,
    /// Evaluations skipped because a denominator hit the pole guard.
    pub skipped: usize,
}

impl IdentityStat {
    fn record(&mut self, r: Option<f64>) {
        match r {
            Some(r) => {
                self.checked += 1;
                self.max_residual = self.max_residual.max(r);
            }
            None => self.skipped += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionCheckReport {
    pub max_i: usize,
    pub trials: usize,
    pub seed: u64,
    pub precision: &'static str,
    pub tolerance: f64,
    pub identities: BTreeMap<&'static str, IdentityStat>,
    pub passed: bool,
}

fn rel<T: Scalar>(a: Complex<T>, b: Complex<T>) -> f64 {
    let scale = a.norm().f64().max(b.norm().f64()).max(f64::MIN_POSITIVE);
    (a - b).norm().f64() / scale
}

/// Frequencies on a 1/64 lattice, so that zero-sum rearrangements are exact.
fn lattice(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(64..=640) as f64 / 64.0).collect()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(1.0..10.0)).collect()
}

/// Reduction, purely-imaginary, swap, g/h and path-sum identities on random
/// frequencies in `[1, 10]` with `eta` in `[-5, 5]`.
pub fn recursion_check<T: Scalar>(max_i: usize, trials: usize, seed: u64) -> Result<RecursionCheckReport> {
    if !(1..=MAX_ORDER).contains(&max_i) {
        return Err(Error::Precondition(format!("max_I must be in 1..={MAX_ORDER}, got {max_i}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: BTreeMap<&'static str, IdentityStat> = BTreeMap::new();
    for name in ["reduction", "purely_imaginary", "swap", "g_h", "dyck"] {
        stats.insert(name, IdentityStat::default());
    }
    for _ in 0..trials {
        let engine = RecursionEngine::<T>::new();
        let eta: f64 = rng.gen_range(-5.0..5.0);
        for i in 1..=max_i {
            // Reduction over every K and split k.
            for big_k in 2..=i {
                if (i - big_k) % 2 == 1 {
                    continue;
                }
                let p = (i + big_k) / 2;
                let sig = FreqSignature::new(uniform(&mut rng, p), uniform(&mut rng, i - p));
                for k in 1..big_k {
                    let r = engine.check_reduction(eta, &sig, k)?;
                    let s = stats.get_mut("reduction").expect("key");
                    s.record(r.f_rel.max(r.g_rel).is_finite().then(|| r.f_rel.max(r.g_rel)));
                }
            }
            if i % 2 == 0 {
                let n = i / 2;
                let pos = uniform(&mut rng, n);
                let neg = uniform(&mut rng, n);
                let f = engine.f(eta, &pos, &neg).get();
                stats
                    .get_mut("purely_imaginary")
                    .expect("key")
                    .record(f.map(|f| f.re.abs().f64() / f.norm().f64().max(f64::MIN_POSITIVE)));
                if i <= 8 {
                    let via = f_i0_via_h::<T>(eta, &pos, &neg, engine.pole_tol())?.get();
                    stats
                        .get_mut("dyck")
                        .expect("key")
                        .record(f.zip(via).map(|(a, b)| rel(a, b)));
                }

                let pos = lattice(&mut rng, n);
                let mut neg = pos.clone();
                if n >= 2 {
                    let shift = rng.gen_range(1..=32) as f64 / 64.0;
                    neg[0] += shift;
                    neg[1] -= shift;
                }
                neg.reverse();
                let a = engine.f(eta, &pos, &neg).get();
                let b = engine.f(eta, &neg, &pos).get();
                stats.get_mut("swap").expect("key").record(a.zip(b).map(|(a, b)| rel(a, b)));
            } else {
                let p = i.div_ceil(2);
                let r = engine.check_g_h(eta, &uniform(&mut rng, p), &uniform(&mut rng, p - 1))?;
                stats.get_mut("g_h").expect("key").record(r);
            }
        }
    }
    let passed = stats.values().all(|s| s.max_residual < PASS_TOL);
    Ok(RecursionCheckReport {
        max_i,
        trials,
        seed,
        precision: T::NAME,
        tolerance: PASS_TOL,
        identities: stats,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursion::TwoFloat;

    #[test]
    fn small_check_passes_and_is_reproducible() {
        let a = recursion_check::<f64>(5, 10, 7).unwrap();
        assert!(a.passed, "{a:?}");
        assert!(a.identities["reduction"].checked > 0);
        let b = recursion_check::<f64>(5, 10, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn extended_precision_runs() {
        let r = recursion_check::<TwoFloat>(4, 3, 1).unwrap();
        assert!(r.passed && r.precision == "extended");
    }

    #[test]
    fn order_guard() {
        assert!(recursion_check::<f64>(10, 1, 0).is_err());
    }
}
