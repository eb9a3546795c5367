//! Path representation of `f_{I,0}`.

use itertools::Itertools;
use num_complex::Complex;

use super::{Guarded, Scalar};
use crate::error::{Error, Result};

/// Height profiles `s_0..s_I` with unit steps, `s_0 = s_I = 0` and
/// `s_i >= 1` strictly inside. There are `Catalan(I/2 - 1)` of them.
pub fn dyck_profiles(order: usize) -> Result<Vec<Vec<i64>>> {
    if order < 2 || order % 2 == 1 {
        return Err(Error::Precondition(format!("profiles need an even order >= 2, got {order}")));
    }
    let mut out = Vec::new();
    let mut path = vec![0i64];
    extend(order, &mut path, &mut out);
    Ok(out)
}

fn extend(order: usize, path: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    let m = path.len();
    if m == order + 1 {
        out.push(path.clone());
        return;
    }
    let last = *path.last().unwrap();
    for step in [1, -1] {
        let v = last + step;
        let remaining = (order - m) as i64;
        let ok = if m == order { v == 0 } else { v >= 1 && v <= remaining };
        if ok {
            path.push(v);
            extend(order, path, out);
            path.pop();
        }
    }
}

/// `f_{2n,0}` through the path sum, averaged over orderings of both tuples.
///
/// Each profile contributes `prod_{m=1}^{I-1} i (s_{m+1} - s_m) s_m / d_m`,
/// `d_m = sum_{j <= (m+s_m)/2} pos_j - sum_{j <= (m-s_m)/2} neg_j - s_m eta`.
pub fn f_i0_via_h<T: Scalar>(eta: f64, pos: &[f64], neg: &[f64], pole_tol: f64) -> Result<Guarded<T>> {
    let n = pos.len();
    if n == 0 || neg.len() != n {
        return Err(Error::Precondition(format!(
            "path representation needs |pos| = |neg| >= 1, got {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    let order = 2 * n;
    let profiles = dyck_profiles(order)?;
    let scale_base = 1.0 + pos.iter().map(|v| v.abs()).sum::<f64>() + neg.iter().map(|v| v.abs()).sum::<f64>();
    let eta_t = T::of(eta);
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut count = 0usize;
    for sp in pos.iter().map(|&v| T::of(v)).permutations(n) {
        let pre_p = prefix(&sp);
        for sn in neg.iter().map(|&v| T::of(v)).permutations(n) {
            let pre_n = prefix(&sn);
            count += 1;
            for s in &profiles {
                let mut term = Complex::new(T::one(), T::zero());
                for m in 1..order {
                    let h = s[m];
                    let a = ((m as i64 + h) / 2) as usize;
                    let b = ((m as i64 - h) / 2) as usize;
                    let d = pre_p[a] - pre_n[b] - T::of(h as f64) * eta_t;
                    if d.abs().f64() < pole_tol * (scale_base + h as f64 * eta.abs()) {
                        return Ok(Guarded::pole());
                    }
                    let num = T::of(((s[m + 1] - h) * h) as f64);
                    term = term * Complex::new(T::zero(), num / d);
                }
                acc = acc + term;
            }
        }
    }
    Ok(Guarded::finite(acc / T::of(count as f64)))
}

fn prefix<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(T::zero());
    for &x in v {
        let last = *out.last().unwrap();
        out.push(last + x);
    }
    out
}
