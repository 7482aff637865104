//! Power-trace hafnian.
//!
//! For `n = 2m`, `haf(A) = Σ_{S ⊆ [m]} (-1)^{m-|S|} [λ^m] det(1 - λ X A_S)^{-1/2}`
//! where `A_S` keeps the row/column pairs `(2i, 2i+1)` for `i ∈ S` and `X`
//! swaps the members of each pair. The determinant comes from the
//! characteristic polynomial of `X A_S` (Hessenberg reduction followed by
//! the La Budde recurrence) and the inverse square root is expanded as a
//! power series.

use rayon::prelude::*;

use super::{SymmetricComplexMatrix, TRACE_LIMIT};
use crate::{CMat, Error, Result, C64};

const CHUNKS: usize = 256;

pub fn hafnian_trace(m: &SymmetricComplexMatrix) -> Result<C64> {
    let Some(prep) = Prepared::new(m)? else {
        return Ok(trivial(m.order()));
    };
    let total = 1usize << prep.half;
    let sum = prep.partial(0, total);
    Ok(prep.finish(sum))
}

/// Same value as [`hafnian_trace`], with the subset sum split into a fixed
/// number of contiguous chunks evaluated in parallel and reduced in chunk
/// order. The result is independent of the number of worker threads; it may
/// differ from the sequential engine at the level of rounding (≈1e-12 relative).
pub fn hafnian_trace_parallel(m: &SymmetricComplexMatrix) -> Result<C64> {
    let Some(prep) = Prepared::new(m)? else {
        return Ok(trivial(m.order()));
    };
    let total = 1usize << prep.half;
    let chunk = total.div_ceil(CHUNKS).max(1);
    let parts: Vec<C64> = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|c| prep.partial(c * chunk, ((c + 1) * chunk).min(total)))
        .collect();
    let sum = parts.into_iter().fold(C64::new(0.0, 0.0), |a, b| a + b);
    Ok(prep.finish(sum))
}

fn trivial(n: usize) -> C64 {
    if n == 0 {
        C64::new(1.0, 0.0)
    } else {
        C64::new(0.0, 0.0)
    }
}

struct Prepared {
    a: CMat,
    half: usize,
    /// Entries were divided by `scale` before the subset sum.
    scale: f64,
}

impl Prepared {
    /// `None` when the hafnian is trivially 0 or 1.
    fn new(m: &SymmetricComplexMatrix) -> Result<Option<Self>> {
        let n = m.order();
        if n > TRACE_LIMIT {
            return Err(Error::Size(format!("trace engine handles n <= {TRACE_LIMIT}, got {n}")));
        }
        if n == 0 || n % 2 == 1 {
            return Ok(None);
        }
        let mut a = m.matrix().clone();
        for i in 0..n {
            a[(i, i)] = C64::new(0.0, 0.0);
        }
        let scale = a.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if scale == 0.0 {
            return Ok(None);
        }
        a.unscale_mut(scale);
        Ok(Some(Self { a, half: n / 2, scale }))
    }

    /// `haf(A) = haf(A / s) s^{m}`, combined in log-magnitude form so the
    /// power of the scale cannot overflow on its own.
    fn finish(&self, sum: C64) -> C64 {
        if sum.norm() == 0.0 {
            return sum;
        }
        let log_mag = sum.norm().ln() + self.half as f64 * self.scale.ln();
        C64::from_polar(log_mag.exp(), sum.arg())
    }

    fn partial(&self, from: usize, to: usize) -> C64 {
        let m = self.half;
        let mut acc = C64::new(0.0, 0.0);
        let mut idx = Vec::with_capacity(2 * m);
        for mask in from..to {
            idx.clear();
            for i in 0..m {
                if mask >> i & 1 == 1 {
                    idx.push(2 * i);
                    idx.push(2 * i + 1);
                }
            }
            let k = idx.len();
            // B = X A_S: row 2r of B is row 2r+1 of A_S and vice versa
            let b = CMat::from_fn(k, k, |r, c| self.a[(idx[r ^ 1], idx[c])]);
            let term = inv_sqrt_coefficient(&b, m);
            let sign = if (m - k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            acc += term * sign;
        }
        acc
    }
}

/// `[λ^order] det(1 - λB)^{-1/2}`.
fn inv_sqrt_coefficient(b: &CMat, order: usize) -> C64 {
    let k = b.nrows();
    let poly = char_poly(b);
    // det(1 - λB) = Σ_j c_j λ^j with c_j = a_{k-j}
    let c = |j: usize| if j <= k { poly[k - j] } else { C64::new(0.0, 0.0) };
    let mut g = vec![C64::new(0.0, 0.0); order + 1];
    g[0] = C64::new(1.0, 0.0);
    for n in 1..=order {
        let mut s = C64::new(0.0, 0.0);
        for j in 1..=n.min(k) {
            s += c(j) * g[n - j] * ((n - j) as f64 + 0.5 * j as f64);
        }
        g[n] = -s / n as f64;
    }
    g[order]
}

/// Coefficients `a_0..a_k` of `det(x - B)`, with `a_k = 1`.
fn char_poly(b: &CMat) -> Vec<C64> {
    let n = b.nrows();
    let h = hessenberg(b);
    // p[i] holds the characteristic polynomial of the leading i×i block
    let mut p: Vec<Vec<C64>> = Vec::with_capacity(n + 1);
    p.push(vec![C64::new(1.0, 0.0)]);
    for i in 1..=n {
        let hi = i - 1;
        let mut next = vec![C64::new(0.0, 0.0); i + 1];
        // (x - h_ii) p_{i-1}
        for (d, &coef) in p[i - 1].iter().enumerate() {
            next[d + 1] += coef;
            next[d] -= h[(hi, hi)] * coef;
        }
        let mut prod = C64::new(1.0, 0.0);
        for j in 1..i {
            prod *= h[(hi - j + 1, hi - j)];
            let w = h[(hi - j, hi)] * prod;
            for (d, &coef) in p[i - j - 1].iter().enumerate() {
                next[d] -= w * coef;
            }
        }
        p.push(next);
    }
    p.pop().expect("n + 1 entries")
}

/// Upper Hessenberg form by Householder reflections.
fn hessenberg(b: &CMat) -> CMat {
    let n = b.nrows();
    let mut h = b.clone();
    let mut v = vec![C64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(2) {
        let amax = (k + 1..n).fold(0.0f64, |a, i| a.max(h[(i, k)].norm()));
        if amax == 0.0 {
            continue;
        }
        // scaled reflector; the reflection is invariant under scaling of v
        for i in k + 1..n {
            v[i] = h[(i, k)] / amax;
        }
        let norm_x: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        let x0 = v[k + 1];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        v[k + 1] += phase * norm_x;
        let vnorm2: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum();
        let beta = 2.0 / vnorm2;
        // H <- (1 - β v v†) H
        for c in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for i in k + 1..n {
                s += v[i].conj() * h[(i, c)];
            }
            s *= beta;
            for i in k + 1..n {
                h[(i, c)] -= v[i] * s;
            }
        }
        // H <- H (1 - β v v†)
        for r in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for i in k + 1..n {
                s += h[(r, i)] * v[i];
            }
            s *= beta;
            for i in k + 1..n {
                h[(r, i)] -= s * v[i].conj();
            }
        }
    }
    h
}
