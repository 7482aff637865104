//! Hafnian engines and the hafnian form of joint photon-count probabilities.
//!
//! Three exact engines are provided: [`hafnian_matching`] enumerates perfect
//! matchings and serves as the reference, [`hafnian_trace`] is the
//! inclusion-exclusion power-trace algorithm (`O(n³ 2^{n/2})`), and
//! [`hafnian_repeated`] works directly on a matrix with repeated rows and
//! columns, which is the structure of the expanded probability matrix.
//! All engines ignore the diagonal (loop-free hafnian).

mod pattern;
mod trace;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{from_pairs, max_abs, symmetric_residual, to_pairs};
use crate::{CMat, Error, Result, C64};

pub use pattern::{
    build_c, expand_pattern, pattern_probability, pattern_probability_with, OccupationPattern,
    PatternEvaluator,
};
pub use trace::{hafnian_trace, hafnian_trace_parallel};

/// Largest order accepted by the matching enumeration.
pub const MATCHING_LIMIT: usize = 20;
/// Largest order accepted by the power-trace engine.
pub const TRACE_LIMIT: usize = 36;
/// Largest memo table of the repeated-index engine.
pub const REPEATED_TABLE_LIMIT: usize = 1 << 26;

/// Choice of hafnian engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HafnianEngine {
    Matching,
    Trace,
    #[default]
    Repeated,
}

/// A square complex matrix that is symmetric within `1e-12` (relative).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricComplexMatrix {
    entries: CMat,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    n: usize,
    entries: Vec<[f64; 2]>,
}

impl SymmetricComplexMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Dimension(format!(
                "hafnian input must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let res = symmetric_residual(&entries);
        if res > 1e-12 * max_abs(&entries).max(1.0) {
            return Err(Error::Domain(format!("matrix is not symmetric (residual {res:.3e})")));
        }
        Ok(Self { entries })
    }

    /// All-ones off-diagonal matrix, whose hafnian counts perfect matchings.
    pub fn complete_graph(n: usize) -> Self {
        Self { entries: CMat::from_element(n, n, C64::new(1.0, 0.0)) }
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: MatrixFile = serde_json::from_str(s)?;
        Self::new(from_pairs(raw.n, raw.n, &raw.entries, "entries")?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&MatrixFile { n: self.order(), entries: to_pairs(&self.entries) })?)
    }
}

/// Hafnian with the requested engine.
pub fn hafnian(m: &SymmetricComplexMatrix, engine: HafnianEngine) -> Result<C64> {
    match engine {
        HafnianEngine::Matching => hafnian_matching(m),
        HafnianEngine::Trace => hafnian_trace(m),
        HafnianEngine::Repeated => hafnian_repeated(m.matrix(), &vec![1; m.order()]),
    }
}

/// Sum over all perfect matchings of `Π M_ij`.
pub fn hafnian_matching(m: &SymmetricComplexMatrix) -> Result<C64> {
    let n = m.order();
    if n > MATCHING_LIMIT {
        return Err(Error::Size(format!("matching engine handles n <= {MATCHING_LIMIT}, got {n}")));
    }
    if n % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    fn rec(a: &CMat, free: u32) -> C64 {
        if free == 0 {
            return C64::new(1.0, 0.0);
        }
        let i = free.trailing_zeros() as usize;
        let rest = free & !(1 << i);
        let mut acc = C64::new(0.0, 0.0);
        let mut others = rest;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            let w = a[(i, j)];
            if w != C64::new(0.0, 0.0) {
                acc += w * rec(a, rest & !(1 << j));
            }
        }
        acc
    }
    let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
    Ok(rec(m.matrix(), full))
}

/// Hafnian of the matrix obtained by repeating index `i` of `a` `counts[i]`
/// times, without forming the expanded matrix.
///
/// With `i` the first index still carrying multiplicity and `c' = c - e_i`,
/// `haf(c) = Σ_j a_ij c'_j haf(c' - e_j)`: the first copy of `i` pairs with
/// any of the `c'_j` remaining copies of `j`. The memo table is indexed in
/// mixed radix and filled in increasing order.
pub fn hafnian_repeated(a: &CMat, counts: &[usize]) -> Result<C64> {
    let k = counts.len();
    if a.shape() != (k, k) {
        return Err(Error::Dimension(format!("counts length {k} does not match matrix order")));
    }
    let total: usize = counts.iter().sum();
    if total % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    // only indices with nonzero multiplicity matter
    let live: Vec<usize> = (0..k).filter(|&i| counts[i] > 0).collect();
    let c: Vec<usize> = live.iter().map(|&i| counts[i]).collect();
    let sub = CMat::from_fn(live.len(), live.len(), |r, s| a[(live[r], live[s])]);
    let mut strides = Vec::with_capacity(c.len());
    let mut size: usize = 1;
    for &ci in &c {
        strides.push(size);
        size = size
            .checked_mul(ci + 1)
            .filter(|&s| s <= REPEATED_TABLE_LIMIT)
            .ok_or_else(|| Error::Size("repeated-index table too large".into()))?;
    }
    let mut table = vec![C64::new(0.0, 0.0); size];
    table[0] = C64::new(1.0, 0.0);
    let mut digits = vec![0usize; c.len()];
    for idx in 1..size {
        // advance mixed-radix digits to represent idx
        for d in digits.iter_mut().zip(&c) {
            if *d.0 < *d.1 {
                *d.0 += 1;
                break;
            }
            *d.0 = 0;
        }
        let parity: usize = digits.iter().sum();
        if parity % 2 == 1 {
            continue;
        }
        let i = digits.iter().position(|&d| d > 0).expect("idx > 0");
        let base = idx - strides[i];
        let mut acc = C64::new(0.0, 0.0);
        for j in i..c.len() {
            let mult = if j == i { digits[i] - 1 } else { digits[j] };
            if mult > 0 {
                acc += sub[(i, j)] * (mult as f64) * table[base - strides[j]];
            }
        }
        table[idx] = acc;
    }
    Ok(table[size - 1])
}
