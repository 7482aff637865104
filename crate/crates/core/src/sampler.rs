//! Exhaustive enumeration of photon-count distributions and exact sampling
//! from them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::gaussian::{marginal_photon, CovarianceMatrix};
use crate::hafnian::{HafnianEngine, OccupationPattern, PatternEvaluator};
use crate::linalg::hermitian_eigen;
use crate::{Error, Result};

/// Enumeration guard: at most this many photon modes.
pub const MAX_ENUMERATED_MODES: usize = 4;
/// Enumeration guard: at most this many patterns (all patterns of 4 modes
/// with total ≤ 16).
pub const MAX_ENUMERATED_PATTERNS: usize = 4845;
/// Enumeration guard on the total-photon cutoff.
pub const MAX_ENUMERATED_CUTOFF: usize = 64;
/// Largest normalization deficit accepted by the sampler.
pub const MAX_SAMPLING_DEFICIT: f64 = 0.01;

/// Pattern probabilities for every pattern with total `≤ cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    cutoff: usize,
    /// `1 - Σ p`; may be marginally negative through rounding.
    deficit: f64,
    entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TableEntry {
    pattern: OccupationPattern,
    probability: f64,
}

impl ProbabilityTable {
    /// Sorts the entries lexicographically and records the deficit.
    pub fn new(mut entries: Vec<(OccupationPattern, f64)>, cutoff: usize) -> Result<Self> {
        if let Some((p, v)) = entries.iter().find(|(_, v)| !(*v >= 0.0) || *v > 1.0) {
            return Err(Error::Numerical(format!("pattern {p} has probability {v}")));
        }
        if let Some(first) = entries.first() {
            let m = first.0.len();
            if entries.iter().any(|(p, _)| p.len() != m || p.total() > cutoff) {
                return Err(Error::Dimension("table patterns must share a length and respect the cutoff".into()));
            }
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Dimension("duplicate pattern in table".into()));
        }
        let sum: f64 = entries.iter().map(|(_, p)| p).sum();
        Ok(Self {
            cutoff,
            deficit: 1.0 - sum,
            entries: entries.into_iter().map(|(pattern, probability)| TableEntry { pattern, probability }).collect(),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> Vec<(OccupationPattern, f64)> {
        self.entries.iter().map(|e| (e.pattern.clone(), e.probability)).collect()
    }

    pub fn probability(&self, pattern: &OccupationPattern) -> Option<f64> {
        self.entries
            .binary_search_by(|e| e.pattern.cmp(pattern))
            .ok()
            .map(|i| self.entries[i].probability)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-validates a table.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ProbabilityTable = serde_json::from_str(s)?;
        Self::new(raw.entries(), raw.cutoff)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// All patterns of `modes` counts with total `≤ total`, in lexicographic order.
pub fn patterns_up_to(modes: usize, total: usize) -> Vec<OccupationPattern> {
    fn rec(prefix: &mut Vec<usize>, modes: usize, left: usize, out: &mut Vec<OccupationPattern>) {
        if prefix.len() == modes {
            out.push(OccupationPattern(prefix.clone()));
            return;
        }
        for n in 0..=left {
            prefix.push(n);
            rec(prefix, modes, left - n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(modes), modes, total, &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smallest total cutoff `K` with `Σ_{k>K} C(k+m-1, m-1) λ^k ≤ tol`, where
/// `λ = max |g/(1+g)|` over the eigenvalues `g` of the photon covariance.
/// The count of patterns with total `k` times `λ^k` bounds their combined
/// weight for a state dominated by its slowest-decaying mode.
pub fn suggest_cutoff(g: &CovarianceMatrix, tol: f64) -> Result<usize> {
    let g_ph = marginal_photon(g);
    let m = g_ph.layout().modes();
    let (values, _) = hermitian_eigen(&g_ph.full());
    let lambda = values.iter().map(|&x| (x / (1.0 + x)).abs()).fold(0.0, f64::max);
    if lambda >= 1.0 || !lambda.is_finite() {
        return Err(Error::Domain(format!("photon covariance has no convergent tail (ratio {lambda})")));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    const MAX_K: usize = 4096;
    let term = |k: usize| binomial(k + m - 1, m - 1) * lambda.powi(k as i32);
    for cutoff in 0..MAX_K {
        let mut tail = 0.0;
        let mut k = cutoff + 1;
        loop {
            let t = term(k);
            tail += t;
            if t < 1e-3 * tol * (1.0 - lambda) || k > MAX_K {
                break;
            }
            k += 1;
        }
        if tail <= tol {
            return Ok(cutoff);
        }
    }
    Err(Error::Cutoff(format!("tail below {tol} needs a cutoff above {MAX_K}")))
}

/// Probabilities of every photon pattern with total `≤ total_cutoff`.
pub fn enumerate_distribution(g: &CovarianceMatrix, total_cutoff: usize) -> Result<ProbabilityTable> {
    let m = g.layout().m_ph();
    if m > MAX_ENUMERATED_MODES {
        return Err(Error::Size(format!("enumeration supports at most {MAX_ENUMERATED_MODES} photon modes, got {m}")));
    }
    if total_cutoff > MAX_ENUMERATED_CUTOFF {
        return Err(Error::Size(format!("enumeration cutoff {total_cutoff} exceeds {MAX_ENUMERATED_CUTOFF}")));
    }
    let count = binomial(total_cutoff + m, m);
    if count > MAX_ENUMERATED_PATTERNS as f64 {
        return Err(Error::Size(format!(
            "{count} patterns exceed the enumeration limit of {MAX_ENUMERATED_PATTERNS}"
        )));
    }
    let eval = PatternEvaluator::new(g, HafnianEngine::Repeated)?;
    let entries = patterns_up_to(m, total_cutoff)
        .into_par_iter()
        .map(|p| eval.probability(&p).map(|v| (p, v)))
        .collect::<Result<Vec<_>>>()?;
    ProbabilityTable::new(entries, total_cutoff)
}

/// Inverse-CDF sampling from the renormalized table with a seeded ChaCha20
/// stream.
pub fn draw_samples(table: &ProbabilityTable, seed: u64, count: usize) -> Result<Vec<OccupationPattern>> {
    if table.deficit() >= MAX_SAMPLING_DEFICIT {
        return Err(Error::Precision(format!(
            "table deficit {:.3e} exceeds {MAX_SAMPLING_DEFICIT}; raise the cutoff",
            table.deficit()
        )));
    }
    if table.is_empty() {
        return Err(Error::Precision("cannot sample from an empty table".into()));
    }
    let mut cdf = Vec::with_capacity(table.len());
    let mut acc = 0.0;
    for e in &table.entries {
        acc += e.probability;
        cdf.push(acc);
    }
    let total = acc;
    let last = cdf.len() - 1;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&c| c <= u).min(last);
            table.entries[i].pattern.clone()
        })
        .collect())
}

/// Pearson goodness-of-fit result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Chi-square test of `samples` against the renormalized table. Patterns
/// whose expected count is below 5 are pooled into a single bin.
pub fn chi_square_gof(table: &ProbabilityTable, samples: &[OccupationPattern]) -> Result<GoodnessOfFit> {
    let n = samples.len() as f64;
    if samples.is_empty() {
        return Err(Error::Domain("no samples to test".into()));
    }
    let total = table.total_probability();
    let mut observed = vec![0usize; table.len()];
    let mut outside = 0usize;
    for s in samples {
        match table.entries.binary_search_by(|e| e.pattern.cmp(s)) {
            Ok(i) => observed[i] += 1,
            Err(_) => outside += 1,
        }
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut pool_exp, mut pool_obs) = (0.0, outside as f64);
    for (e, &o) in table.entries.iter().zip(&observed) {
        let expected = n * e.probability / total;
        if expected < 5.0 {
            pool_exp += expected;
            pool_obs += o as f64;
        } else {
            bins.push((expected, o as f64));
        }
    }
    if pool_exp >= 5.0 {
        bins.push((pool_exp, pool_obs));
    } else if let Some(last) = bins.last_mut() {
        last.0 += pool_exp;
        last.1 += pool_obs;
    } else {
        bins.push((pool_exp, pool_obs));
    }
    let statistic: f64 = bins.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numerical(e.to_string()))?;
        1.0 - dist.cdf(statistic)
    };
    Ok(GoodnessOfFit { statistic, degrees_of_freedom: dof, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(v: &[usize]) -> OccupationPattern {
        OccupationPattern(v.to_vec())
    }

    #[test]
    fn pattern_enumeration_order() {
        let ps = patterns_up_to(2, 2);
        let want: Vec<OccupationPattern> =
            [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [2, 0]].iter().map(|v| pat(v)).collect();
        assert_eq!(ps, want);
        assert_eq!(patterns_up_to(4, 16).len(), MAX_ENUMERATED_PATTERNS);
        assert_eq!(patterns_up_to(3, 0), vec![pat(&[0, 0, 0])]);
    }

    #[test]
    fn vacuum_table() {
        let g = CovarianceMatrix::thermal(&[0.0, 0.0]).unwrap();
        let t = enumerate_distribution(&g, 0).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t.entries()[0].1 - 1.0).abs() < 1e-15);
        assert!(t.deficit().abs() < 1e-15);
    }

    #[test]
    fn thermal_tail_deficit() {
        let g = CovarianceMatrix::thermal(&[1.0]).unwrap();
        let t = enumerate_distribution(&g, 20).unwrap();
        assert!((t.deficit() - 0.5f64.powi(21)).abs() < 1e-13);
    }

    #[test]
    fn two_mode_squeezed_vacuum_parity() {
        use crate::gaussian::CovarianceMatrix as Cov;
        use crate::{CMat, C64};
        let r: f64 = 0.5;
        let layout = crate::ModeLayout::photon_only(2).unwrap();
        let s = r.sinh().powi(2);
        let cs = r.sinh() * r.cosh();
        let n = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(s, 0.0); 2]));
        let a = CMat::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(cs, 0.0), C64::new(cs, 0.0), C64::new(0.0, 0.0)]);
        let g = Cov::new(layout, n, a).unwrap();
        let t = enumerate_distribution(&g, 10).unwrap();
        for (p, v) in t.entries() {
            if p.total() % 2 == 1 {
                assert!(v < 1e-12, "{p}: {v}");
            }
            if p.counts()[0] != p.counts()[1] {
                assert!(v < 1e-12, "{p}: {v}");
            }
        }
    }

    #[test]
    fn guards() {
        let g = CovarianceMatrix::thermal(&[0.1; 5]).unwrap();
        assert!(matches!(enumerate_distribution(&g, 2), Err(Error::Size(_))));
        let g = CovarianceMatrix::thermal(&[0.1; 4]).unwrap();
        assert!(matches!(enumerate_distribution(&g, 17), Err(Error::Size(_))));
        assert!(enumerate_distribution(&g, 16).is_ok());
    }

    #[test]
    fn sampling_contracts() {
        let single = ProbabilityTable::new(vec![(pat(&[2]), 1.0)], 2).unwrap();
        let s = draw_samples(&single, 7, 50).unwrap();
        assert!(s.iter().all(|p| p == &pat(&[2])));

        let half = ProbabilityTable::new(vec![(pat(&[0]), 0.5), (pat(&[1]), 0.5)], 1).unwrap();
        let n = 40_000;
        let s = draw_samples(&half, 42, n).unwrap();
        let ones = s.iter().filter(|p| p.counts()[0] == 1).count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ones - n as f64 / 2.0).abs() < 4.0 * sigma);
        assert_eq!(s, draw_samples(&half, 42, n).unwrap());

        let leaky = ProbabilityTable::new(vec![(pat(&[0]), 0.9)], 0).unwrap();
        assert!(matches!(draw_samples(&leaky, 1, 1), Err(Error::Precision(_))));
    }

    #[test]
    fn gof_accepts_own_samples_and_rejects_wrong_table() {
        let g = CovarianceMatrix::thermal(&[0.7, 0.3]).unwrap();
        let t = enumerate_distribution(&g, 12).unwrap();
        let s = draw_samples(&t, 3, 20_000).unwrap();
        assert!(chi_square_gof(&t, &s).unwrap().p_value > 1e-4);
        let other = enumerate_distribution(&CovarianceMatrix::thermal(&[0.3, 0.7]).unwrap(), 12).unwrap();
        assert!(chi_square_gof(&other, &s).unwrap().p_value < 1e-4);
    }

    #[test]
    fn suggested_cutoff_meets_tolerance() {
        for etas in [vec![1.0], vec![0.4, 0.2], vec![0.5, 0.1, 0.2]] {
            let g = CovarianceMatrix::thermal(&etas).unwrap();
            let k = suggest_cutoff(&g, 1e-6).unwrap();
            let t = enumerate_distribution(&g, k).unwrap();
            assert!(t.deficit() <= 1e-6 && t.deficit() >= -1e-9, "{etas:?}: K={k}, deficit {}", t.deficit());
        }
    }

    #[test]
    fn table_json_round_trip() {
        let g = CovarianceMatrix::thermal(&[0.5, 0.25]).unwrap();
        let t = enumerate_distribution(&g, 4).unwrap();
        let back = ProbabilityTable::from_json_str(&t.to_json_string().unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
