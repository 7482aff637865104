//! Joint photon-count probabilities from the hafnian of an expanded
//! correlation matrix.

use serde::{Deserialize, Serialize};

use super::{hafnian, hafnian_repeated, HafnianEngine, SymmetricComplexMatrix};
use crate::gaussian::{marginal_photon, one_plus_g, CovarianceMatrix};
use crate::linalg::{swap_halves, symmetric_part};
use crate::{CMat, Error, Result, C64};

/// Photon counts, one per photon mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OccupationPattern(pub Vec<usize>);

impl OccupationPattern {
    pub fn zeros(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    pub fn counts(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// `Π n_ν!`, exact in integer arithmetic for every `n_ν ≤ 20`.
    pub fn factorial_product(&self) -> f64 {
        self.0
            .iter()
            .map(|&n| {
                if n <= 20 {
                    (1..=n as u64).product::<u64>() as f64
                } else {
                    (1..=n).map(|k| k as f64).product()
                }
            })
            .product()
    }
}

impl From<Vec<usize>> for OccupationPattern {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl std::fmt::Display for OccupationPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// `C = X G_ph (1 + G_ph)^{-1}` with `X` the block swap.
pub fn build_c(g_ph: &CovarianceMatrix) -> Result<CMat> {
    let (inv, _) = one_plus_g(g_ph)?;
    let m = g_ph.layout().modes();
    Ok(symmetric_part(&(swap_halves(m) * g_ph.full() * inv)))
}

/// Replicates index `ν` (and `ν + m`) `n_ν` times, block-contiguously.
pub fn expand_pattern(c: &CMat, pattern: &OccupationPattern) -> Result<SymmetricComplexMatrix> {
    let m = pattern.len();
    if c.shape() != (2 * m, 2 * m) {
        return Err(Error::Dimension(format!(
            "pattern of length {m} needs a {0}x{0} matrix, got {1}x{2}",
            2 * m,
            c.nrows(),
            c.ncols()
        )));
    }
    let idx = expanded_indices(pattern);
    SymmetricComplexMatrix::new(CMat::from_fn(idx.len(), idx.len(), |r, s| c[(idx[r], idx[s])]))
}

fn expanded_indices(pattern: &OccupationPattern) -> Vec<usize> {
    let m = pattern.len();
    (0..2)
        .flat_map(|half| {
            pattern
                .counts()
                .iter()
                .enumerate()
                .flat_map(move |(nu, &n)| std::iter::repeat_n(half * m + nu, n))
        })
        .collect()
}

/// Precomputed `C` and normalization for repeated probability queries on
/// one photon covariance.
#[derive(Debug, Clone)]
pub struct PatternEvaluator {
    c: CMat,
    vacuum: f64,
    modes: usize,
    engine: HafnianEngine,
}

impl PatternEvaluator {
    /// Photon modes are extracted first when `g` also contains atomic modes.
    pub fn new(g: &CovarianceMatrix, engine: HafnianEngine) -> Result<Self> {
        let g_ph = marginal_photon(g);
        let (inv, det) = one_plus_g(&g_ph)?;
        let m = g_ph.layout().modes();
        if det.re <= 0.0 || det.im.abs() > 1e-9 * det.norm() {
            return Err(Error::Numerical(format!("det(1 + G_ph) = {det} is not positive")));
        }
        let c = symmetric_part(&(swap_halves(m) * g_ph.full() * inv));
        Ok(Self { c, vacuum: 1.0 / det.re.sqrt(), modes: m, engine })
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    /// `det(1 + G_ph)^{-1/2}`, the probability of no photons.
    pub fn vacuum_probability(&self) -> f64 {
        self.vacuum
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn probability(&self, pattern: &OccupationPattern) -> Result<f64> {
        if pattern.len() != self.modes {
            return Err(Error::Dimension(format!(
                "pattern has {} entries for {} photon modes",
                pattern.len(),
                self.modes
            )));
        }
        let haf = match self.engine {
            HafnianEngine::Repeated => {
                let counts: Vec<usize> = pattern.counts().iter().chain(pattern.counts()).copied().collect();
                hafnian_repeated(&self.c, &counts)?
            }
            engine => hafnian(&expand_pattern(&self.c, pattern)?, engine)?,
        };
        let p = haf * (self.vacuum / pattern.factorial_product());
        check_probability(p)
    }
}

fn check_probability(p: C64) -> Result<f64> {
    if !p.re.is_finite() || !p.im.is_finite() {
        return Err(Error::Numerical(format!("non-finite probability {p}")));
    }
    if p.im.abs() > 1e-9 {
        return Err(Error::Numerical(format!("probability has imaginary part {:.3e}", p.im)));
    }
    if p.re < -1e-9 {
        return Err(Error::Numerical(format!("negative probability {:.3e}", p.re)));
    }
    Ok(p.re.clamp(0.0, 1.0))
}

/// `p(n) = haf(C̃) / (√det(1 + G_ph) Π n_ν!)`.
pub fn pattern_probability(g_ph: &CovarianceMatrix, pattern: &OccupationPattern) -> Result<f64> {
    pattern_probability_with(g_ph, pattern, HafnianEngine::default())
}

pub fn pattern_probability_with(
    g_ph: &CovarianceMatrix,
    pattern: &OccupationPattern,
    engine: HafnianEngine,
) -> Result<f64> {
    PatternEvaluator::new(g_ph, engine)?.probability(pattern)
}
