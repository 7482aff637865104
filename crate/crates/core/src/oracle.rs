//! Reference engines for photon-count probabilities.
//!
//! [`fock_density_matrix`] builds `exp(-H_eff/T)` on a truncated number-state
//! basis, and [`series_probabilities`] extracts Taylor coefficients of the
//! characteristic function by discrete Fourier inversion on a polycircle.
//! Neither shares code with the hafnian route beyond the covariance input.

use nalgebra::DMatrix;
use rustfft::FftPlanner;

use crate::gaussian::{characteristic_function, marginal_photon, CovarianceMatrix};
use crate::hafnian::OccupationPattern;
use crate::linalg::{hermitian_eigen, hermitian_residual, inverse, real_symmetric_eigen};
use crate::model::{GrandDynamicalMatrix, ModeLayout};
use crate::sampler::{patterns_up_to, ProbabilityTable};
use crate::{CMat, Error, Result, C64};

/// Hard limit on the truncated Hilbert-space dimension.
pub const FOCK_DIMENSION_LIMIT: usize = 1 << 24;
/// Largest dimension for which the dense eigendecomposition is attempted.
pub const DENSE_DIMENSION_LIMIT: usize = 4913;
/// Boundary-shell probability accepted after escalation.
pub const LEAKAGE_TOL: f64 = 1e-8;
/// Per-pattern change between cutoffs `c` and `c + 4` accepted by escalation.
pub const DRIFT_TOL: f64 = 1e-8;
/// Radius of the polycircle used by the series oracle.
pub const SERIES_RADIUS: f64 = 0.5;
/// Largest total number of polycircle points.
pub const SERIES_POINT_LIMIT: usize = 1 << 22;

/// Per-mode number cutoff of the truncated Fock space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    cutoff_per_mode: usize,
    dimension: usize,
}

impl FockTruncation {
    pub fn new(cutoff_per_mode: usize, modes: usize) -> Result<Self> {
        if cutoff_per_mode == 0 {
            return Err(Error::Domain("Fock cutoff must be positive".into()));
        }
        let dimension = (0..modes)
            .try_fold(1usize, |acc, _| acc.checked_mul(cutoff_per_mode + 1))
            .filter(|&d| d <= FOCK_DIMENSION_LIMIT)
            .ok_or_else(|| {
                Error::Size(format!(
                    "Fock space with cutoff {cutoff_per_mode} over {modes} modes exceeds {FOCK_DIMENSION_LIMIT} states"
                ))
            })?;
        Ok(Self { cutoff_per_mode, dimension })
    }

    pub fn cutoff_per_mode(&self) -> usize {
        self.cutoff_per_mode
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

/// Density operator on a truncated Fock space, mode 0 most significant.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    layout: ModeLayout,
    trunc: FockTruncation,
    rho: CMat,
}

impl DensityOperator {
    pub fn layout(&self) -> ModeLayout {
        self.layout
    }

    pub fn truncation(&self) -> FockTruncation {
        self.trunc
    }

    pub fn matrix(&self) -> &CMat {
        &self.rho
    }

    fn base(&self) -> usize {
        self.trunc.cutoff_per_mode + 1
    }

    fn stride(&self, mode: usize) -> usize {
        self.base().pow((self.layout.modes() - 1 - mode) as u32)
    }

    fn digit(&self, state: usize, mode: usize) -> usize {
        state / self.stride(mode) % self.base()
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermitian_residual(&self.rho)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.rho).0[0]
    }

    /// Probability that some mode sits at the cutoff.
    pub fn leakage(&self) -> f64 {
        let c = self.trunc.cutoff_per_mode;
        (0..self.trunc.dimension)
            .filter(|&s| (0..self.layout.modes()).any(|m| self.digit(s, m) == c))
            .map(|s| self.rho[(s, s)].re)
            .sum()
    }

    /// `⟨a†a⟩` and `⟨aa⟩` of one mode.
    pub fn moments(&self, mode: usize) -> (f64, C64) {
        let stride = self.stride(mode);
        let mut eta = 0.0;
        let mut alpha = C64::new(0.0, 0.0);
        for s in 0..self.trunc.dimension {
            let n = self.digit(s, mode);
            eta += n as f64 * self.rho[(s, s)].re;
            if n >= 2 {
                alpha += self.rho[(s, s - 2 * stride)] * ((n * (n - 1)) as f64).sqrt();
            }
        }
        (eta, alpha)
    }

    /// `⟨a†a†aa⟩` of one mode.
    pub fn second_factorial_moment(&self, mode: usize) -> f64 {
        (0..self.trunc.dimension)
            .map(|s| {
                let n = self.digit(s, mode) as f64;
                n * (n - 1.0) * self.rho[(s, s)].re
            })
            .sum()
    }

    /// Probability of a photon pattern with the atomic modes traced out.
    pub fn photon_probability(&self, pattern: &OccupationPattern) -> Result<f64> {
        let p = self.layout.m_ph();
        if pattern.len() != p {
            return Err(Error::Dimension(format!("pattern has {} entries for {p} photon modes", pattern.len())));
        }
        let c = self.trunc.cutoff_per_mode;
        if pattern.counts().iter().any(|&n| n > c) {
            return Ok(0.0);
        }
        if pattern.counts().iter().any(|&n| n == c) {
            log::debug!("pattern {pattern} touches the Fock cutoff {c}");
        }
        let offset: usize = pattern.counts().iter().enumerate().map(|(m, &n)| n * self.stride(m)).sum();
        let atoms = self.base().pow(self.layout.m_at() as u32);
        Ok((0..atoms).map(|k| self.rho[(offset + k, offset + k)].re).sum())
    }
}

/// Photon-pattern probability from a Fock-space density operator.
pub fn oracle_probability(rho: &DensityOperator, pattern: &OccupationPattern) -> Result<f64> {
    rho.photon_probability(pattern)
}

/// `Tr(ρ a†a)` and `Tr(ρ aa)` for a photon mode.
pub fn photon_moments(rho: &DensityOperator, mode: usize) -> Result<(f64, C64)> {
    if mode >= rho.layout.m_ph() {
        return Err(Error::Dimension(format!("photon mode {mode} out of range")));
    }
    Ok(rho.moments(mode))
}

/// Matrix of `H_eff = ½ Σ H_ij γ_i† γ_j` with `γ = (a†, a)` on the truncated
/// basis. Products `a_i a†_j` are normal ordered first (dropping the
/// constant), so the truncation never lowers the energy of boundary states.
fn hamiltonian_matrix(h: &GrandDynamicalMatrix, trunc: FockTruncation) -> CMat {
    let m = h.layout().modes();
    let base = trunc.cutoff_per_mode + 1;
    let dim = trunc.dimension;
    let strides: Vec<usize> = (0..m).map(|k| base.pow((m - 1 - k) as u32)).collect();
    // (mode, raising) for γ_j, and for γ_i†
    let gamma = |j: usize| if j < m { (j, true) } else { (j - m, false) };
    let dagger = |i: usize| if i < m { (i, false) } else { (i - m, true) };
    let apply = |state: usize, (mode, raise): (usize, bool)| -> Option<(usize, f64)> {
        let n = state / strides[mode] % base;
        if raise {
            (n < trunc.cutoff_per_mode).then(|| (state + strides[mode], ((n + 1) as f64).sqrt()))
        } else {
            (n > 0).then(|| (state - strides[mode], (n as f64).sqrt()))
        }
    };
    let hm = h.matrix();
    let mut out = CMat::zeros(dim, dim);
    for i in 0..2 * m {
        for j in 0..2 * m {
            let w = hm[(i, j)];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for s in 0..dim {
                let (first, second) = if i < m && j < m {
                    (dagger(i), gamma(j))
                } else {
                    (gamma(j), dagger(i))
                };
                let Some((s1, a1)) = apply(s, first) else { continue };
                let Some((s2, a2)) = apply(s1, second) else { continue };
                out[(s2, s)] += w * (0.5 * a1 * a2);
            }
        }
    }
    out
}

/// Thermal state `exp(-H_eff/T)/Z` on the truncated space.
pub fn fock_density_matrix(h: &GrandDynamicalMatrix, temperature: f64, trunc: FockTruncation) -> Result<DensityOperator> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!("Fock oracle needs T > 0, got {temperature}")));
    }
    let layout = h.layout();
    let expected = FockTruncation::new(trunc.cutoff_per_mode, layout.modes())?;
    if expected != trunc {
        return Err(Error::Dimension("truncation was built for a different mode count".into()));
    }
    if trunc.dimension > DENSE_DIMENSION_LIMIT {
        return Err(Error::Size(format!(
            "dense Fock oracle limited to {DENSE_DIMENSION_LIMIT} states, requested {}",
            trunc.dimension
        )));
    }
    let hm = hamiltonian_matrix(h, trunc);
    let real = hm.iter().all(|z| z.im == 0.0);
    let (values, vectors) = if real {
        let (v, x) = real_symmetric_eigen(&DMatrix::from_fn(hm.nrows(), hm.ncols(), |r, c| hm[(r, c)].re));
        (v, x.map(|x| C64::new(x, 0.0)))
    } else {
        hermitian_eigen(&hm)
    };
    let e0 = values[0];
    let weights: Vec<f64> = values.iter().map(|e| (-(e - e0) / temperature).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut scaled = vectors.clone();
    for (k, w) in weights.iter().enumerate() {
        scaled.column_mut(k).scale_mut(w / z);
    }
    let rho = scaled * vectors.adjoint();
    let rho = (&rho + rho.adjoint()).scale(0.5);
    Ok(DensityOperator { layout, trunc, rho })
}

/// Result of cutoff escalation.
#[derive(Debug, Clone)]
pub struct FockSolution {
    pub rho: DensityOperator,
    /// Photon-pattern probabilities at the accepted cutoff, in
    /// [`patterns_up_to`] order.
    pub probabilities: Vec<(OccupationPattern, f64)>,
    pub drift: f64,
    pub leakage: f64,
}

/// Raises the per-mode cutoff in steps of 4 from `max(8, total_cutoff)` until
/// all photon patterns with total `≤ total_cutoff` move by less than
/// [`DRIFT_TOL`] and the leakage is below [`LEAKAGE_TOL`].
pub fn fock_oracle_auto(h: &GrandDynamicalMatrix, temperature: f64, total_cutoff: usize) -> Result<FockSolution> {
    let layout = h.layout();
    let patterns = patterns_up_to(layout.m_ph(), total_cutoff);
    let eval = |c: usize| -> Result<(DensityOperator, Vec<f64>)> {
        let rho = fock_density_matrix(h, temperature, FockTruncation::new(c, layout.modes())?)?;
        let probs = patterns.iter().map(|p| rho.photon_probability(p)).collect::<Result<Vec<_>>>()?;
        Ok((rho, probs))
    };
    let mut cutoff = total_cutoff.max(8);
    let mut prev = eval(cutoff)?;
    loop {
        let next_cutoff = cutoff + 4;
        let fits = FockTruncation::new(next_cutoff, layout.modes())
            .map(|t| t.dimension() <= DENSE_DIMENSION_LIMIT)
            .unwrap_or(false);
        if !fits {
            return Err(Error::Cutoff(format!(
                "no converged cutoff up to {cutoff} (leakage {:.3e})",
                prev.0.leakage()
            )));
        }
        let next = eval(next_cutoff)?;
        let drift = prev.1.iter().zip(&next.1).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let leakage = next.0.leakage();
        log::debug!("Fock cutoff {next_cutoff}: drift {drift:.3e}, leakage {leakage:.3e}");
        if drift < DRIFT_TOL && leakage <= LEAKAGE_TOL {
            let probabilities = patterns.into_iter().zip(next.1).collect();
            return Ok(FockSolution { rho: next.0, probabilities, drift, leakage });
        }
        cutoff = next_cutoff;
        prev = next;
    }
}

/// Photon-pattern probabilities as Taylor coefficients of the photon
/// characteristic function, read off a roots-of-unity grid of radius
/// [`SERIES_RADIUS`] by an `m_ph`-dimensional FFT.
pub fn series_probabilities(g: &CovarianceMatrix, total_cutoff: usize) -> Result<ProbabilityTable> {
    let g_ph = marginal_photon(g);
    let m = g_ph.layout().modes();
    let full = g_ph.full();
    let dim = 2 * m;
    inverse(&(&full + CMat::identity(dim, dim)), "1 + G")?;
    // G is Hermitian, so G(1+G)^{-1} has eigenvalues g/(1+g)
    let radius = hermitian_eigen(&full).0.iter().fold(0.0f64, |a, g| a.max((g / (1.0 + g)).abs()));
    if radius >= 1.0 {
        return Err(Error::Domain(format!(
            "spectral radius of G(1+G)^-1 is {radius:.6}; the generating series does not converge"
        )));
    }
    let n = total_cutoff + 51;
    let points = (0..m)
        .try_fold(1usize, |acc, _| acc.checked_mul(n))
        .filter(|&p| p <= SERIES_POINT_LIMIT)
        .ok_or_else(|| Error::Size(format!("series grid {n}^{m} exceeds {SERIES_POINT_LIMIT} points")))?;

    let root = |k: usize| C64::from_polar(SERIES_RADIUS, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
    let mut values = Vec::with_capacity(points);
    let mut z = vec![C64::new(0.0, 0.0); m];
    for flat in 0..points {
        let mut rest = flat;
        for axis in (0..m).rev() {
            z[axis] = root(rest % n);
            rest /= n;
        }
        values.push(characteristic_function(&g_ph, &z)?);
    }

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    for axis in 0..m {
        let stride = n.pow((m - 1 - axis) as u32);
        let mut line = vec![C64::new(0.0, 0.0); n];
        for start in 0..points {
            if (start / stride) % n != 0 {
                continue;
            }
            for (t, v) in line.iter_mut().enumerate() {
                *v = values[start + t * stride];
            }
            fft.process(&mut line);
            for (t, v) in line.iter().enumerate() {
                values[start + t * stride] = *v;
            }
        }
    }

    let norm = 1.0 / points as f64;
    let entries = patterns_up_to(m, total_cutoff)
        .into_iter()
        .map(|p| {
            let flat = p.counts().iter().fold(0, |acc, &c| acc * n + c);
            let coeff = values[flat] * norm;
            let prob = coeff.re / SERIES_RADIUS.powi(p.total() as i32);
            (p, prob.max(0.0))
        })
        .collect();
    ProbabilityTable::new(entries, total_cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_toy_hamiltonian, ToyParams};

    fn single_mode(w: f64) -> GrandDynamicalMatrix {
        let layout = ModeLayout::new(1, 0).unwrap();
        GrandDynamicalMatrix::new(layout, CMat::identity(2, 2).scale(w)).unwrap()
    }

    #[test]
    fn thermal_single_mode() {
        let (w, t) = (1.0, 0.8);
        let rho = fock_density_matrix(&single_mode(w), t, FockTruncation::new(40, 1).unwrap()).unwrap();
        let x: f64 = (-w / t).exp();
        for n in 0..10 {
            let want = (1.0 - x) * x.powi(n as i32);
            assert!((rho.matrix()[(n, n)].re - want).abs() < 1e-12);
        }
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(rho.hermiticity_residual() < 1e-14);
        let eta = x / (1.0 - x);
        let p = oracle_probability(&rho, &OccupationPattern(vec![3])).unwrap();
        assert!((p - eta.powi(3) / (1.0 + eta).powi(4)).abs() < 1e-12);
    }

    #[test]
    fn decoupled_toy_is_product_state() {
        let p = ToyParams { gamma: 0.0, ..ToyParams::default() };
        let h = build_toy_hamiltonian(&p).unwrap();
        let rho = fock_density_matrix(&h, 0.5, FockTruncation::new(20, 2).unwrap()).unwrap();
        let (xp, xa): (f64, f64) = ((-2.0f64 / 0.5).exp(), (-1.0f64 / 0.5).exp());
        // basis index = 21 n_ph + n_at
        for (np, na) in [(0, 0), (1, 0), (0, 2), (2, 3)] {
            let want = (1.0 - xp) * xp.powi(np) * (1.0 - xa) * xa.powi(na);
            let s = 21 * np as usize + na as usize;
            assert!((rho.matrix()[(s, s)].re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_guards() {
        assert!(FockTruncation::new(0, 1).is_err());
        assert!(matches!(FockTruncation::new(4096, 2), Err(Error::Size(_))));
        assert_eq!(FockTruncation::new(16, 3).unwrap().dimension(), 4913);
        let h = single_mode(1.0);
        assert!(matches!(fock_density_matrix(&h, 0.0, FockTruncation::new(4, 1).unwrap()), Err(Error::Domain(_))));
    }

    #[test]
    fn series_thermal_and_vacuum() {
        let g = CovarianceMatrix::thermal(&[0.0]).unwrap();
        let t = series_probabilities(&g, 6).unwrap();
        assert!((t.entries()[0].1 - 1.0).abs() < 1e-14);
        assert!(t.entries()[1..].iter().all(|(_, p)| p.abs() < 1e-14));

        let eta = 0.9;
        let g = CovarianceMatrix::thermal(&[eta]).unwrap();
        let t = series_probabilities(&g, 12).unwrap();
        for (p, prob) in t.entries() {
            let n = p.total() as i32;
            assert!((prob - eta.powi(n) / (1.0 + eta).powi(n + 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn fock_moments_match_covariance() {
        use crate::gaussian::thermal_covariance;
        let p = ToyParams { gamma: 0.5, ..ToyParams::default() };
        let h = build_toy_hamiltonian(&p).unwrap();
        let rho = fock_density_matrix(&h, 0.3, FockTruncation::new(16, 2).unwrap()).unwrap();
        let g = thermal_covariance(&h, 0.3).unwrap();
        let (eta, alpha) = photon_moments(&rho, 0).unwrap();
        assert!((eta - g.n()[(0, 0)].re).abs() < 1e-6);
        assert!((alpha - g.a()[(0, 0)]).norm() < 1e-6);
        // Wick: <a†a†aa> = 2 eta^2 + |alpha|^2
        let f2 = rho.second_factorial_moment(0);
        assert!((f2 - (2.0 * eta * eta + alpha.norm_sqr())).abs() < 1e-6);
    }
}
