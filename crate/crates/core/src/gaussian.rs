//! Thermal covariance matrices and single-mode diagnostics.
//!
//! The covariance of a zero-mean Gaussian state is held as its normal block
//! `N_jk = ⟨b†_j b_k⟩` and anomalous block `A_jk = ⟨b_j b_k⟩`; the full
//! `2M × 2M` matrix is `G = [[N, A*], [A, N*]]`.

use std::path::Path;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    determinant, from_pairs, hermitian_eigen, hermitian_part, hermitian_residual, inverse,
    j_metric, max_abs, symmetric_part, symmetric_residual, to_pairs,
};
use crate::model::{GrandDynamicalMatrix, ModeLayout};
use crate::symplectic::{solve_bdg, BogoliubovTransform};
use crate::{CMat, Error, Result, C64};

/// Tolerance of the physical-validity checks on `N` and `A`.
pub const PHYSICALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    layout: ModeLayout,
    n: CMat,
    a: CMat,
}

#[derive(Serialize, Deserialize)]
struct CovarianceFile {
    m_ph: usize,
    m_at: usize,
    #[serde(rename = "N")]
    n: Vec<[f64; 2]>,
    #[serde(rename = "A")]
    a: Vec<[f64; 2]>,
}

impl CovarianceMatrix {
    pub fn new(layout: ModeLayout, n: CMat, a: CMat) -> Result<Self> {
        let m = layout.modes();
        if n.shape() != (m, m) || a.shape() != (m, m) {
            return Err(Error::Dimension(format!("N and A must be {m}x{m}")));
        }
        Ok(Self { layout, n, a })
    }

    /// Reads `N` and `A` off a full `2M × 2M` matrix, symmetrizing both.
    pub fn from_full(layout: ModeLayout, g: &CMat) -> Result<Self> {
        let m = layout.modes();
        if g.shape() != (2 * m, 2 * m) {
            return Err(Error::Dimension(format!("G must be {0}x{0}", 2 * m)));
        }
        let n = hermitian_part(&g.view((0, 0), (m, m)).into_owned());
        let a = symmetric_part(&g.view((m, 0), (m, m)).into_owned());
        Self::new(layout, n, a)
    }

    pub fn vacuum(layout: ModeLayout) -> Self {
        let m = layout.modes();
        Self { layout, n: CMat::zeros(m, m), a: CMat::zeros(m, m) }
    }

    /// Independent thermal photon modes with the given occupations.
    pub fn thermal(etas: &[f64]) -> Result<Self> {
        let layout = ModeLayout::photon_only(etas.len())?;
        let n = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            etas.len(),
            etas.iter().map(|&x| C64::new(x, 0.0)),
        ));
        Self::new(layout, n, CMat::zeros(etas.len(), etas.len()))
    }

    /// Independent single-mode squeezed vacua with squeezing parameters `r`.
    pub fn squeezed_vacuum(r: &[f64]) -> Result<Self> {
        let layout = ModeLayout::photon_only(r.len())?;
        let diag = |f: &dyn Fn(f64) -> f64| {
            CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                r.len(),
                r.iter().map(|&x| C64::new(f(x), 0.0)),
            ))
        };
        let n = diag(&|x| x.sinh().powi(2));
        let a = diag(&|x| x.sinh() * x.cosh());
        Self::new(layout, n, a)
    }

    pub fn layout(&self) -> ModeLayout {
        self.layout
    }

    pub fn n(&self) -> &CMat {
        &self.n
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn full(&self) -> CMat {
        let m = self.layout.modes();
        let mut g = CMat::zeros(2 * m, 2 * m);
        g.view_mut((0, 0), (m, m)).copy_from(&self.n);
        g.view_mut((0, m), (m, m)).copy_from(&self.a.conjugate());
        g.view_mut((m, 0), (m, m)).copy_from(&self.a);
        g.view_mut((m, m), (m, m)).copy_from(&self.n.conjugate());
        g
    }

    /// Checks Hermiticity and positivity of `N`, symmetry of `A`, and the
    /// per-mode bound `|A_jj|² ≤ N_jj (N_jj + 1)`.
    pub fn validate_physical(&self) -> Result<()> {
        let herm = hermitian_residual(&self.n);
        if herm > PHYSICALITY_TOL {
            return Err(Error::Unphysical(format!("N is not Hermitian (residual {herm:.3e})")));
        }
        let sym = symmetric_residual(&self.a);
        if sym > PHYSICALITY_TOL {
            return Err(Error::Unphysical(format!("A is not symmetric (residual {sym:.3e})")));
        }
        let (ev, _) = hermitian_eigen(&self.n);
        if let Some(&low) = ev.first() {
            if low < -PHYSICALITY_TOL {
                return Err(Error::Unphysical(format!("N has negative eigenvalue {low:.3e}")));
            }
        }
        for j in 0..self.layout.modes() {
            let eta = self.n[(j, j)].re;
            let alpha = self.a[(j, j)].norm();
            if alpha * alpha > eta * (eta + 1.0) + 1e-9 {
                return Err(Error::Unphysical(format!(
                    "mode {j}: |alpha| = {alpha} exceeds alpha_max = {}",
                    (eta * (eta + 1.0)).sqrt()
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: CovarianceFile = serde_json::from_str(s)?;
        let layout = ModeLayout::new(raw.m_ph, raw.m_at)
            .map_err(|e| Error::Ingest(format!("covariance layout: {e}")))?;
        let m = layout.modes();
        let n = from_pairs(m, m, &raw.n, "N")?;
        let a = from_pairs(m, m, &raw.a, "A")?;
        Self::new(layout, n, a)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let raw = CovarianceFile {
            m_ph: self.layout.m_ph(),
            m_at: self.layout.m_at(),
            n: to_pairs(&self.n),
            a: to_pairs(&self.a),
        };
        Ok(serde_json::to_string_pretty(&raw)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

fn occupations(energies: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!("temperature must be finite and >= 0, got {temperature}")));
    }
    energies
        .iter()
        .map(|&e| {
            if temperature == 0.0 {
                Ok(0.0)
            } else if e <= 0.0 {
                Err(Error::DivergentOccupation { energy: e, temperature })
            } else {
                Ok(1.0 / (e / temperature).exp_m1())
            }
        })
        .collect()
}

/// `G = R diag(n, n) R† + (R R† - 1)/2` with Bose-Einstein occupations `n`.
pub fn covariance_from_quasiparticles(t: &BogoliubovTransform, temperature: f64) -> Result<CovarianceMatrix> {
    let occ = occupations(t.energies(), temperature)?;
    let m = t.layout().modes();
    let r = t.r_matrix();
    let mut rn = r.clone();
    for (j, &n) in occ.iter().enumerate() {
        rn.column_mut(j).scale_mut(n + 0.5);
        rn.column_mut(j + m).scale_mut(n + 0.5);
    }
    // R diag(n + 1/2) R† - 1/2 is the same expression regrouped
    let mut g = rn * r.adjoint();
    for i in 0..2 * m {
        g[(i, i)] -= 0.5;
    }
    CovarianceMatrix::from_full(t.layout(), &g)
}

/// Thermal covariance of `H` at temperature `T` via the Bogoliubov route.
pub fn thermal_covariance(h: &GrandDynamicalMatrix, temperature: f64) -> Result<CovarianceMatrix> {
    covariance_from_quasiparticles(&solve_bdg(h)?, temperature)
}

/// `G = ½ coth(J H / 2T) J - ½`.
///
/// The matrix function is evaluated through the similarity
/// `J H = L^{-†} (L† J L) L†` with `H = L L†`, which reduces it to a scalar
/// function of the Hermitian matrix `L† J L`.
pub fn covariance_via_coth(h: &GrandDynamicalMatrix, temperature: f64) -> Result<CovarianceMatrix> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!("coth route needs T > 0, got {temperature}")));
    }
    let m = h.layout().modes();
    let chol = Cholesky::new(hermitian_part(h.matrix()))
        .ok_or_else(|| Error::Domain("H is not positive definite; no thermal state exists".into()))?;
    let l = chol.l();
    let w = l.adjoint() * j_metric(m) * &l;
    let (values, vectors) = hermitian_eigen(&w);
    if let Some(e) = values.iter().find(|e| e.abs() <= 1e-10 * max_abs(h.matrix())) {
        return Err(Error::Domain(format!("J H has eigenvalue {e:.3e} too close to zero")));
    }
    let mut f = vectors.clone();
    for (j, &e) in values.iter().enumerate() {
        f.column_mut(j).scale_mut(1.0 / (e / (2.0 * temperature)).tanh());
    }
    let coth_w = f * vectors.adjoint();
    let l_adj_inv = l
        .adjoint()
        .solve_upper_triangular(&CMat::identity(2 * m, 2 * m))
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let mut g = (l_adj_inv * coth_w * l.adjoint() * j_metric(m)).scale(0.5);
    for i in 0..2 * m {
        g[(i, i)] -= 0.5;
    }
    CovarianceMatrix::from_full(h.layout(), &g)
}

/// The photon-photon sub-blocks as a standalone photon-only covariance.
pub fn marginal_photon(g: &CovarianceMatrix) -> CovarianceMatrix {
    let p = g.layout().m_ph();
    let layout = ModeLayout::photon_only(p).expect("m_ph >= 1 by construction");
    CovarianceMatrix {
        layout,
        n: g.n.view((0, 0), (p, p)).into_owned(),
        a: g.a.view((0, 0), (p, p)).into_owned(),
    }
}

/// `Θ(z) = det(1+G)^{-1/2} det(1 - Z G(1+G)^{-1})^{-1/2}`, `Z = diag(z, z)`.
///
/// The two determinants combine into `det(1 + (1 - Z) G)^{-1/2}`, whose
/// square-root branch is continued along the segment from `z = (1, …, 1)`,
/// where it equals 1.
pub fn characteristic_function(g: &CovarianceMatrix, z: &[C64]) -> Result<C64> {
    let m = g.layout().modes();
    if z.len() != m {
        return Err(Error::Dimension(format!("expected {m} arguments, got {}", z.len())));
    }
    let full = g.full();
    let one_plus = &full + CMat::identity(2 * m, 2 * m);
    if determinant(&one_plus).norm() < 1e-300 {
        return Err(Error::Domain("1 + G is singular".into()));
    }
    let det_at = |t: f64| -> C64 {
        let mut a = CMat::identity(2 * m, 2 * m);
        for i in 0..2 * m {
            let zi = C64::new(1.0, 0.0) + (z[i % m] - 1.0) * t;
            let w = C64::new(1.0, 0.0) - zi;
            for k in 0..2 * m {
                a[(i, k)] += w * full[(i, k)];
            }
        }
        determinant(&a)
    };
    let mut root = C64::new(1.0, 0.0);
    let mut t0: f64 = 0.0;
    let mut d0 = C64::new(1.0, 0.0);
    let mut step: f64 = 0.25;
    while t0 < 1.0 {
        let t1 = (t0 + step).min(1.0);
        let d1 = det_at(t1);
        if d1.norm() < 1e-300 {
            return Err(Error::Domain("1 + (1 - Z) G is singular on the continuation path".into()));
        }
        let ratio = d1 / d0;
        if ratio.arg().abs() > std::f64::consts::FRAC_PI_8 && step > 1e-12 {
            step *= 0.5;
            continue;
        }
        root *= ratio.sqrt();
        t0 = t1;
        d0 = d1;
        step = (step * 2.0).min(0.25);
    }
    Ok(C64::new(1.0, 0.0) / root)
}

/// Single-mode correlators and the derived squeezing diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleModeStats {
    pub eta: f64,
    pub alpha: C64,
    pub alpha_c: f64,
    pub alpha_max: f64,
    pub r_eff: f64,
    pub q_eff: f64,
}

impl SingleModeStats {
    pub fn from_correlators(eta: f64, alpha: C64) -> Result<Self> {
        let alpha_max = (eta * eta + eta).max(0.0).sqrt();
        let abs = alpha.norm();
        if abs * abs > eta * (eta + 1.0) + 1e-9 {
            return Err(Error::Unphysical(format!(
                "|alpha| = {abs} exceeds alpha_max = {alpha_max}"
            )));
        }
        let ratio = (abs / (eta + 0.5)).min(1.0);
        let q = ((eta + 0.5).powi(2) - abs * abs).max(0.0).sqrt() - 0.5;
        Ok(Self {
            eta,
            alpha,
            alpha_c: (eta * eta + 0.5 * eta).max(0.0).sqrt(),
            alpha_max,
            r_eff: 0.5 * ratio.atanh(),
            q_eff: q.max(0.0),
        })
    }

    pub fn alpha_abs(&self) -> f64 {
        self.alpha.norm()
    }
}

pub fn single_mode_stats(g_ph: &CovarianceMatrix, mode: usize) -> Result<SingleModeStats> {
    if mode >= g_ph.layout().m_ph() {
        return Err(Error::Dimension(format!(
            "mode {mode} out of range for {} photon modes",
            g_ph.layout().m_ph()
        )));
    }
    SingleModeStats::from_correlators(g_ph.n[(mode, mode)].re, g_ph.a[(mode, mode)])
}

/// Inverse of `1 + G` and its determinant, shared by the probability code.
pub(crate) fn one_plus_g(g: &CovarianceMatrix) -> Result<(CMat, C64)> {
    let m = g.layout().modes();
    let one_plus = g.full() + CMat::identity(2 * m, 2 * m);
    let det = determinant(&one_plus);
    Ok((inverse(&one_plus, "1 + G")?, det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::model::{build_toy_hamiltonian, ToyParams};

    fn toy(gamma: f64) -> GrandDynamicalMatrix {
        build_toy_hamiltonian(&ToyParams { gamma, ..ToyParams::default() }).unwrap()
    }

    fn bose(e: f64, t: f64) -> f64 {
        1.0 / ((e / t).exp() - 1.0)
    }

    #[test]
    fn decoupled_thermal_modes() {
        let t = 0.7;
        let g = thermal_covariance(&toy(0.0), t).unwrap();
        assert_eq!(max_abs(g.a()), 0.0);
        assert!((g.n()[(0, 0)].re - bose(2.0, t)).abs() < 1e-15);
        assert!((g.n()[(1, 1)].re - bose(1.0, t)).abs() < 1e-15);
        assert!(g.n()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn zero_temperature_is_depletion_only() {
        let h = toy(0.8);
        let r = solve_bdg(&h).unwrap();
        let g = covariance_from_quasiparticles(&r, 0.0).unwrap();
        let rr = r.r_matrix() * r.r_matrix().adjoint();
        let want = (rr - CMat::identity(4, 4)).scale(0.5);
        assert!(max_abs_diff(&g.full(), &want) < 1e-14);
        g.validate_physical().unwrap();
    }

    #[test]
    fn divergent_occupation() {
        let layout = ModeLayout::new(1, 0).unwrap();
        let r = BogoliubovTransform::identity(layout, vec![0.0]).unwrap();
        assert!(matches!(
            covariance_from_quasiparticles(&r, 1.0),
            Err(Error::DivergentOccupation { .. })
        ));
        assert!(covariance_from_quasiparticles(&r, 0.0).is_ok());
        assert!(matches!(covariance_from_quasiparticles(&r, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn coth_single_mode_scalar() {
        let layout = ModeLayout::new(1, 0).unwrap();
        let h = GrandDynamicalMatrix::new(layout, CMat::identity(2, 2).scale(1.7)).unwrap();
        let g = covariance_via_coth(&h, 0.9).unwrap();
        assert!((g.n()[(0, 0)].re - bose(1.7, 0.9)).abs() < 1e-14);
        assert!(g.a()[(0, 0)].norm() < 1e-15);
        assert!(matches!(covariance_via_coth(&h, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn coth_matches_quasiparticle_route() {
        for gamma in [0.1, 0.5, 2.0, 7.0] {
            for t in [0.05, 0.3, 1.0, 5.0] {
                let h = toy(gamma);
                let a = covariance_via_coth(&h, t).unwrap();
                let b = thermal_covariance(&h, t).unwrap();
                assert!(max_abs_diff(&a.full(), &b.full()) < 1e-9, "gamma {gamma}, T {t}");
            }
        }
    }

    #[test]
    fn classical_limit_is_linear_in_t() {
        // coth(x/2)/2 - 1/2 = 1/x - 1/2 + x/12 + O(x^3)
        let layout = ModeLayout::new(1, 0).unwrap();
        let w = 1.3;
        let h = GrandDynamicalMatrix::new(layout, CMat::identity(2, 2).scale(w)).unwrap();
        let t = 100.0 * w;
        let g = covariance_via_coth(&h, t).unwrap();
        let x = w / t;
        let series = 1.0 / x - 0.5 + x / 12.0;
        assert!((g.n()[(0, 0)].re - series).abs() < 1e-8);
    }

    #[test]
    fn marginal_cases() {
        let g = CovarianceMatrix::thermal(&[0.3, 0.4]).unwrap();
        assert_eq!(marginal_photon(&g), g);
        let full = thermal_covariance(&toy(1.0), 0.4).unwrap();
        let ph = marginal_photon(&full);
        assert_eq!(ph.layout().modes(), 1);
        assert_eq!(ph.n()[(0, 0)], full.n()[(0, 0)]);
        assert_eq!(ph.a()[(0, 0)], full.a()[(0, 0)]);
        ph.validate_physical().unwrap();
    }

    #[test]
    fn no_corotating_coupling_gives_thermal_photons() {
        use crate::model::{assemble_grand_matrix, toy_blocks};
        let (mut b, layout) = toy_blocks(&ToyParams { gamma: 0.6, ..ToyParams::default() }).unwrap();
        b.s_at_ph = CMat::zeros(1, 1);
        let h = assemble_grand_matrix(&b, layout).unwrap();
        for t in [0.0, 0.3] {
            let g = marginal_photon(&thermal_covariance(&h, t).unwrap());
            assert!(g.a()[(0, 0)].norm() <= 1e-12, "T {t}: {}", g.a()[(0, 0)]);
        }
    }

    #[test]
    fn characteristic_function_values() {
        let g = CovarianceMatrix::thermal(&[0.6]).unwrap();
        let one = characteristic_function(&g, &[C64::new(1.0, 0.0)]).unwrap();
        assert!((one - 1.0).norm() < 1e-14);
        for z in [C64::new(0.3, 0.0), C64::new(-0.8, 0.1), C64::from_polar(1.0, 2.5)] {
            let got = characteristic_function(&g, &[z]).unwrap();
            let want = 1.0 / (1.0 + 0.6 * (1.0 - z));
            assert!((got - want).norm() < 1e-13, "z = {z}");
        }
        let h = thermal_covariance(&toy(2.0), 0.5).unwrap();
        let z = [C64::new(0.2, 0.7), C64::new(-0.6, -0.3)];
        assert!(characteristic_function(&h, &z).unwrap().norm() <= 1.0);
        assert!(characteristic_function(&h, &z[..1]).is_err());
    }

    #[test]
    fn single_mode_diagnostics() {
        let s = SingleModeStats::from_correlators(0.0, C64::new(0.0, 0.0)).unwrap();
        assert_eq!((s.r_eff, s.q_eff), (0.0, 0.0));
        let eta: f64 = 0.7;
        let s = SingleModeStats::from_correlators(eta, C64::new((eta * eta + eta).sqrt(), 0.0)).unwrap();
        assert!(s.q_eff.abs() < 1e-12);
        let s = SingleModeStats::from_correlators(1.0, C64::new(0.0, 0.0)).unwrap();
        assert!((s.alpha_c - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((s.alpha_max - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            SingleModeStats::from_correlators(1.0, C64::new(1.5, 0.0)),
            Err(Error::Unphysical(_))
        ));
        // squeezed thermal state: eta = (q+1/2) cosh 2r - 1/2, |alpha| = (q+1/2) sinh 2r
        let (q, r): (f64, f64) = (0.4, 0.3);
        let eta = (q + 0.5) * (2.0 * r).cosh() - 0.5;
        let alpha = (q + 0.5) * (2.0 * r).sinh();
        let s = SingleModeStats::from_correlators(eta, C64::new(0.0, alpha)).unwrap();
        assert!((s.q_eff - q).abs() < 1e-14);
        assert!((s.r_eff - r).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip_and_corruption() {
        let g = thermal_covariance(&toy(1.2), 0.3).unwrap();
        let back = CovarianceMatrix::from_json_str(&g.to_json_string().unwrap()).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"m_ph":1,"m_at":0,"N":[[1.0,0.0]],"A":[[1.5,0.0]]}"#;
        let g = CovarianceMatrix::from_json_str(bad).unwrap();
        assert!(matches!(g.validate_physical(), Err(Error::Unphysical(_))));
        let short = r#"{"m_ph":2,"m_at":0,"N":[[1.0,0.0]],"A":[[0.0,0.0]]}"#;
        assert!(matches!(CovarianceMatrix::from_json_str(short), Err(Error::Ingest(_))));
    }

    #[test]
    fn monotone_in_temperature() {
        let h = toy(1.5);
        let mut prev = thermal_covariance(&h, 0.0).unwrap();
        for t in [0.1, 0.2, 0.5, 1.0, 2.0] {
            let g = thermal_covariance(&h, t).unwrap();
            for j in 0..2 {
                assert!(g.n()[(j, j)].re >= prev.n()[(j, j)].re - 1e-14);
            }
            prev = g;
        }
    }
}
