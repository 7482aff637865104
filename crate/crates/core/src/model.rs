//! Construction of grand-dynamical matrices.
//!
//! A quadratic bosonic Hamiltonian over `M = m_ph + m_at` fluctuation modes is
//! written as `½ γ† H γ` with the creator-first operator vector
//! `γ = (a†_1..a†_mph, A†_1..A†_mat, a_1..a_mph, A_1..A_mat)`, so that the
//! `2M × 2M` Hermitian matrix `H` carries co-rotating blocks on its diagonal
//! super-blocks and counter-rotating (pair creation/annihilation) blocks on its
//! anti-diagonal super-blocks. Photon modes always precede atomic modes.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_part, hermitian_residual, max_abs, ZERO};
use crate::{CMat, Error, Result, C64};

/// Number of quantum photon modes and excited atomic modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeLayout {
    m_ph: usize,
    m_at: usize,
}

impl ModeLayout {
    pub fn new(m_ph: usize, m_at: usize) -> Result<Self> {
        if m_ph == 0 {
            return Err(Error::Domain("at least one photon mode is required".into()));
        }
        Ok(Self { m_ph, m_at })
    }

    pub fn photon_only(m_ph: usize) -> Result<Self> {
        Self::new(m_ph, 0)
    }

    pub fn m_ph(&self) -> usize {
        self.m_ph
    }

    pub fn m_at(&self) -> usize {
        self.m_at
    }

    /// Total number of fluctuation modes `M`.
    pub fn modes(&self) -> usize {
        self.m_ph + self.m_at
    }

    /// Order `2M` of the grand-dynamical and covariance matrices.
    pub fn dim(&self) -> usize {
        2 * self.modes()
    }

    pub fn photon_index(&self, nu: usize) -> usize {
        debug_assert!(nu < self.m_ph);
        nu
    }

    pub fn atom_index(&self, j: usize) -> usize {
        debug_assert!(j < self.m_at);
        self.m_ph + j
    }
}

/// Parameters of the two-mode (one photon, one atom) toy Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    /// Bare photon energy.
    pub hbar_omega: f64,
    /// Bare atomic energy.
    pub epsilon: f64,
    /// Atom-photon interaction strength.
    pub gamma: f64,
    /// Condensate occupation.
    pub n0: f64,
    /// Photon number of the coherent mode.
    pub q0: f64,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self { hbar_omega: 2.0, epsilon: 1.0, gamma: 0.5, n0: 1.0, q0: 7.0 }
    }
}

impl ToyParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.hbar_omega, self.epsilon, self.gamma, self.n0, self.q0]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Domain("toy parameters must be finite".into()));
        }
        if self.hbar_omega <= 0.0 || self.epsilon <= 0.0 {
            return Err(Error::Domain(format!(
                "bare energies must be positive (hbar_omega = {}, epsilon = {})",
                self.hbar_omega, self.epsilon
            )));
        }
        if self.n0 <= 0.0 || self.q0 <= 0.0 {
            return Err(Error::Domain(format!(
                "occupations must be positive (n0 = {}, q0 = {})",
                self.n0, self.q0
            )));
        }
        Ok(())
    }

    fn photon_shift(&self) -> f64 {
        2.0 * self.gamma * (self.n0 / self.q0).sqrt()
    }

    fn atom_shift(&self) -> f64 {
        2.0 * self.gamma * (self.q0 / self.n0).sqrt()
    }
}

/// Hermitian `2M × 2M` coefficient matrix of a quadratic Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct GrandDynamicalMatrix {
    layout: ModeLayout,
    matrix: CMat,
    symmetrization_residual: f64,
}

impl GrandDynamicalMatrix {
    /// Wraps a matrix as-is; Hermiticity is checked by the consumers.
    pub fn new(layout: ModeLayout, matrix: CMat) -> Result<Self> {
        if matrix.shape() != (layout.dim(), layout.dim()) {
            return Err(Error::Dimension(format!(
                "grand-dynamical matrix must be {0}x{0}, got {1}x{2}",
                layout.dim(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { layout, matrix, symmetrization_residual: 0.0 })
    }

    pub fn layout(&self) -> ModeLayout {
        self.layout
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// Largest entry magnitude, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// `max |H - H†|` before the assembly symmetrization (zero for matrices
    /// that were not produced by [`assemble_grand_matrix`]).
    pub fn symmetrization_residual(&self) -> f64 {
        self.symmetrization_residual
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermitian_residual(&self.matrix)
    }

    /// Deviation from the particle-hole block structure
    /// `H22 = conj(H11)`, `H21 = conj(H12)`.
    pub fn structure_residual(&self) -> f64 {
        let m = self.layout.modes();
        let h = &self.matrix;
        let mut worst: f64 = 0.0;
        for r in 0..m {
            for c in 0..m {
                worst = worst.max((h[(r + m, c + m)] - h[(r, c)].conj()).norm());
                worst = worst.max((h[(r + m, c)] - h[(r, c + m)].conj()).norm());
            }
        }
        worst
    }

    /// The photon-photon counter-rotating sub-blocks, which must vanish.
    pub fn photon_counter_rotating_max(&self) -> f64 {
        let m = self.layout.modes();
        let p = self.layout.m_ph();
        let mut worst: f64 = 0.0;
        for r in 0..p {
            for c in 0..p {
                worst = worst.max(self.matrix[(r, c + m)].norm());
                worst = worst.max(self.matrix[(r + m, c)].norm());
            }
        }
        worst
    }
}

/// Co- and counter-rotating blocks of the effective Hamiltonian.
///
/// `eps_ph` holds the (rotating-frame) bare photon energies. Shapes:
/// `s_ph` and `eps_ph` are `m_ph × m_ph`, `s_at_ph`/`s_at_ph_tilde` are
/// `m_ph × m_at`, `eps_at_plus_s_at`/`s_at_tilde` are `m_at × m_at`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianBlocks {
    pub eps_ph: DVector<f64>,
    pub s_ph: CMat,
    pub s_at_ph: CMat,
    pub s_at_ph_tilde: CMat,
    pub eps_at_plus_s_at: CMat,
    pub s_at_tilde: CMat,
}

impl HamiltonianBlocks {
    pub fn zeros(layout: ModeLayout) -> Self {
        let (p, a) = (layout.m_ph(), layout.m_at());
        Self {
            eps_ph: DVector::zeros(p),
            s_ph: CMat::zeros(p, p),
            s_at_ph: CMat::zeros(p, a),
            s_at_ph_tilde: CMat::zeros(p, a),
            eps_at_plus_s_at: CMat::zeros(a, a),
            s_at_tilde: CMat::zeros(a, a),
        }
    }

    fn check_shapes(&self, layout: ModeLayout) -> Result<()> {
        let (p, a) = (layout.m_ph(), layout.m_at());
        let expect = [
            ("eps_ph", (self.eps_ph.len(), 1), (p, 1)),
            ("s_ph", self.s_ph.shape(), (p, p)),
            ("s_at_ph", self.s_at_ph.shape(), (p, a)),
            ("s_at_ph_tilde", self.s_at_ph_tilde.shape(), (p, a)),
            ("eps_at_plus_s_at", self.eps_at_plus_s_at.shape(), (a, a)),
            ("s_at_tilde", self.s_at_tilde.shape(), (a, a)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Dimension(format!(
                    "block {name} has shape {got:?}, layout requires {want:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Blocks of the two-mode toy Hamiltonian.
pub fn toy_blocks(p: &ToyParams) -> Result<(HamiltonianBlocks, ModeLayout)> {
    p.validate()?;
    let layout = ModeLayout::new(1, 1)?;
    let g = C64::new(p.gamma, 0.0);
    let blocks = HamiltonianBlocks {
        eps_ph: DVector::from_element(1, p.hbar_omega),
        s_ph: CMat::from_element(1, 1, C64::new(p.photon_shift(), 0.0)),
        s_at_ph: CMat::from_element(1, 1, g),
        s_at_ph_tilde: CMat::from_element(1, 1, g),
        eps_at_plus_s_at: CMat::from_element(1, 1, C64::new(p.epsilon + p.atom_shift(), 0.0)),
        s_at_tilde: CMat::zeros(1, 1),
    };
    Ok((blocks, layout))
}

/// The real `4 × 4` toy matrix over `(a†, A†, a, A)`.
pub fn build_toy_hamiltonian(p: &ToyParams) -> Result<GrandDynamicalMatrix> {
    p.validate()?;
    let w = p.hbar_omega + p.photon_shift();
    let e = p.epsilon + p.atom_shift();
    let g = p.gamma;
    #[rustfmt::skip]
    let entries = [
        w,   g,   0.0, g,
        g,   e,   g,   0.0,
        0.0, g,   w,   g,
        g,   0.0, g,   e,
    ];
    let matrix = CMat::from_row_iterator(4, 4, entries.iter().map(|&x| C64::new(x, 0.0)));
    GrandDynamicalMatrix::new(ModeLayout::new(1, 1)?, matrix)
}

/// Places the blocks into the `2M × 2M` grand-dynamical matrix and
/// symmetrizes it, recording the pre-symmetrization residual.
pub fn assemble_grand_matrix(b: &HamiltonianBlocks, layout: ModeLayout) -> Result<GrandDynamicalMatrix> {
    b.check_shapes(layout)?;
    let (p, m) = (layout.m_ph(), layout.modes());
    let mut h = CMat::zeros(2 * m, 2 * m);

    let mut co_ph = b.s_ph.clone();
    for nu in 0..p {
        co_ph[(nu, nu)] += b.eps_ph[nu];
    }

    // lower-right: co-rotating blocks as written
    h.view_mut((m, m), (p, p)).copy_from(&co_ph);
    h.view_mut((m, m + p), b.s_at_ph.shape()).copy_from(&b.s_at_ph);
    h.view_mut((m + p, m), (b.s_at_ph.ncols(), p)).copy_from(&b.s_at_ph.adjoint());
    h.view_mut((m + p, m + p), b.eps_at_plus_s_at.shape()).copy_from(&b.eps_at_plus_s_at);

    // upper-left: complex conjugates
    h.view_mut((0, 0), (p, p)).copy_from(&co_ph.conjugate());
    h.view_mut((0, p), b.s_at_ph.shape()).copy_from(&b.s_at_ph.conjugate());
    h.view_mut((p, 0), (b.s_at_ph.ncols(), p)).copy_from(&b.s_at_ph.transpose());
    h.view_mut((p, p), b.eps_at_plus_s_at.shape()).copy_from(&b.eps_at_plus_s_at.conjugate());

    // upper-right counter-rotating; photon-photon sub-block stays zero
    h.view_mut((0, m + p), b.s_at_ph_tilde.shape()).copy_from(&b.s_at_ph_tilde);
    h.view_mut((p, m), (b.s_at_ph_tilde.ncols(), p)).copy_from(&b.s_at_ph_tilde.transpose());
    h.view_mut((p, m + p), b.s_at_tilde.shape()).copy_from(&b.s_at_tilde);

    // lower-left: conjugate of upper-right
    h.view_mut((m, p), b.s_at_ph_tilde.shape()).copy_from(&b.s_at_ph_tilde.conjugate());
    h.view_mut((m + p, 0), (b.s_at_ph_tilde.ncols(), p)).copy_from(&b.s_at_ph_tilde.adjoint());
    h.view_mut((m + p, p), b.s_at_tilde.shape()).copy_from(&b.s_at_tilde.conjugate());

    let residual = hermitian_residual(&h);
    let symmetric = hermitian_part(&h);
    Ok(GrandDynamicalMatrix { layout, matrix: symmetric, symmetrization_residual: residual })
}

/// Physical constants and trap data entering the block overlap integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalInputs {
    /// Atom-pump detuning.
    pub delta_a: f64,
    pub n0: f64,
    pub q0: f64,
    /// s-wave coupling constant.
    pub g_a: f64,
    /// Chemical potential.
    pub mu: f64,
    pub mass: f64,
    #[serde(default = "unit")]
    pub hbar: f64,
    /// Rotating-frame photon energies, one per quantum photon mode.
    pub photon_energies: Vec<f64>,
    /// Trap potential sampled on the grid.
    pub v_trap: Vec<f64>,
    /// Mean noncondensate density sampled on the grid.
    pub n_ex: Vec<f64>,
}

fn unit() -> f64 {
    1.0
}

/// Spatial profiles sampled on a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapGrid {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub phi0: Vec<C64>,
    /// Excited atomic wavefunctions, one array per mode.
    pub f: Vec<Vec<C64>>,
    /// Laplacian of each `f_j` on the grid; empty means no kinetic term.
    pub laplacian_f: Vec<Vec<C64>>,
    /// Classical Rabi-frequency profile of the coherent mode.
    pub omega: Vec<C64>,
    /// Rabi profiles of the quantum photon modes, one array per mode.
    pub g: Vec<Vec<C64>>,
}

#[derive(Serialize, Deserialize)]
struct OverlapGridFile {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    phi0: Vec<[f64; 2]>,
    f: Vec<Vec<[f64; 2]>>,
    omega: Vec<[f64; 2]>,
    g: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    laplacian_f: Vec<Vec<[f64; 2]>>,
}

fn to_c(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

fn from_c(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Tolerance on the normalization and orthogonality of ingested profiles.
pub const GRID_ORTHONORMALITY_TOL: f64 = 1e-6;

impl OverlapGrid {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: OverlapGridFile = serde_json::from_str(s)?;
        Ok(Self {
            points: raw.points,
            weights: raw.weights,
            phi0: to_c(&raw.phi0),
            f: raw.f.iter().map(|v| to_c(v)).collect(),
            laplacian_f: raw.laplacian_f.iter().map(|v| to_c(v)).collect(),
            omega: to_c(&raw.omega),
            g: raw.g.iter().map(|v| to_c(v)).collect(),
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let raw = OverlapGridFile {
            points: self.points.clone(),
            weights: self.weights.clone(),
            phi0: from_c(&self.phi0),
            f: self.f.iter().map(|v| from_c(v)).collect(),
            omega: from_c(&self.omega),
            g: self.g.iter().map(|v| from_c(v)).collect(),
            laplacian_f: self.laplacian_f.iter().map(|v| from_c(v)).collect(),
        };
        Ok(serde_json::to_string(&raw)?)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn inner(&self, x: &[C64], y: &[C64]) -> C64 {
        self.weights
            .iter()
            .zip(x.iter().zip(y))
            .map(|(w, (a, b))| a.conj() * b * *w)
            .sum()
    }

    /// Checks array lengths and the orthonormality of the atomic basis.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let mut lengths = vec![
            ("points", self.points.len()),
            ("phi0", self.phi0.len()),
            ("omega", self.omega.len()),
        ];
        lengths.extend(self.f.iter().map(|v| ("f", v.len())));
        lengths.extend(self.g.iter().map(|v| ("g", v.len())));
        lengths.extend(self.laplacian_f.iter().map(|v| ("laplacian_f", v.len())));
        for (name, len) in lengths {
            if len != n {
                return Err(Error::Ingest(format!(
                    "{name} has {len} samples but the grid has {n} weights"
                )));
            }
        }
        if !self.laplacian_f.is_empty() && self.laplacian_f.len() != self.f.len() {
            return Err(Error::Ingest(format!(
                "laplacian_f has {} profiles for {} atomic modes",
                self.laplacian_f.len(),
                self.f.len()
            )));
        }

        let norm0 = self.inner(&self.phi0, &self.phi0).re;
        if (norm0 - 1.0).abs() > GRID_ORTHONORMALITY_TOL {
            return Err(Error::Ingest(format!("condensate wavefunction norm is {norm0}")));
        }
        for (j, fj) in self.f.iter().enumerate() {
            let overlap = self.inner(fj, &self.phi0).norm();
            if overlap > GRID_ORTHONORMALITY_TOL {
                return Err(Error::Ingest(format!(
                    "excited mode {j} overlaps the condensate by {overlap}"
                )));
            }
            for (k, fk) in self.f.iter().enumerate() {
                let want = if j == k { 1.0 } else { 0.0 };
                let got = self.inner(fj, fk);
                if (got - want).norm() > GRID_ORTHONORMALITY_TOL {
                    return Err(Error::Ingest(format!(
                        "excited modes ({j}, {k}) have overlap {got}, expected {want}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Quadrature approximation of every block overlap integral.
pub fn blocks_from_overlaps(
    inp: &PhysicalInputs,
    grid: &OverlapGrid,
    layout: ModeLayout,
) -> Result<HamiltonianBlocks> {
    if inp.delta_a == 0.0 || !inp.delta_a.is_finite() {
        return Err(Error::Domain("atom-pump detuning must be finite and nonzero".into()));
    }
    if inp.n0 < 1.0 || inp.q0 < 1.0 {
        return Err(Error::Domain(format!(
            "macroscopic occupations must be >= 1 (n0 = {}, q0 = {})",
            inp.n0, inp.q0
        )));
    }
    if grid.f.len() != layout.m_at() || grid.g.len() != layout.m_ph() {
        return Err(Error::Ingest(format!(
            "grid has {} atomic and {} photon profiles, layout needs {} and {}",
            grid.f.len(),
            grid.g.len(),
            layout.m_at(),
            layout.m_ph()
        )));
    }
    if inp.photon_energies.len() != layout.m_ph() {
        return Err(Error::Ingest(format!(
            "{} photon energies for {} photon modes",
            inp.photon_energies.len(),
            layout.m_ph()
        )));
    }
    let n = grid.len();
    if inp.v_trap.len() != n || inp.n_ex.len() != n {
        return Err(Error::Ingest(format!(
            "trap potential ({}) and noncondensate density ({}) must have {n} samples",
            inp.v_trap.len(),
            inp.n_ex.len()
        )));
    }
    grid.validate()?;
    if grid.laplacian_f.is_empty() && layout.m_at() > 0 {
        log::warn!("no Laplacian samples supplied; kinetic term omitted from eps_at");
    } else if layout.m_at() > 0 && inp.mass <= 0.0 {
        return Err(Error::Domain(format!("atomic mass must be positive, got {}", inp.mass)));
    }

    let (p, a) = (layout.m_ph(), layout.m_at());
    let pref = inp.hbar / inp.delta_a;
    let sqrt_n0 = inp.n0.sqrt();
    let w = &grid.weights;
    let quad = |f: &dyn Fn(usize) -> C64| -> C64 { (0..n).map(|i| f(i) * w[i]).sum() };

    let mut b = HamiltonianBlocks::zeros(layout);
    b.eps_ph = DVector::from_column_slice(&inp.photon_energies);

    for nu in 0..p {
        let g_nu = &grid.g[nu];
        for nu2 in 0..p {
            let g_nu2 = &grid.g[nu2];
            b.s_ph[(nu, nu2)] = quad(&|i| grid.phi0[i].norm_sqr() * g_nu[i].conj() * g_nu2[i])
                * (pref * inp.n0);
        }
        for j in 0..a {
            let f_j = &grid.f[j];
            b.s_at_ph[(nu, j)] = quad(&|i| {
                grid.phi0[i].conj() * grid.omega[i] * f_j[i] * g_nu[i].conj()
            }) * (pref * sqrt_n0);
            b.s_at_ph_tilde[(nu, j)] = quad(&|i| {
                grid.phi0[i].conj() * grid.omega[i].conj() * f_j[i] * g_nu[i]
            }) * (pref * sqrt_n0);
        }
    }

    let kinetic = -inp.hbar * inp.hbar / (2.0 * inp.mass);
    for j in 0..a {
        let f_j = &grid.f[j];
        for k in 0..a {
            let f_k = &grid.f[k];
            let potential = quad(&|i| {
                let v = inp.v_trap[i] - inp.mu
                    + 2.0 * inp.g_a * (inp.n0 * grid.phi0[i].norm_sqr() + inp.n_ex[i]);
                f_j[i].conj() * f_k[i] * v
            });
            let kin = if grid.laplacian_f.is_empty() {
                ZERO
            } else {
                quad(&|i| f_j[i].conj() * grid.laplacian_f[k][i]) * kinetic
            };
            let light = quad(&|i| f_j[i].conj() * grid.omega[i].norm_sqr() * f_k[i]) * pref;
            b.eps_at_plus_s_at[(j, k)] = kin + potential + light;
            b.s_at_tilde[(j, k)] = quad(&|i| f_j[i] * grid.phi0[i].conj().powu(2) * f_k[i])
                * (0.5 * inp.g_a * inp.n0);
        }
    }
    Ok(b)
}
