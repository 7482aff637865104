//! Bogoliubov transforms and their Bloch-Messiah factorization.
//!
//! A transform is stored as the pair `(U, V)` of the pseudo-unitary matrix
//! `R = [[U, V*], [V, U*]]`, whose columns are quasiparticle modes. `R`
//! satisfies `R† J R = J` and diagonalizes the grand-dynamical matrix,
//! `R† H R = diag(E, E)` and `J H R = R diag(E, -E)`.

use nalgebra::Cholesky;

use crate::linalg::{
    hermitian_eigen, hermitian_residual, j_metric, max_abs, max_abs_diff, sqrt_symmetric_unitary,
    svd_sorted, symmetric_part, unitary_polar,
};
use crate::model::{GrandDynamicalMatrix, ModeLayout};
use crate::{CMat, Error, Result, C64};

/// Relative stability margin: the smallest eigenvalue of `H` must exceed this
/// fraction of the largest entry.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Pseudo-unitarity tolerance required before a Bloch-Messiah factorization.
pub const PSEUDO_UNITARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovTransform {
    layout: ModeLayout,
    u: CMat,
    v: CMat,
    energies: Vec<f64>,
}

impl BogoliubovTransform {
    pub fn new(layout: ModeLayout, u: CMat, v: CMat, energies: Vec<f64>) -> Result<Self> {
        let m = layout.modes();
        if u.shape() != (m, m) || v.shape() != (m, m) || energies.len() != m {
            return Err(Error::Dimension(format!(
                "transform blocks must be {m}x{m} with {m} energies"
            )));
        }
        Ok(Self { layout, u, v, energies })
    }

    /// The identity transform with the given quasiparticle energies.
    pub fn identity(layout: ModeLayout, energies: Vec<f64>) -> Result<Self> {
        let m = layout.modes();
        Self::new(layout, CMat::identity(m, m), CMat::zeros(m, m), energies)
    }

    /// Splits a full `2M × 2M` matrix into `(U, V)`, reading the left half.
    pub fn from_r_matrix(layout: ModeLayout, r: &CMat, energies: Vec<f64>) -> Result<Self> {
        let m = layout.modes();
        if r.shape() != (2 * m, 2 * m) {
            return Err(Error::Dimension(format!("R must be {0}x{0}", 2 * m)));
        }
        let u = r.view((0, 0), (m, m)).into_owned();
        let v = r.view((m, 0), (m, m)).into_owned();
        Self::new(layout, u, v, energies)
    }

    pub fn layout(&self) -> ModeLayout {
        self.layout
    }

    pub fn u(&self) -> &CMat {
        &self.u
    }

    pub fn v(&self) -> &CMat {
        &self.v
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn r_matrix(&self) -> CMat {
        let m = self.layout.modes();
        let mut r = CMat::zeros(2 * m, 2 * m);
        r.view_mut((0, 0), (m, m)).copy_from(&self.u);
        r.view_mut((m, 0), (m, m)).copy_from(&self.v);
        r.view_mut((0, m), (m, m)).copy_from(&self.v.conjugate());
        r.view_mut((m, m), (m, m)).copy_from(&self.u.conjugate());
        r
    }

    /// Multiplies quasiparticle column `j` by `e^{i phases[j]}`.
    pub fn with_phases(&self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.layout.modes() {
            return Err(Error::Dimension("one phase per quasiparticle is required".into()));
        }
        let mut out = self.clone();
        for (j, &th) in phases.iter().enumerate() {
            let ph = C64::from_polar(1.0, th);
            for i in 0..self.layout.modes() {
                out.u[(i, j)] *= ph;
                out.v[(i, j)] *= ph;
            }
        }
        Ok(out)
    }

    /// Replaces `V` by `factor · V` (used to build defective transforms).
    pub fn with_scaled_v(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.v.scale_mut(factor);
        out
    }
}

/// Diagonalizes a thermodynamically stable `H` (positive definite).
///
/// Uses the Cholesky-based construction: with `H = L L†` the Hermitian
/// matrix `W = L† J L` has eigenvalues `(E, -E)`, and the columns
/// `L^{-†} x √E` for its positive eigenvectors `x` are J-orthonormal
/// quasiparticle modes, including inside degenerate subspaces.
pub fn solve_bdg(h: &GrandDynamicalMatrix) -> Result<BogoliubovTransform> {
    let layout = h.layout();
    let m = layout.modes();
    let mat = h.matrix();
    let scale = h.scale().max(f64::MIN_POSITIVE);
    let herm = hermitian_residual(mat);
    if herm > 1e-10 * scale.max(1.0) {
        return Err(Error::Domain(format!("grand-dynamical matrix is not Hermitian (residual {herm:.3e})")));
    }
    if !mat.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain("grand-dynamical matrix has non-finite entries".into()));
    }
    let (spectrum, _) = hermitian_eigen(mat);
    let lowest = spectrum[0];
    if lowest <= STABILITY_MARGIN * scale {
        return Err(Error::Unstable(format!(
            "smallest eigenvalue of H is {lowest:.6e}; the quadratic form is not positive definite"
        )));
    }
    let chol = Cholesky::new(mat.clone())
        .ok_or_else(|| Error::Unstable("Cholesky factorization of H failed".into()))?;
    let l = chol.l();
    let w = l.adjoint() * j_metric(m) * &l;
    let (values, vectors) = hermitian_eigen(&w);

    // positive eigenvalues are the top M, ascending within that half
    let l_adj_inv = l
        .adjoint()
        .solve_upper_triangular(&CMat::identity(2 * m, 2 * m))
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let mut energies = Vec::with_capacity(m);
    let mut u = CMat::zeros(m, m);
    let mut v = CMat::zeros(m, m);
    for j in 0..m {
        let e = values[m + j];
        if e <= STABILITY_MARGIN * scale {
            return Err(Error::Unstable(format!("quasiparticle energy {e:.6e} is not positive")));
        }
        let col = &l_adj_inv * vectors.column(m + j) * C64::new(e.sqrt(), 0.0);
        // canonical phase: largest |U| entry real and positive
        let pivot = (0..m)
            .max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm()).then(b.cmp(&a)))
            .expect("m >= 1");
        let phase = col[pivot].conj() / col[pivot].norm();
        for i in 0..m {
            u[(i, j)] = col[i] * phase;
            v[(i, j)] = col[m + i] * phase;
        }
        energies.push(e);
    }
    BogoliubovTransform::new(layout, u, v, energies)
}

/// Max-norm residual of `R† J R - J`, combined with the inverse identity
/// `R (J R† J) - 1`.
pub fn check_pseudo_unitarity(t: &BogoliubovTransform) -> f64 {
    let m = t.layout().modes();
    let r = t.r_matrix();
    let j = j_metric(m);
    let metric = max_abs_diff(&(r.adjoint() * &j * &r), &j);
    let inv = &j * r.adjoint() * &j;
    let recon = max_abs_diff(&(&r * inv), &CMat::identity(2 * m, 2 * m));
    metric.max(recon)
}

/// Max-norm residual of `R† H R - diag(E, E)`.
pub fn diagonalization_residual(h: &GrandDynamicalMatrix, t: &BogoliubovTransform) -> f64 {
    let m = t.layout().modes();
    let r = t.r_matrix();
    let mut d = r.adjoint() * h.matrix() * &r;
    for (j, &e) in t.energies().iter().enumerate() {
        d[(j, j)] -= e;
        d[(j + m, j + m)] -= e;
    }
    max_abs(&d)
}

/// Passive-squeezing-passive factorization `R = diag(U1, U1*) K(r) diag(U2, U2*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochMessiahFactors {
    pub u1: CMat,
    pub u2: CMat,
    /// Squeezing parameters, sorted descending.
    pub r: Vec<f64>,
}

impl BlochMessiahFactors {
    /// The symplectic matrix the factors describe.
    pub fn reconstruct(&self) -> CMat {
        let m = self.r.len();
        let ch = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            self.r.iter().map(|x| C64::new(x.cosh(), 0.0)),
        ));
        let sh = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            self.r.iter().map(|x| C64::new(x.sinh(), 0.0)),
        ));
        let u = &self.u1 * &ch * &self.u2;
        let v = self.u1.conjugate() * &sh * &self.u2;
        let mut out = CMat::zeros(2 * m, 2 * m);
        out.view_mut((0, 0), (m, m)).copy_from(&u);
        out.view_mut((m, 0), (m, m)).copy_from(&v);
        out.view_mut((0, m), (m, m)).copy_from(&v.conjugate());
        out.view_mut((m, m), (m, m)).copy_from(&u.conjugate());
        out
    }

    pub fn unitarity_residual(&self) -> f64 {
        let m = self.r.len();
        let id = CMat::identity(m, m);
        max_abs_diff(&(&self.u1 * self.u1.adjoint()), &id)
            .max(max_abs_diff(&(&self.u2 * self.u2.adjoint()), &id))
    }
}

/// Bloch-Messiah factors of a pseudo-unitary transform.
///
/// From the SVD `V = W S Y†`, the matrix `D = Wᵀ U Y` is block diagonal over
/// groups of equal singular values and, on a group with `s > 0`, equals
/// `cosh r` times a symmetric unitary `P*`. Writing `P = A²` with `A`
/// symmetric unitary gives `U1 = (W A)*`, `U2 = A† Y†`. On the null space of
/// `V` the passive part is absorbed into `U2`.
pub fn bloch_messiah(t: &BogoliubovTransform) -> Result<BlochMessiahFactors> {
    let residual = check_pseudo_unitarity(t);
    if residual > PSEUDO_UNITARITY_TOL {
        return Err(Error::Domain(format!(
            "transform is not pseudo-unitary (residual {residual:.3e})"
        )));
    }
    let m = t.layout().modes();
    let (w, s, y) = svd_sorted(t.v());
    let d = w.transpose() * t.u() * &y;
    let smax = s.first().copied().unwrap_or(0.0);

    let groups = group_indices(&s, &d, smax);
    let mut a_full = CMat::zeros(m, m);
    let mut b_full = CMat::zeros(m, m);
    for idx in groups {
        let k = idx.len();
        let sub = CMat::from_fn(k, k, |r, c| d[(idx[r], idx[c])]);
        let zero_block = idx.iter().all(|&i| s[i] <= 1e-12 * (1.0 + smax));
        let (a, b) = if zero_block {
            (CMat::identity(k, k), unitary_polar(&sub))
        } else {
            let p = CMat::from_fn(k, k, |r, c| {
                (sub[(r, c)] / (1.0 + s[idx[r]] * s[idx[r]]).sqrt()).conj()
            });
            let a = sqrt_symmetric_unitary(&unitary_polar(&symmetric_part(&p)));
            let b = a.adjoint();
            (a, b)
        };
        for (r, &ir) in idx.iter().enumerate() {
            for (c, &ic) in idx.iter().enumerate() {
                a_full[(ir, ic)] = a[(r, c)];
                b_full[(ir, ic)] = b[(r, c)];
            }
        }
    }
    let u1 = (&w * a_full).conjugate();
    let u2 = b_full * y.adjoint();
    let r = s.iter().map(|x| x.asinh()).collect();
    Ok(BlochMessiahFactors { u1, u2, r })
}

/// Connected components of "equal singular value or coupled through `D`".
fn group_indices(s: &[f64], d: &CMat, smax: f64) -> Vec<Vec<usize>> {
    let m = s.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let zero = |x: f64| x <= 1e-12 * (1.0 + smax);
    for i in 0..m {
        for j in i + 1..m {
            let same = (zero(s[i]) && zero(s[j]))
                || (s[i] - s[j]).abs() <= 1e-9 * (1.0 + s[i].max(s[j]));
            let coupled = d[(i, j)].norm() > 1e-10 || d[(j, i)].norm() > 1e-10;
            if same || coupled {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for i in 0..m {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}

/// `‖R - diag(U1, U1*) K(r) diag(U2, U2*)‖_max`.
pub fn reconstruction_residual(t: &BogoliubovTransform, f: &BlochMessiahFactors) -> f64 {
    max_abs_diff(&t.r_matrix(), &f.reconstruct())
}

/// The transform `exp(i J K)` generated by a Hermitian `K` with the
/// particle-hole block structure; it is pseudo-unitary by construction.
pub fn symplectic_from_generator(layout: ModeLayout, k: &CMat) -> Result<BogoliubovTransform> {
    let m = layout.modes();
    if k.shape() != (2 * m, 2 * m) {
        return Err(Error::Dimension(format!("generator must be {0}x{0}", 2 * m)));
    }
    let gen = (j_metric(m) * k).map(|z| z * C64::i());
    let r = gen.exp();
    BogoliubovTransform::from_r_matrix(layout, &r, vec![1.0; m])
}
