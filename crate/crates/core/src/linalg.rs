//! Small dense linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{CMat, Error, Result, C64};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `diag(+1, ..., +1, -1, ..., -1)` with `m` entries of each sign.
pub fn j_metric(m: usize) -> CMat {
    CMat::from_fn(2 * m, 2 * m, |i, k| {
        if i != k {
            ZERO
        } else if i < m {
            ONE
        } else {
            -ONE
        }
    })
}

/// Block swap `[[0, 1], [1, 0]]` acting on a `2m`-vector.
pub fn swap_halves(m: usize) -> CMat {
    CMat::from_fn(2 * m, 2 * m, |i, k| if (i + m) % (2 * m) == k { ONE } else { ZERO })
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermitian_residual(a: &CMat) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

pub fn symmetric_residual(a: &CMat) -> f64 {
    max_abs_diff(a, &a.transpose())
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn symmetric_part(a: &CMat) -> CMat {
    (a + a.transpose()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(a));
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &k| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[k]).then(i.cmp(&k)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn real_symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &k| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[k]).then(i.cmp(&k)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn inverse(a: &CMat, what: &str) -> Result<CMat> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain(format!("{what} is singular")))
}

pub fn determinant(a: &CMat) -> C64 {
    a.clone().lu().determinant()
}

/// Singular value decomposition with singular values sorted descending.
pub fn svd_sorted(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").adjoint();
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = CMat::from_fn(u.nrows(), k, |r, c| u[(r, order[c])]);
    let v = CMat::from_fn(v.nrows(), k, |r, c| v[(r, order[c])]);
    (u, s, v)
}

/// Nearest unitary matrix in Frobenius norm (unitary polar factor).
pub fn unitary_polar(a: &CMat) -> CMat {
    let (u, _, v) = svd_sorted(a);
    u * v.adjoint()
}

/// Symmetric square root of a complex symmetric unitary matrix.
///
/// A symmetric unitary `P` has commuting real and imaginary parts, so it is
/// diagonalized by a real orthogonal matrix `O`: `P = O diag(e^{iθ}) Oᵀ`. `O`
/// is read off from the real symmetric Cayley transform
/// `i (1 - e^{iβ}P)(1 + e^{iβ}P)^{-1}`, with the global phase `β` chosen to
/// keep `1 + e^{iβ}P` well conditioned. The returned root is
/// `O diag(e^{iθ/2}) Oᵀ`, which is again symmetric and unitary.
pub fn sqrt_symmetric_unitary(p: &CMat) -> CMat {
    let n = p.nrows();
    if n == 1 {
        let z = p[(0, 0)];
        return CMat::from_element(1, 1, z.sqrt() / z.norm().sqrt());
    }
    let p = symmetric_part(p);
    let id = CMat::identity(n, n);

    let mut best: Option<(f64, CMat)> = None;
    for k in 0..8 {
        let phase = C64::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_4);
        let shifted = p.map(|z| z * phase);
        let (_, s, _) = svd_sorted(&(&id + &shifted));
        let smin = *s.last().unwrap_or(&0.0);
        if best.as_ref().is_none_or(|(b, _)| smin > *b) {
            best = Some((smin, shifted));
        }
    }
    let (_, shifted) = best.expect("at least one phase tried");
    let plus_inv = (&id + &shifted)
        .try_inverse()
        .expect("phase shift keeps 1 + P invertible");
    let cayley = ((&id - &shifted) * plus_inv).map(|z| z * C64::i());
    let real = DMatrix::from_fn(n, n, |r, c| cayley[(r, c)].re);
    let (_, o) = real_symmetric_eigen(&real);
    let oc = o.map(|x| C64::new(x, 0.0));
    let diag = oc.transpose() * &p * &oc;
    let roots = CMat::from_fn(n, n, |r, c| {
        if r == c {
            let z = diag[(r, r)];
            z.sqrt() / z.norm().sqrt()
        } else {
            ZERO
        }
    });
    &oc * roots * oc.transpose()
}

/// Row-major list of `[re, im]` pairs, the JSON matrix encoding used by the
/// file interfaces.
pub fn to_pairs(a: &CMat) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(a.len());
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            let z = a[(r, c)];
            out.push([z.re, z.im]);
        }
    }
    out
}

pub fn from_pairs(rows: usize, cols: usize, pairs: &[[f64; 2]], what: &str) -> Result<CMat> {
    if pairs.len() != rows * cols {
        return Err(Error::Ingest(format!(
            "{what}: expected {} entries, found {}",
            rows * cols,
            pairs.len()
        )));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| {
        let [re, im] = pairs[r * cols + c];
        C64::new(re, im)
    }))
}
