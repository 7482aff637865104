#![allow(dead_code)]

use hybrid_gbs::model::{build_toy_hamiltonian, GrandDynamicalMatrix, ModeLayout, ToyParams};
use hybrid_gbs::{CMat, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Toy model at ℏω/ε = 2, Q0/N0 = 7 with ε = 1.
pub fn toy(gamma: f64) -> GrandDynamicalMatrix {
    build_toy_hamiltonian(&ToyParams { hbar_omega: 2.0, epsilon: 1.0, gamma, n0: 1.0, q0: 7.0 }).unwrap()
}

pub fn gaussian_c64(rng: &mut TestRng) -> C64 {
    // Box-Muller is enough here
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    C64::from_polar(r, 2.0 * std::f64::consts::PI * u2) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_symmetric(rng: &mut TestRng, n: usize) -> CMat {
    let mut a = CMat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let z = gaussian_c64(rng);
            a[(i, j)] = z;
            a[(j, i)] = z;
        }
    }
    a
}

pub fn random_hermitian(rng: &mut TestRng, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| gaussian_c64(rng));
    (&a + a.adjoint()).scale(0.5)
}

/// Hermitian `2m × 2m` matrix with the particle-hole block structure
/// `[[A, B], [B*, A*]]`, `A` Hermitian and `B` symmetric.
pub fn random_bdg_hermitian(rng: &mut TestRng, m: usize, scale: f64) -> CMat {
    let a = random_hermitian(rng, m).scale(scale);
    let b = random_symmetric(rng, m).scale(scale);
    let mut h = CMat::zeros(2 * m, 2 * m);
    h.view_mut((0, 0), (m, m)).copy_from(&a);
    h.view_mut((0, m), (m, m)).copy_from(&b);
    h.view_mut((m, 0), (m, m)).copy_from(&b.conjugate());
    h.view_mut((m, m), (m, m)).copy_from(&a.conjugate());
    h
}

/// Positive-definite grand-dynamical matrix: a random structured Hermitian
/// matrix shifted so its smallest eigenvalue is 0.5.
pub fn random_stable_h(rng: &mut TestRng, layout: ModeLayout) -> GrandDynamicalMatrix {
    let m = layout.modes();
    let mut h = random_bdg_hermitian(rng, m, 1.0);
    let lowest = h.clone().symmetric_eigenvalues().min();
    for i in 0..2 * m {
        h[(i, i)] += C64::new(0.5 - lowest, 0.0);
    }
    GrandDynamicalMatrix::new(layout, h).unwrap()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
