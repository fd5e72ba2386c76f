//! Shared fixtures and independent oracles for the integration suites.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use phasegain::lti::StateSpace;
use phasegain::ComplexMatrix;

/// The matrix second-order benchmark plant: `(H1 s + H2)(M s^2 + C s + K)^{-1} B`
/// with `M = B = I3`.
pub fn example1_plant() -> StateSpace {
    let m = DMatrix::identity(3, 3);
    let c = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
    let k = DMatrix::from_row_slice(3, 3, &[6.0, 0.0, 2.0, 0.0, 7.0, 0.0, 2.0, 1.0, 7.0]);
    let h1 = DMatrix::from_row_slice(3, 3, &[3.0, 2.0, 1.0, 1.0, 3.0, 0.0, 0.0, 1.0, 2.0])
        .map(|v| v / 100.0);
    let h2 = DMatrix::from_row_slice(3, 3, &[70.0, 0.0, 2.0, 0.0, 70.0, 1.0, 0.0, 2.0, 60.0]);
    StateSpace::from_second_order(&m, &c, &k, &m, &h1, &h2).unwrap()
}

/// The diagonal first-order controller `I3 / (s + 10)`.
pub fn example1_controller() -> StateSpace {
    let a = DMatrix::identity(3, 3).map(|v: f64| -10.0 * v);
    let b = DMatrix::identity(3, 3);
    let c = DMatrix::identity(3, 3);
    let d = DMatrix::zeros(3, 3);
    StateSpace::new(a, b, c, d).unwrap()
}

/// The 3x3 complex matrix used for the constrained-phase curves.
pub fn fig5_matrix() -> ComplexMatrix {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    ComplexMatrix::from_row_slice(
        3,
        3,
        &[
            c(5.0, 0.0),
            c(2.0, 0.0),
            c(1.0, 1.0),
            c(3.0, 0.0),
            c(6.0, 0.0),
            c(2.0, 0.0),
            c(0.0, 0.0),
            c(2.0, 0.0),
            c(2.0, 0.0),
        ],
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

pub fn random_complex_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// Random accretive matrix (Hermitian part strictly positive definite).
pub fn random_accretive(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let x = random_complex_matrix(rng, n);
    let shift = 1.3 * phasegain::matnum::spectral_norm(&x);
    &x + ComplexMatrix::identity(n, n).map(|z| z * shift)
}

/// Random sectorial matrix: accretive core rotated by a random angle.
pub fn random_sectorial(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let theta = (rng.random::<f64>() - 0.5) * 0.9 * std::f64::consts::PI;
    random_accretive(rng, n).map(|z| z * Complex64::from_polar(1.0, theta))
}

/// Random stable state-space system with `nx` states and square I/O `n`.
pub fn random_stable(rng: &mut ChaCha8Rng, nx: usize, n: usize, with_feedthrough: bool) -> StateSpace {
    let raw = random_matrix(rng, nx, nx);
    let eigs = raw.clone().complex_eigenvalues();
    let max_re = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let margin = 0.2 + rng.random::<f64>();
    let a = raw - DMatrix::identity(nx, nx) * (max_re + margin);
    let b = random_matrix(rng, nx, n);
    let c = random_matrix(rng, n, nx);
    let d = if with_feedthrough {
        random_matrix(rng, n, n) * 0.3
    } else {
        DMatrix::zeros(n, n)
    };
    StateSpace::new(a, b, c, d).unwrap()
}

/// H-infinity norm by Hamiltonian bisection (independent of both the grid
/// sweeps and the LMI route): for a stable system, `||G||_inf < gamma` iff
/// the Hamiltonian matrix has no imaginary-axis eigenvalues.
pub fn hinf_norm(sys: &StateSpace) -> f64 {
    let nx = sys.num_states();
    let d_norm = sys
        .d()
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    if nx == 0 {
        return d_norm;
    }
    let has_imag_eig = |gamma: f64| -> bool {
        let n = sys.io_size();
        let r = DMatrix::identity(n, n) * (gamma * gamma) - sys.d().transpose() * sys.d();
        let Some(r_inv) = r.try_inverse() else {
            return true;
        };
        let a_shift = sys.a() + sys.b() * &r_inv * sys.d().transpose() * sys.c();
        let top_right = sys.b() * &r_inv * sys.b().transpose();
        let s = DMatrix::identity(n, n) + sys.d() * &r_inv * sys.d().transpose();
        let bottom_left = -(sys.c().transpose() * s * sys.c());
        let mut h = DMatrix::zeros(2 * nx, 2 * nx);
        h.view_mut((0, 0), (nx, nx)).copy_from(&a_shift);
        h.view_mut((0, nx), (nx, nx)).copy_from(&top_right);
        h.view_mut((nx, 0), (nx, nx)).copy_from(&bottom_left);
        h.view_mut((nx, nx), (nx, nx))
            .copy_from(&(-a_shift.transpose()));
        let scale = 1.0 + h.norm();
        h.complex_eigenvalues()
            .iter()
            .any(|l| l.re.abs() <= 1e-9 * scale)
    };
    let mut lo = d_norm + 1e-12;
    let mut hi = (lo + 1.0).max(2.0 * lo);
    for _ in 0..60 {
        if !has_imag_eig(hi) {
            break;
        }
        hi *= 2.0;
    }
    if has_imag_eig(hi) {
        return f64::INFINITY;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if has_imag_eig(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
