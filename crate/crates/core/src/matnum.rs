//! Complex dense linear algebra plus the gain/phase matrix primitives.
//!
//! Gains of a matrix are its singular values. Phases are defined for
//! sectorial matrices (numerical range excluding the origin): such a matrix
//! factors as `A = T* D T` with `D` diagonal unitary, and the phases of `A`
//! are the angles of `D`, normalized so that their spread is below `pi` and
//! their center lies in `(-pi, pi]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex matrix, the universal carrier for system and frequency data.
pub type ComplexMatrix = DMatrix<Complex64>;

const SEED_COUNT: usize = 64;

/// Hermitian / skew-Hermitian decomposition `A = H + j S`.
#[derive(Clone, Debug)]
pub struct HermitianParts {
    /// `(A + A*) / 2`
    pub h: ComplexMatrix,
    /// `(A - A*) / (2j)`
    pub s: ComplexMatrix,
}

/// Sectoriality classification of a square matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectorialTag {
    /// `0` outside the closed numerical range.
    Sectorial,
    /// `0` on the boundary of the numerical range (within tolerance).
    SemiSectorial,
    /// `0` in the interior of the numerical range.
    NonSectorial,
}

/// Outcome of the sectoriality test, with the best separating rotation.
#[derive(Clone, Copy, Debug)]
pub struct SectorialClass {
    pub tag: SectorialTag,
    /// Rotation `theta` maximizing the smallest eigenvalue of the Hermitian
    /// part of `e^{j theta} A`.
    pub witness_rotation: f64,
    /// The maximized smallest eigenvalue. Positive for sectorial matrices.
    pub margin: f64,
}

/// Phase sector `[lo, hi]` of a sectorial matrix.
#[derive(Clone, Debug)]
pub struct PhaseSector {
    pub lo: f64,
    pub hi: f64,
    /// `(hi + lo) / 2`, normalized into `(-pi, pi]`.
    pub center: f64,
    /// All `n` phases, sorted descending (`all_phases[0] == hi`).
    pub all_phases: Vec<f64>,
}

impl PhaseSector {
    pub fn spread(&self) -> f64 {
        self.hi - self.lo
    }

    /// The sector translated by `delta` (used for branch tracking along
    /// frequency contours, where `delta` is a multiple of `2 pi`).
    pub fn shifted(&self, delta: f64) -> PhaseSector {
        PhaseSector {
            lo: self.lo + delta,
            hi: self.hi + delta,
            center: self.center + delta,
            all_phases: self.all_phases.iter().map(|p| p + delta).collect(),
        }
    }
}

pub fn entries_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn require_finite(a: &ComplexMatrix) -> Result<()> {
    if entries_finite(a) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn require_square(a: &ComplexMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "square matrix required, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Splits a square matrix into its Hermitian and skew-Hermitian parts.
pub fn hermitian_split(a: &ComplexMatrix) -> Result<HermitianParts> {
    require_square(a)?;
    require_finite(a)?;
    let adj = a.adjoint();
    let h = (a + &adj).map(|z| z * 0.5);
    let s = (a - &adj).map(|z| Complex64::new(z.im * 0.5, -z.re * 0.5));
    Ok(HermitianParts { h, s })
}

/// Singular values in descending order.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    require_finite(a)?;
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(sv)
}

/// Largest singular value (spectral norm). Panics on non-finite input.
pub fn spectral_norm(a: &ComplexMatrix) -> f64 {
    singular_values(a).expect("finite matrix")[0]
}

/// Default tolerance for the sectorial / semi-sectorial discrimination.
pub fn default_sector_tol(a: &ComplexMatrix) -> f64 {
    let scale = if a.is_empty() { 0.0 } else { spectral_norm(a) };
    1e-9 * (1.0 + scale)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let se = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let n = m.nrows();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vectors.set_column(k, &se.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub(crate) fn lambda_min(m: &ComplexMatrix) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a Hermitian matrix.
pub(crate) fn lambda_max(m: &ComplexMatrix) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `lambda_min` of the Hermitian part of `e^{j theta} A`, written in terms of
/// the precomputed split: `Herm(e^{j theta} A) = cos(theta) H - sin(theta) S`.
pub(crate) fn rotated_herm_min_eig(parts: &HermitianParts, theta: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    let m = parts.h.map(|z| z * c) - parts.s.map(|z| z * s);
    lambda_min(&m)
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Maximizes `theta -> lambda_min(Herm(e^{j theta} A))` over `(-pi, pi]`.
///
/// Grid-seeded with 64 points, the best basins refined by golden-section
/// search. Returns `(theta, max value)` with `theta` normalized to
/// `(-pi, pi]`.
pub(crate) fn max_min_eig_rotation(parts: &HermitianParts) -> (f64, f64) {
    use std::f64::consts::PI;
    let f = |theta: f64| rotated_herm_min_eig(parts, theta);
    let step = 2.0 * PI / SEED_COUNT as f64;
    let mut seeds: Vec<(f64, f64)> = (0..SEED_COUNT)
        .map(|k| {
            let theta = -PI + (k as f64 + 0.5) * step;
            (theta, f(theta))
        })
        .collect();
    seeds.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
    let mut best = (seeds[0].0, f64::NEG_INFINITY);
    for &(theta, _) in seeds.iter().take(3) {
        let (x, fx) = golden_max(&f, theta - step, theta + step, 1e-12);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    let mut theta = best.0;
    while theta > PI {
        theta -= 2.0 * PI;
    }
    while theta <= -PI {
        theta += 2.0 * PI;
    }
    (theta, best.1)
}

/// Decides whether `0` lies outside, on the boundary of, or inside the
/// numerical range of `a`, via the equivalence
/// `0 not in W(A)  <=>  exists theta: Herm(e^{j theta} A) > 0`.
pub fn classify_sectoriality(a: &ComplexMatrix, tol: f64) -> Result<SectorialClass> {
    let parts = hermitian_split(a)?;
    let (theta, margin) = max_min_eig_rotation(&parts);
    let tag = if margin > tol {
        SectorialTag::Sectorial
    } else if margin >= -tol {
        SectorialTag::SemiSectorial
    } else {
        SectorialTag::NonSectorial
    };
    Ok(SectorialClass {
        tag,
        witness_rotation: theta,
        margin,
    })
}

/// Inverse square root of a Hermitian positive definite matrix.
fn hermitian_inv_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (values, vectors) = hermitian_eigen(m);
    if values[0] <= 0.0 {
        return Err(Error::NotSectorial { margin: values[0] });
    }
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        let inv_sqrt = Complex64::new(1.0 / v.sqrt(), 0.0);
        let col = scaled.column(k) * inv_sqrt;
        scaled.set_column(k, &col);
    }
    Ok(&scaled * vectors.adjoint())
}

fn normalize_center(phases: &mut [f64]) -> (f64, f64, f64) {
    use std::f64::consts::PI;
    let hi = phases[0];
    let lo = phases[phases.len() - 1];
    let mut center = 0.5 * (hi + lo);
    let mut shift = 0.0;
    while center > PI {
        shift -= 2.0 * PI;
        center -= 2.0 * PI;
    }
    while center <= -PI {
        shift += 2.0 * PI;
        center += 2.0 * PI;
    }
    if shift != 0.0 {
        for p in phases.iter_mut() {
            *p += shift;
        }
    }
    (phases[phases.len() - 1], phases[0], center)
}

/// Phases of a sectorial matrix via its sectorial decomposition.
///
/// Rotates by the sectoriality witness so the Hermitian part becomes positive
/// definite, then reads the canonical phases off the congruence
/// `e^{j theta0} A = H^{1/2} (I + j H^{-1/2} S H^{-1/2}) H^{1/2}`:
/// the phases are `-theta0 + arctan(eig(H^{-1/2} S H^{-1/2}))`.
pub fn matrix_phases(a: &ComplexMatrix, tol: f64) -> Result<PhaseSector> {
    let class = classify_sectoriality(a, tol)?;
    if class.tag != SectorialTag::Sectorial {
        return Err(Error::NotSectorial {
            margin: class.margin,
        });
    }
    let theta0 = class.witness_rotation;
    let rot = Complex64::from_polar(1.0, theta0);
    let rotated = a.map(|z| z * rot);
    let parts = hermitian_split(&rotated)?;
    let t = hermitian_inv_sqrt(&parts.h)?;
    let congruence = &t * &parts.s * &t;
    let (values, _) = hermitian_eigen(&congruence);
    let mut phases: Vec<f64> = values.iter().map(|l| -theta0 + l.atan()).collect();
    phases.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let (lo, hi, center) = normalize_center(&mut phases);
    debug_assert!(hi - lo < std::f64::consts::PI);
    Ok(PhaseSector {
        lo,
        hi,
        center,
        all_phases: phases,
    })
}
