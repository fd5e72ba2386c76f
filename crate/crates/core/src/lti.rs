//! LTI system machinery: state-space evaluation, imaginary-axis pole
//! detection, indented frequency contours, gain/phase sweeps and closed-loop
//! construction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::matnum::{
    classify_sectoriality, default_sector_tol, matrix_phases, singular_values, ComplexMatrix,
    PhaseSector, SectorialTag,
};
use crate::{Error, Result};

/// Real state-space realization of a square transfer matrix
/// `G(s) = C (sI - A)^{-1} B + D`.
#[derive(Clone, Debug)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let nx = a.nrows();
        if a.ncols() != nx {
            return Err(Error::Dimension(format!(
                "state matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if d.nrows() != d.ncols() {
            return Err(Error::Dimension(format!(
                "square I/O required, got {} outputs and {} inputs",
                d.nrows(),
                d.ncols()
            )));
        }
        let n = d.nrows();
        if b.nrows() != nx || b.ncols() != n || c.nrows() != n || c.ncols() != nx {
            return Err(Error::Dimension(format!(
                "inconsistent realization: A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        let finite = a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// Static (memoryless) system `y = D u`.
    pub fn static_gain(d: DMatrix<f64>) -> Result<Self> {
        let n = d.nrows();
        StateSpace::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, n),
            DMatrix::zeros(n, 0),
            d,
        )
    }

    /// SISO transfer function from polynomial coefficients (highest power
    /// first), realized in controllable canonical form.
    pub fn from_scalar_rational(num: &[f64], den: &[f64]) -> Result<Self> {
        let trim = |v: &[f64]| -> Vec<f64> {
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut out: Vec<f64> = v.to_vec();
            while out.len() > 1 && out[0].abs() <= 1e-14 * (1.0 + scale) {
                out.remove(0);
            }
            out
        };
        let num = trim(num);
        let den = trim(den);
        if den.iter().all(|x| x.abs() < 1e-300) {
            return Err(Error::Parse("zero denominator polynomial".into()));
        }
        if num.len() > den.len() {
            return Err(Error::Parse(format!(
                "improper transfer function: numerator degree {} exceeds denominator degree {}",
                num.len() - 1,
                den.len() - 1
            )));
        }
        let lead = den[0];
        let den: Vec<f64> = den.iter().map(|x| x / lead).collect();
        let num: Vec<f64> = num.iter().map(|x| x / lead).collect();
        let n = den.len() - 1;
        let mut padded = vec![0.0; den.len() - num.len()];
        padded.extend_from_slice(&num);
        let d0 = padded[0];
        if n == 0 {
            return StateSpace::static_gain(DMatrix::from_element(1, 1, d0));
        }
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for j in 0..n {
            // Bottom row carries -a_n .. -a_1.
            a[(n - 1, j)] = -den[n - j];
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(n - 1, 0)] = 1.0;
        let mut c = DMatrix::zeros(1, n);
        for j in 0..n {
            c[(0, j)] = padded[n - j] - d0 * den[n - j];
        }
        StateSpace::new(a, b, c, DMatrix::from_element(1, 1, d0))
    }

    /// Realization of the matrix second-order system
    /// `(H1 s + H2)(M s^2 + C s + K)^{-1} B` with states `(x, dx/dt)`.
    pub fn from_second_order(
        m: &DMatrix<f64>,
        c_damp: &DMatrix<f64>,
        k: &DMatrix<f64>,
        b_in: &DMatrix<f64>,
        h1: &DMatrix<f64>,
        h2: &DMatrix<f64>,
    ) -> Result<Self> {
        let n = m.nrows();
        for (name, mat) in [
            ("m", m),
            ("c_damp", c_damp),
            ("k", k),
            ("b_in", b_in),
            ("h1", h1),
            ("h2", h2),
        ] {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::Dimension(format!(
                    "{name} must be {n}x{n}, got {}x{}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
        }
        let scale = 1.0 + m.norm();
        if (m - m.transpose()).norm() > 1e-12 * scale {
            return Err(Error::Precondition("mass matrix must be symmetric".into()));
        }
        let eigs = m.clone().symmetric_eigen().eigenvalues;
        if eigs.iter().any(|&l| l <= 0.0) {
            return Err(Error::Precondition(
                "mass matrix must be positive definite".into(),
            ));
        }
        let m_inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Precondition("mass matrix is singular".into()))?;
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        a.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
        a.view_mut((n, 0), (n, n)).copy_from(&(-&m_inv * k));
        a.view_mut((n, n), (n, n)).copy_from(&(-&m_inv * c_damp));
        let mut b = DMatrix::zeros(2 * n, n);
        b.view_mut((n, 0), (n, n)).copy_from(&(&m_inv * b_in));
        let mut c = DMatrix::zeros(n, 2 * n);
        c.view_mut((0, 0), (n, n)).copy_from(h2);
        c.view_mut((0, n), (n, n)).copy_from(h1);
        StateSpace::new(a, b, c, DMatrix::zeros(n, n))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn num_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn io_size(&self) -> usize {
        self.d.nrows()
    }

    /// Eigenvalues of the state matrix.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        if self.num_states() == 0 {
            return Vec::new();
        }
        self.a.clone().complex_eigenvalues().iter().copied().collect()
    }

    /// Evaluates `G(s) = D + C (sI - A)^{-1} B`.
    pub fn evaluate(&self, s: Complex64) -> Result<ComplexMatrix> {
        if !s.re.is_finite() || !s.im.is_finite() {
            return Ok(self.evaluate_at_infinity());
        }
        let nx = self.num_states();
        if nx == 0 {
            return Ok(self.d.map(|v| Complex64::new(v, 0.0)));
        }
        let scale = 1.0_f64.max(self.a.norm());
        let distance = self
            .eigenvalues()
            .iter()
            .map(|l| (s - l).norm())
            .fold(f64::INFINITY, f64::min);
        if distance <= 1e-12 * scale {
            return Err(Error::PoleProximity { distance });
        }
        let mut shifted = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..nx {
            shifted[(i, i)] += s;
        }
        let rhs = self.b.map(|v| Complex64::new(v, 0.0));
        let lu = shifted.lu();
        let x = lu
            .solve(&rhs)
            .ok_or(Error::PoleProximity { distance })?;
        let mut out = self.c.map(|v| Complex64::new(v, 0.0)) * x;
        out += self.d.map(|v| Complex64::new(v, 0.0));
        Ok(out)
    }

    /// `G(infinity) = D` for a proper realization.
    pub fn evaluate_at_infinity(&self) -> ComplexMatrix {
        self.d.map(|v| Complex64::new(v, 0.0))
    }

    /// Parallel interconnection `self + other` (same I/O size).
    pub fn parallel(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.io_size() != other.io_size() {
            return Err(Error::Dimension(format!(
                "parallel connection needs matching I/O, got {} and {}",
                self.io_size(),
                other.io_size()
            )));
        }
        let (n1, n2, n) = (self.num_states(), other.num_states(), self.io_size());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n1 + n2, n);
        b.view_mut((0, 0), (n1, n)).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, n)).copy_from(&other.b);
        let mut c = DMatrix::zeros(n, n1 + n2);
        c.view_mut((0, 0), (n, n1)).copy_from(&self.c);
        c.view_mut((0, n1), (n, n2)).copy_from(&other.c);
        StateSpace::new(a, b, c, &self.d + &other.d)
    }

    /// Output-scaled copy `k * G`.
    pub fn scaled(&self, k: f64) -> StateSpace {
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.map(|v| k * v),
            d: self.d.map(|v| k * v),
        }
    }

    /// Inverse system; requires an invertible feedthrough.
    pub fn inverse(&self) -> Result<StateSpace> {
        let d_inv = self.d.clone().try_inverse().ok_or_else(|| {
            Error::Precondition("feedthrough is singular, inverse is improper".into())
        })?;
        let a = &self.a - &self.b * &d_inv * &self.c;
        let b = &self.b * &d_inv;
        let c = -&d_inv * &self.c;
        StateSpace::new(a, b, c, d_inv)
    }

    /// Rank of the controllability matrix `[B AB ... A^{n-1}B]`.
    pub fn controllability_rank(&self, tol: f64) -> usize {
        let nx = self.num_states();
        if nx == 0 {
            return 0;
        }
        let n = self.io_size();
        let mut blocks = DMatrix::zeros(nx, nx * n);
        let mut cur = self.b.clone();
        for k in 0..nx {
            blocks.view_mut((0, k * n), (nx, n)).copy_from(&cur);
            cur = &self.a * cur;
        }
        rank_of(&blocks, tol)
    }

    /// Rank of the observability matrix.
    pub fn observability_rank(&self, tol: f64) -> usize {
        let nx = self.num_states();
        if nx == 0 {
            return 0;
        }
        let n = self.io_size();
        let mut blocks = DMatrix::zeros(nx * n, nx);
        let mut cur = self.c.clone();
        for k in 0..nx {
            blocks.view_mut((k * n, 0), (n, nx)).copy_from(&cur);
            cur = cur * &self.a;
        }
        rank_of(&blocks, tol)
    }
}

fn rank_of(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0f64, f64::max);
    sv.iter().filter(|&&s| s > tol * (1.0 + top)).count()
}

/// Imaginary-axis pole structure of a realization.
#[derive(Clone, Debug)]
pub struct PoleSet {
    /// Distinct pole frequencies `omega >= 0` (a pole pair `+-j omega`
    /// appears once), sorted ascending.
    pub imag_axis_freqs: Vec<f64>,
    /// Multiplicity per entry of `imag_axis_freqs`.
    pub multiplicities: Vec<usize>,
    pub has_orhp_pole: bool,
}

impl PoleSet {
    pub fn empty() -> Self {
        PoleSet {
            imag_axis_freqs: Vec::new(),
            multiplicities: Vec::new(),
            has_orhp_pole: false,
        }
    }

    pub fn max_multiplicity(&self) -> usize {
        self.multiplicities.iter().copied().max().unwrap_or(0)
    }
}

/// Classifies the eigenvalues of the state matrix relative to the imaginary
/// axis at relative tolerance `tol`.
pub fn imaginary_axis_poles(sys: &StateSpace, tol: f64) -> PoleSet {
    let scale = 1.0_f64.max(sys.a().norm());
    let threshold = tol * scale;
    let eigs = sys.eigenvalues();
    let has_orhp_pole = eigs.iter().any(|l| l.re > threshold);
    let mut on_axis: Vec<f64> = eigs
        .iter()
        .filter(|l| l.re.abs() <= threshold && l.im >= -threshold)
        .map(|l| l.im.max(0.0))
        .collect();
    on_axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let group_tol = 10.0 * threshold + 1e-12;
    let mut freqs = Vec::new();
    let mut mults = Vec::new();
    for w in on_axis {
        match freqs.last() {
            Some(&last) if w - last <= group_tol => {
                *mults.last_mut().unwrap() += 1;
            }
            _ => {
                freqs.push(w);
                mults.push(1);
            }
        }
    }
    PoleSet {
        imag_axis_freqs: freqs,
        multiplicities: mults,
        has_orhp_pole,
    }
}

/// Segment type of a contour point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ContourKind {
    ImagAxis,
    /// Right-half-plane arc of radius `eps` around `j center`.
    SemiCircle { center: f64 },
}

/// A point on an indented contour, ordered by `weight` (the effective
/// frequency of the point along the path).
#[derive(Clone, Copy, Debug)]
pub struct ContourPoint {
    pub s: Complex64,
    pub kind: ContourKind,
    pub weight: f64,
}

const ARC_POINTS: usize = 33;

/// Builds the indented contour: imaginary segments over
/// `[omega_min, omega_max]` with right-half-plane arcs of radius `eps`
/// around each imaginary-axis pole. A pole at the origin (with
/// `omega_min == 0`) gets a quarter arc starting on the positive real axis,
/// matching the half-frequency-spectrum convention.
pub fn build_indented_contour(
    poles: &PoleSet,
    eps: f64,
    points: usize,
    omega_min: f64,
    omega_max: f64,
) -> Result<Vec<ContourPoint>> {
    if eps <= 0.0 {
        return Err(Error::Precondition(format!("eps must be positive, got {eps}")));
    }
    if !(omega_min >= 0.0 && omega_max > omega_min) {
        return Err(Error::Precondition(format!(
            "need 0 <= omega_min < omega_max, got [{omega_min}, {omega_max}]"
        )));
    }
    let relevant: Vec<f64> = poles
        .imag_axis_freqs
        .iter()
        .copied()
        .filter(|&w| w >= omega_min && w <= omega_max)
        .collect();
    for pair in relevant.windows(2) {
        let gap = pair[1] - pair[0];
        if eps >= 0.5 * gap {
            return Err(Error::Precondition(format!(
                "eps {eps} is not below half the gap {gap} between poles at {} and {}",
                pair[0], pair[1]
            )));
        }
    }
    for &w in &relevant {
        if w == 0.0 && omega_min == 0.0 {
            if eps >= omega_max {
                return Err(Error::Precondition(format!(
                    "eps {eps} reaches past omega_max {omega_max} from the origin pole"
                )));
            }
            continue;
        }
        if w - eps <= omega_min || w + eps >= omega_max {
            return Err(Error::Precondition(format!(
                "eps {eps} reaches an endpoint of [{omega_min}, {omega_max}] from the pole at {w}"
            )));
        }
    }

    let mut grid: Vec<f64> = Vec::with_capacity(points + 2);
    if omega_min > 0.0 {
        let (lo, hi) = (omega_min.ln(), omega_max.ln());
        for k in 0..points {
            let t = k as f64 / (points - 1).max(1) as f64;
            grid.push((lo + t * (hi - lo)).exp());
        }
    } else {
        grid.push(0.0);
        let lo_pos = (omega_max * 1e-7).min(1e-3).max(1e-12);
        let (lo, hi) = (lo_pos.ln(), omega_max.ln());
        let m = points.saturating_sub(1).max(2);
        for k in 0..m {
            let t = k as f64 / (m - 1) as f64;
            grid.push((lo + t * (hi - lo)).exp());
        }
    }

    let blocked = |w: f64| relevant.iter().any(|&p| (w - p).abs() < eps);
    let mut out: Vec<ContourPoint> = grid
        .iter()
        .copied()
        .filter(|&w| !blocked(w))
        .map(|w| ContourPoint {
            s: Complex64::new(0.0, w),
            kind: ContourKind::ImagAxis,
            weight: w,
        })
        .collect();

    use std::f64::consts::FRAC_PI_2;
    for &p in &relevant {
        if p == 0.0 {
            // Quarter arc from the positive real axis up to j eps.
            for i in 0..ARC_POINTS {
                let phi = FRAC_PI_2 * i as f64 / ARC_POINTS as f64;
                out.push(ContourPoint {
                    s: Complex64::from_polar(eps, phi),
                    kind: ContourKind::SemiCircle { center: 0.0 },
                    weight: eps * phi.sin() - 1e-15,
                });
            }
            out.push(ContourPoint {
                s: Complex64::new(0.0, eps),
                kind: ContourKind::ImagAxis,
                weight: eps,
            });
        } else {
            out.push(ContourPoint {
                s: Complex64::new(0.0, p - eps),
                kind: ContourKind::ImagAxis,
                weight: p - eps,
            });
            for i in 1..=ARC_POINTS {
                let phi = -FRAC_PI_2 + std::f64::consts::PI * i as f64 / (ARC_POINTS + 1) as f64;
                out.push(ContourPoint {
                    s: Complex64::new(eps * phi.cos(), p + eps * phi.sin()),
                    kind: ContourKind::SemiCircle { center: p },
                    weight: p + eps * phi.sin(),
                });
            }
            out.push(ContourPoint {
                s: Complex64::new(0.0, p + eps),
                kind: ContourKind::ImagAxis,
                weight: p + eps,
            });
        }
    }
    out.sort_by(|x, y| x.weight.partial_cmp(&y.weight).unwrap());
    out.dedup_by(|x, y| (x.s - y.s).norm() < 1e-15);
    Ok(out)
}

/// Frequency-response sample on a contour.
#[derive(Clone, Debug)]
pub struct FrequencyResponseSample {
    pub s: Complex64,
    pub kind: ContourKind,
    /// Effective frequency of the point along the contour.
    pub omega: f64,
    pub value: ComplexMatrix,
    /// Singular values, descending.
    pub gains: Vec<f64>,
    /// Branch-tracked phases: continuous along the contour, anchored at the
    /// first sample's canonical sector.
    pub phases: Option<PhaseSector>,
    /// Canonical per-matrix phases (center in `(-pi, pi]`).
    pub phases_canonical: Option<PhaseSector>,
    /// Numerical rank at tolerance `1e-8 * sigma_max`.
    pub rank: usize,
}

impl FrequencyResponseSample {
    pub fn sigma_max(&self) -> f64 {
        self.gains.first().copied().unwrap_or(0.0)
    }

    /// True when the response is numerically the zero matrix.
    pub fn is_zero(&self) -> bool {
        self.sigma_max() <= 1e-300
    }
}

fn raw_sample(sys: &StateSpace, point: &ContourPoint) -> Result<FrequencyResponseSample> {
    let value = sys.evaluate(point.s)?;
    let gains = singular_values(&value)?;
    let tol = default_sector_tol(&value);
    let phases_canonical = match classify_sectoriality(&value, tol)? {
        class if class.tag == SectorialTag::Sectorial => Some(matrix_phases(&value, tol)?),
        _ => None,
    };
    let top = gains[0];
    let rank = gains.iter().filter(|&&g| g > 1e-8 * (1.0 + top)).count();
    Ok(FrequencyResponseSample {
        s: point.s,
        kind: point.kind,
        omega: point.weight,
        value,
        gains,
        phases: phases_canonical.clone(),
        phases_canonical,
        rank,
    })
}

/// Gains and (canonical) phases of the feedthrough `G(infinity) = D`,
/// packaged as a sample with infinite frequency.
pub fn sample_at_infinity(sys: &StateSpace) -> FrequencyResponseSample {
    let value = sys.evaluate_at_infinity();
    let gains = singular_values(&value).unwrap_or_default();
    let tol = default_sector_tol(&value);
    let phases = match classify_sectoriality(&value, tol) {
        Ok(class) if class.tag == SectorialTag::Sectorial => matrix_phases(&value, tol).ok(),
        _ => None,
    };
    let top = gains.first().copied().unwrap_or(0.0);
    FrequencyResponseSample {
        s: Complex64::new(f64::INFINITY, 0.0),
        kind: ContourKind::ImagAxis,
        omega: f64::INFINITY,
        rank: gains.iter().filter(|&&g| g > 1e-8 * (1.0 + top)).count(),
        gains,
        phases: phases.clone(),
        phases_canonical: phases,
        value,
    }
}

/// Chooses branch shifts (multiples of `2 pi`) so that the phase center moves
/// continuously along the contour. Anchored at the first phased sample, whose
/// canonical center is kept (the usual convention normalizes the DC phase
/// center to zero for positive-type systems; a center of `pi` there is the
/// system's own doing and is preserved).
fn track_branches(samples: &mut [FrequencyResponseSample]) {
    use std::f64::consts::PI;
    let mut prev_center: Option<f64> = None;
    for sample in samples.iter_mut() {
        let Some(canonical) = sample.phases_canonical.clone() else {
            sample.phases = None;
            continue;
        };
        let shift = match prev_center {
            None => 0.0,
            Some(prev) => {
                let k = ((prev - canonical.center) / (2.0 * PI)).round();
                k * 2.0 * PI
            }
        };
        let branch = canonical.shifted(shift);
        prev_center = Some(branch.center);
        sample.phases = Some(branch);
    }
}

/// Evaluates gains and phases along a contour. Points are processed
/// independently; the branch-continuity pass is an ordered reduction.
pub fn frequency_sweep(
    sys: &StateSpace,
    contour: &[ContourPoint],
) -> Result<Vec<FrequencyResponseSample>> {
    let mut samples = contour
        .par_iter()
        .map(|p| raw_sample(sys, p))
        .collect::<Result<Vec<_>>>()?;
    track_branches(&mut samples);
    Ok(samples)
}

/// Largest phase-center jump between adjacent phased samples, with the index
/// of the worst pair.
pub fn worst_center_jump(samples: &[FrequencyResponseSample]) -> Option<(usize, f64)> {
    let mut worst: Option<(usize, f64)> = None;
    for (i, pair) in samples.windows(2).enumerate() {
        if let (Some(p0), Some(p1)) = (&pair[0].phases, &pair[1].phases) {
            let jump = (p1.center - p0.center).abs();
            if worst.map(|(_, w)| jump > w).unwrap_or(true) {
                worst = Some((i, jump));
            }
        }
    }
    worst
}

/// Midpoint of two adjacent contour points within the same segment, if one
/// can be constructed.
pub fn contour_midpoint(a: &ContourPoint, b: &ContourPoint) -> Option<ContourPoint> {
    match (a.kind, b.kind) {
        (ContourKind::ImagAxis, ContourKind::ImagAxis) => {
            let (w0, w1) = (a.s.im, b.s.im);
            if (w1 - w0).abs() < 1e-14 {
                return None;
            }
            let mid = if w0 > 0.0 && w1 > 0.0 {
                (w0 * w1).sqrt()
            } else {
                0.5 * (w0 + w1)
            };
            Some(ContourPoint {
                s: Complex64::new(0.0, mid),
                kind: ContourKind::ImagAxis,
                weight: mid,
            })
        }
        (ContourKind::SemiCircle { center: c0 }, ContourKind::SemiCircle { center: c1 })
            if (c0 - c1).abs() < 1e-14 =>
        {
            let eps0 = (a.s - Complex64::new(0.0, c0)).norm();
            let phi0 = (a.s.im - c0).atan2(a.s.re);
            let phi1 = (b.s.im - c1).atan2(b.s.re);
            if (phi1 - phi0).abs() < 1e-14 {
                return None;
            }
            let phi = 0.5 * (phi0 + phi1);
            Some(ContourPoint {
                s: Complex64::new(eps0 * phi.cos(), c0 + eps0 * phi.sin()),
                kind: ContourKind::SemiCircle { center: c0 },
                weight: c0 + eps0 * phi.sin(),
            })
        }
        _ => None,
    }
}

/// Gang of Four closed-loop realization `[I; P] (I + C P)^{-1} [I, C]`,
/// mapping the two loop injections to the internal pair `(u, y_p)`.
pub fn gang_of_four(p: &StateSpace, c: &StateSpace) -> Result<StateSpace> {
    if p.io_size() != c.io_size() {
        return Err(Error::Dimension(format!(
            "plant and controller I/O differ: {} vs {}",
            p.io_size(),
            c.io_size()
        )));
    }
    let n = p.io_size();
    let (np, nc) = (p.num_states(), c.num_states());
    let loop_gain = DMatrix::identity(n, n) + c.d() * p.d();
    let sv = loop_gain.clone().svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin <= 1e-12 * (1.0 + sv.iter().copied().fold(0.0f64, f64::max)) {
        return Err(Error::IllPosed(
            "I + Dc Dp is singular; the interconnection is not well-posed".into(),
        ));
    }
    let e = loop_gain
        .try_inverse()
        .ok_or_else(|| Error::IllPosed("I + Dc Dp could not be inverted".into()))?;

    // u = E (w1 - Cc xc - Dc Cp xp + Dc w2), y_p = Cp xp + Dp u.
    let edc = &e * c.d();
    let mut a = DMatrix::zeros(np + nc, np + nc);
    a.view_mut((0, 0), (np, np))
        .copy_from(&(p.a() - p.b() * &edc * p.c()));
    a.view_mut((0, np), (np, nc)).copy_from(&(-(p.b() * &e * c.c())));
    a.view_mut((np, 0), (nc, np))
        .copy_from(&(c.b() * p.c() - c.b() * p.d() * &edc * p.c()));
    a.view_mut((np, np), (nc, nc))
        .copy_from(&(c.a() - c.b() * p.d() * &e * c.c()));

    let mut b = DMatrix::zeros(np + nc, 2 * n);
    b.view_mut((0, 0), (np, n)).copy_from(&(p.b() * &e));
    b.view_mut((0, n), (np, n)).copy_from(&(p.b() * &edc));
    b.view_mut((np, 0), (nc, n)).copy_from(&(c.b() * p.d() * &e));
    b.view_mut((np, n), (nc, n))
        .copy_from(&(c.b() * p.d() * &edc - c.b()));

    let mut cc = DMatrix::zeros(2 * n, np + nc);
    cc.view_mut((0, 0), (n, np)).copy_from(&(-(&edc * p.c())));
    cc.view_mut((0, np), (n, nc)).copy_from(&(-(&e * c.c())));
    cc.view_mut((n, 0), (n, np))
        .copy_from(&(p.c() - p.d() * &edc * p.c()));
    cc.view_mut((n, np), (n, nc)).copy_from(&(-(p.d() * &e * c.c())));

    let mut d = DMatrix::zeros(2 * n, 2 * n);
    d.view_mut((0, 0), (n, n)).copy_from(&e);
    d.view_mut((0, n), (n, n)).copy_from(&edc);
    d.view_mut((n, 0), (n, n)).copy_from(&(p.d() * &e));
    d.view_mut((n, n), (n, n)).copy_from(&(p.d() * &edc));

    StateSpace::new(a, b, cc, d)
}

/// All state eigenvalues strictly left of `-tol`.
pub fn is_hurwitz(sys: &StateSpace, tol: f64) -> bool {
    sys.eigenvalues().iter().all(|l| l.re < -tol)
}
