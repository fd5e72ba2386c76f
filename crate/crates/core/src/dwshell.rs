//! Davis-Wielandt shell computations.
//!
//! The shell of a square matrix is the set
//! `{(Re x*Ax, Im x*Ax, ||Ax||^2) : ||x|| = 1}`. Cutting it at height `r`
//! and projecting down gives the gain-constrained numerical range
//! `W_{>=r}(A)`; its angular extremes are the constrained phases `psi_r`.
//! Cutting instead by a phase exclusion gives the constrained gain
//! `gamma_theta`. Both extremes are computed by S-procedure SDPs; a seeded
//! sampling oracle with projected-ascent refinement serves as an independent
//! validation route.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::matnum::{
    classify_sectoriality, hermitian_split, lambda_min, matrix_phases, singular_values,
    ComplexMatrix, HermitianParts, SectorialTag,
};
use crate::sdpkit::{HermitianLmiTerm, LmiSense, Objective, SdpProblem, SdpStatus};
use crate::{Error, Result};

type CVec = DVector<Complex64>;

/// Result of the `r`-sectoriality test.
#[derive(Clone, Copy, Debug)]
pub struct RSectorial {
    pub holds: bool,
    /// Best separation of `W_{>=r}(A)` from the origin over all rotations
    /// (infinite when the constrained range is empty).
    pub margin: f64,
    /// Rotation achieving the separation.
    pub witness_rotation: f64,
}

/// Phase extremes of the gain-constrained numerical range.
#[derive(Clone, Copy, Debug)]
pub struct ConstrainedPhaseSector {
    pub r: f64,
    pub lo: f64,
    pub hi: f64,
    /// Set when `r` exceeds the largest gain; by convention `lo = +inf`,
    /// `hi = -inf`.
    pub empty: bool,
}

/// How a constrained gain value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GainMethod {
    Sdp,
    Sampling,
}

/// Largest gain compatible with a phase exclusion `angle not in (-theta, theta)`.
#[derive(Clone, Copy, Debug)]
pub struct ConstrainedGain {
    pub theta: f64,
    pub value: f64,
    pub method: GainMethod,
}

/// One sampled Davis-Wielandt shell point.
#[derive(Clone, Copy, Debug)]
pub struct ShellPoint {
    pub re: f64,
    pub im: f64,
    pub h2: f64,
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

fn sector_tol(a: &ComplexMatrix) -> f64 {
    crate::matnum::default_sector_tol(a)
}

/// `lambda_min(Herm(e^{j theta} A) + tau * (r^2 I - A*A))` maximized over
/// `tau >= 0`. Concave in `tau`; solved by expansion plus golden section.
fn tau_maximized_margin(parts: &HermitianParts, neg: &ComplexMatrix, theta: f64) -> (f64, f64) {
    let (ct, st) = (theta.cos(), theta.sin());
    let base = parts.h.map(|z| z * ct) - parts.s.map(|z| z * st);
    let f = |tau: f64| lambda_min(&(&base + neg.map(|z| z * tau)));
    let f0 = f(0.0);
    let mut hi = 1.0;
    let mut fhi = f(hi);
    if fhi <= f0 {
        // Optimal tau may still sit inside (0, 1).
        hi = 1.0;
    } else {
        for _ in 0..40 {
            let next = hi * 4.0;
            let fnext = f(next);
            if fnext <= fhi || next > 1e12 {
                hi = next;
                break;
            }
            hi = next;
            fhi = fnext;
        }
    }
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo_t, mut hi_t) = (0.0_f64, hi);
    let mut c = hi_t - INVPHI * (hi_t - lo_t);
    let mut d = lo_t + INVPHI * (hi_t - lo_t);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..60 {
        if fc > fd {
            hi_t = d;
            d = c;
            fd = fc;
            c = hi_t - INVPHI * (hi_t - lo_t);
            fc = f(c);
        } else {
            lo_t = c;
            c = d;
            fc = fd;
            d = lo_t + INVPHI * (hi_t - lo_t);
            fd = f(d);
        }
    }
    let tau = 0.5 * (lo_t + hi_t);
    let val = f(tau);
    if f0 >= val {
        (f0, 0.0)
    } else {
        (val, tau)
    }
}

/// Sweeps the rotation for the best `tau`-maximized separation margin.
///
/// With `early_exit`, returns the first rotation whose margin clears the
/// threshold (any positive-margin rotation is a valid witness); otherwise
/// refines the best basins by golden section for the global maximum.
fn best_rotation(
    parts: &HermitianParts,
    neg: &ComplexMatrix,
    early_exit: Option<f64>,
) -> (f64, f64) {
    use std::f64::consts::PI;
    // The screening mode trades seed density for speed: a missed narrow
    // basin only makes the caller conservative, never unsound.
    let seeds_n: usize = if early_exit.is_some() { 16 } else { 64 };
    let step = 2.0 * PI / seeds_n as f64;
    let eval = |theta: f64| tau_maximized_margin(parts, neg, theta).0;

    let mut seeds: Vec<(f64, f64)> = Vec::with_capacity(seeds_n);
    for k in 0..seeds_n {
        let theta = -PI + (k as f64 + 0.5) * step;
        let margin = eval(theta);
        if let Some(threshold) = early_exit {
            if margin > threshold {
                let (t, m) = golden_refine(&eval, theta - step, theta + step, 24);
                return (normalize_angle(t), m.max(margin));
            }
        }
        seeds.push((theta, margin));
    }
    seeds.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
    let mut best = (seeds[0].0, seeds[0].1);
    for &(theta, _) in seeds.iter().take(3) {
        let (t, m) = golden_refine(&eval, theta - step, theta + step, 48);
        if m > best.1 {
            best = (t, m);
        }
    }
    (normalize_angle(best.0), best.1)
}

fn golden_refine(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
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

fn normalize_angle(mut t: f64) -> f64 {
    use std::f64::consts::PI;
    while t > PI {
        t -= 2.0 * PI;
    }
    while t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// S-procedure margin SDP at a fixed rotation:
/// `max m  s.t.  Herm(e^{j theta} A) + tau (r^2 I - A*A) >= m I, tau >= 0`.
fn margin_sdp_at(parts: &HermitianParts, neg: &ComplexMatrix, theta: f64) -> Option<f64> {
    let (ct, st) = (theta.cos(), theta.sin());
    let base = parts.h.map(|z| z * ct) - parts.s.map(|z| z * st);
    let n = base.nrows();
    let mut prob = SdpProblem::new();
    let m = prob.scalar();
    let tau = prob.nonneg_scalar();
    let identity = ComplexMatrix::identity(n, n);
    prob.add_lmi(
        HermitianLmiTerm::new(base, LmiSense::PosSemidef)
            .with(m, identity.map(|z| -z))
            .with(tau, neg.clone()),
    )
    .ok()?;
    prob.set_objective(Objective::Maximize(vec![(m, 1.0)]));
    let sol = prob.solve();
    match sol.status {
        SdpStatus::Optimal => Some(sol.objective_value),
        _ => None,
    }
}

pub(crate) struct RSectorialDetail {
    pub holds: bool,
    pub margin: f64,
    pub witness_rotation: f64,
    pub empty: bool,
}

/// Shared decision core. `fast` skips the confirming SDP and allows the
/// rotation sweep to stop at the first separating rotation.
pub(crate) fn r_sectorial_detail(a: &ComplexMatrix, r: f64, fast: bool) -> Result<RSectorialDetail> {
    require_square(a)?;
    if !crate::matnum::entries_finite(a) {
        return Err(Error::NonFinite);
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("gain threshold r must be >= 0, got {r}")));
    }
    let tol = sector_tol(a);
    let sv = singular_values(a)?;
    let sigma_max = sv[0];
    if r > sigma_max + tol {
        // W_{>=r}(A) is empty; (0,0) cannot belong to it.
        return Ok(RSectorialDetail {
            holds: true,
            margin: f64::INFINITY,
            witness_rotation: 0.0,
            empty: true,
        });
    }
    let parts = hermitian_split(a)?;
    let gram = a.adjoint() * a;
    let n = a.nrows();
    let neg = ComplexMatrix::identity(n, n).map(|z| z * (r * r)) - gram;
    let early = if fast { Some(tol) } else { None };
    let (theta, margin_eig) = best_rotation(&parts, &neg, early);
    let margin = if fast {
        margin_eig
    } else {
        // Authoritative certificate from the S-procedure SDP at the witness.
        match margin_sdp_at(&parts, &neg, theta) {
            Some(m) if (m - margin_eig).abs() <= 1e-6 * (1.0 + margin_eig.abs()) => m,
            Some(m) => m.min(margin_eig),
            None => margin_eig,
        }
    };
    Ok(RSectorialDetail {
        holds: margin > tol,
        margin,
        witness_rotation: theta,
        empty: false,
    })
}

/// Tests whether the origin lies outside the gain-constrained numerical
/// range `W_{>=r}(A)`, i.e. whether some rotation separates the range from
/// the origin with a nonnegative S-procedure multiplier.
pub fn is_r_sectorial(a: &ComplexMatrix, r: f64) -> Result<RSectorial> {
    let detail = r_sectorial_detail(a, r, false)?;
    Ok(RSectorial {
        holds: detail.holds,
        margin: detail.margin,
        witness_rotation: detail.witness_rotation,
    })
}

fn empty_sector(r: f64) -> ConstrainedPhaseSector {
    ConstrainedPhaseSector {
        r,
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
        empty: true,
    }
}

/// Solves the pair of constrained-phase SDPs on the pre-rotated matrix.
///
/// On a matrix whose constrained range lies in the open right half plane:
/// `max g: g A_h - A_s + tau (A*A - r^2 I) <= 0` gives `tan(psi_lo)` and
/// `min h: A_s - h A_h + tau (A*A - r^2 I) <= 0` gives `tan(psi_hi)`.
fn phase_sdps(parts: &HermitianParts, pos: &ComplexMatrix) -> Result<(f64, f64)> {
    let solve_branch = |lower: bool| -> Result<f64> {
        let mut prob = SdpProblem::new();
        let v = prob.scalar();
        let tau = prob.nonneg_scalar();
        let (constant, coeff) = if lower {
            (parts.s.map(|z| -z), parts.h.clone())
        } else {
            (parts.s.clone(), parts.h.map(|z| -z))
        };
        prob.add_lmi(
            HermitianLmiTerm::new(constant, LmiSense::NegSemidef)
                .with(v, coeff)
                .with(tau, pos.clone()),
        )?;
        prob.set_objective(if lower {
            Objective::Maximize(vec![(v, 1.0)])
        } else {
            Objective::Minimize(vec![(v, 1.0)])
        });
        let sol = prob.solve();
        match sol.status {
            SdpStatus::Optimal => Ok(sol.objective_value),
            other => Err(Error::SdpUnknown(format!(
                "constrained-phase SDP ended with {other:?}"
            ))),
        }
    };
    let g = solve_branch(true)?;
    let h = solve_branch(false)?;
    Ok((g, h))
}

/// Constrained phase sector `Psi_r(A)` via the S-procedure SDP pair, after a
/// pre-rotation that puts the constrained range in the open right half plane.
pub fn constrained_phase_sector(a: &ComplexMatrix, r: f64) -> Result<ConstrainedPhaseSector> {
    let detail = r_sectorial_detail(a, r, false)?;
    constrained_phase_sector_with(a, r, &detail)
}

pub(crate) fn constrained_phase_sector_with(
    a: &ComplexMatrix,
    r: f64,
    detail: &RSectorialDetail,
) -> Result<ConstrainedPhaseSector> {
    if detail.empty {
        return Ok(empty_sector(r));
    }
    if !detail.holds {
        return Err(Error::NotRSectorial {
            r,
            margin: detail.margin,
        });
    }
    let rho = detail.witness_rotation;
    let rot = Complex64::from_polar(1.0, rho);
    let rotated = a.map(|z| z * rot);
    let parts = hermitian_split(&rotated)?;
    let gram = a.adjoint() * a;
    let n = a.nrows();
    let pos = gram - ComplexMatrix::identity(n, n).map(|z| z * (r * r));
    let (g, h) = phase_sdps(&parts, &pos)?;
    let mut lo = g.atan() - rho;
    let mut hi = h.atan() - rho;
    if hi < lo {
        // The two SDPs bracket the same sector; tiny solver noise may cross
        // them on degenerate (single-point) ranges.
        if hi < lo - 1e-6 {
            return Err(Error::SdpUnknown(format!(
                "constrained-phase SDPs crossed: lo={lo}, hi={hi}"
            )));
        }
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut center = 0.5 * (lo + hi);
    use std::f64::consts::PI;
    while center > PI {
        lo -= 2.0 * PI;
        hi -= 2.0 * PI;
        center -= 2.0 * PI;
    }
    while center <= -PI {
        lo += 2.0 * PI;
        hi += 2.0 * PI;
        center += 2.0 * PI;
    }
    Ok(ConstrainedPhaseSector {
        r,
        lo,
        hi,
        empty: false,
    })
}

/// Constrained gain `gamma_theta(A)` for an accretive matrix via the
/// S-procedure SDP pair (`theta` in `[0, pi/2)`); other inputs fall back to
/// the sampling oracle.
pub fn constrained_gain(a: &ComplexMatrix, theta: f64) -> Result<ConstrainedGain> {
    use std::f64::consts::{FRAC_PI_2, PI};
    require_square(a)?;
    if !(0.0..PI).contains(&theta) {
        return Err(Error::Domain(format!(
            "theta must lie in [0, pi), got {theta}"
        )));
    }
    let tol = sector_tol(a);
    let class = classify_sectoriality(a, tol)?;
    if class.tag != SectorialTag::Sectorial {
        return Err(Error::NotSectorial {
            margin: class.margin,
        });
    }
    let sector = matrix_phases(a, tol)?;
    let accretive = sector.lo > -FRAC_PI_2 && sector.hi < FRAC_PI_2;
    if accretive && theta < FRAC_PI_2 {
        let parts = hermitian_split(a)?;
        let gram = a.adjoint() * a;
        let n = a.nrows();
        let identity = ComplexMatrix::identity(n, n);
        let t = theta.tan();
        let solve_branch = |upper: bool| -> Result<f64> {
            let m = if upper {
                &parts.s - parts.h.map(|z| z * t)
            } else {
                parts.s.map(|z| -z) - parts.h.map(|z| z * t)
            };
            let mut prob = SdpProblem::new();
            let g = prob.nonneg_scalar();
            let tau = prob.nonneg_scalar();
            prob.add_lmi(
                HermitianLmiTerm::new(gram.clone(), LmiSense::NegSemidef)
                    .with(g, identity.map(|z| -z))
                    .with(tau, m),
            )?;
            prob.set_objective(Objective::Minimize(vec![(g, 1.0)]));
            let sol = prob.solve();
            match sol.status {
                SdpStatus::Optimal => Ok(sol.objective_value.max(0.0)),
                other => Err(Error::SdpUnknown(format!(
                    "constrained-gain SDP ended with {other:?}"
                ))),
            }
        };
        let g = solve_branch(true)?;
        let h = solve_branch(false)?;
        Ok(ConstrainedGain {
            theta,
            value: g.max(h).sqrt(),
            method: GainMethod::Sdp,
        })
    } else {
        let value = sampled_gain_envelope(a, theta, 20_000, 0x5eed).unwrap_or(0.0);
        Ok(ConstrainedGain {
            theta,
            value,
            method: GainMethod::Sampling,
        })
    }
}

// ---------------------------------------------------------------------------
// Sampling oracle
// ---------------------------------------------------------------------------

fn random_unit_vector(rng: &mut impl rand::Rng, n: usize) -> CVec {
    // Box-Muller pairs give an isotropic complex Gaussian; normalizing yields
    // the uniform distribution on the unit sphere.
    loop {
        let mut v = CVec::zeros(n);
        for i in 0..n {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random::<f64>();
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = 2.0 * std::f64::consts::PI * u2;
            v[i] = Complex64::new(radius * angle.cos(), radius * angle.sin());
        }
        let norm = v.norm();
        if norm > 1e-12 {
            return v.map(|z| z / norm);
        }
    }
}

fn quad_form(a: &ComplexMatrix, x: &CVec) -> Complex64 {
    let ax = a * x;
    let mut z = Complex64::new(0.0, 0.0);
    for i in 0..x.len() {
        z += x[i].conj() * ax[i];
    }
    z
}

fn gain_squared(a: &ComplexMatrix, x: &CVec) -> f64 {
    (a * x).norm_squared()
}

/// Real-coordinate gradient of `x -> arg(x*Ax)` (length `2n`: d/dRe then d/dIm
/// per coordinate, interleaved).
fn angle_gradient(a: &ComplexMatrix, x: &CVec) -> Vec<f64> {
    let p = a * x;
    let q = a.adjoint() * x;
    let z = quad_form(a, x);
    let denom = z.norm_sqr().max(1e-300);
    let zc = z.conj();
    let n = x.len();
    let mut grad = vec![0.0; 2 * n];
    for i in 0..n {
        let dz_re = p[i] + q[i].conj();
        let dz_im = Complex64::i() * (q[i].conj() - p[i]);
        grad[2 * i] = (zc * dz_re).im / denom;
        grad[2 * i + 1] = (zc * dz_im).im / denom;
    }
    grad
}

/// Real-coordinate gradient of `x -> ||Ax||^2 = x*(A*A)x` given `gram = A*A`.
fn gain_gradient(gram: &ComplexMatrix, x: &CVec) -> Vec<f64> {
    let gx = gram * x;
    let n = x.len();
    let mut grad = vec![0.0; 2 * n];
    for i in 0..n {
        grad[2 * i] = 2.0 * gx[i].re;
        grad[2 * i + 1] = 2.0 * gx[i].im;
    }
    grad
}

fn to_real(x: &CVec) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * x.len());
    for z in x.iter() {
        v.push(z.re);
        v.push(z.im);
    }
    v
}

fn from_real(v: &[f64]) -> CVec {
    CVec::from_fn(v.len() / 2, |i, _| Complex64::new(v[2 * i], v[2 * i + 1]))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn normalize_real(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 1e-300 {
        for e in v.iter_mut() {
            *e /= n;
        }
    }
}

/// Projected-ascent climber on the unit sphere with one optional inequality
/// constraint `c(x) >= 0`. Gradients are projected onto the sphere tangent;
/// when the constraint is active and the objective pushes outward, the ascent
/// slides along the constraint boundary. Infeasible trial points are pulled
/// back along the constraint gradient.
fn climb(
    objective: &dyn Fn(&CVec) -> f64,
    objective_grad: &dyn Fn(&CVec) -> Vec<f64>,
    constraint: Option<(&dyn Fn(&CVec) -> f64, &dyn Fn(&CVec) -> Vec<f64>)>,
    x0: &CVec,
    steps: usize,
) -> CVec {
    let mut xr = to_real(x0);
    normalize_real(&mut xr);
    let mut x = from_real(&xr);
    let mut best_x = x.clone();
    let mut best_f = objective(&x);
    let mut t = 0.05;
    let mut resets = 3;
    let scale = 1e-11
        * (1.0
            + constraint
                .as_ref()
                .map(|(c, _)| c(&x).abs())
                .unwrap_or(0.0));

    for _ in 0..steps {
        let mut g = objective_grad(&x);
        // Tangent to the unit sphere.
        let radial = dot(&g, &xr);
        for (gi, xi) in g.iter_mut().zip(xr.iter()) {
            *gi -= radial * xi;
        }
        if let Some((cfun, cgrad)) = constraint.as_ref() {
            let cval = cfun(&x);
            if cval < 1e-5 * (1.0 + cval.abs()) {
                let mut cg = cgrad(&x);
                let cr = dot(&cg, &xr);
                for (ci, xi) in cg.iter_mut().zip(xr.iter()) {
                    *ci -= cr * xi;
                }
                let along = dot(&g, &cg);
                let cg2 = dot(&cg, &cg);
                if along < 0.0 && cg2 > 1e-300 {
                    for (gi, ci) in g.iter_mut().zip(cg.iter()) {
                        *gi -= along / cg2 * ci;
                    }
                }
            }
        }
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-14 {
            break;
        }

        let mut accepted = false;
        for _ in 0..20 {
            let mut trial: Vec<f64> = xr
                .iter()
                .zip(g.iter())
                .map(|(xi, gi)| xi + t * gi / gnorm)
                .collect();
            normalize_real(&mut trial);
            let mut xt = from_real(&trial);
            if let Some((cfun, cgrad)) = constraint.as_ref() {
                if !pull_back(&mut xt, cfun, cgrad, scale) {
                    t *= 0.5;
                    continue;
                }
            }
            let ft = objective(&xt);
            if ft > best_f {
                best_f = ft;
                best_x = xt.clone();
                xr = to_real(&xt);
                x = xt;
                t = (t * 1.4).min(0.5);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted && t < 1e-13 {
            // The line search collapsed, usually while hugging a curved
            // boundary; a reset often unsticks it.
            if resets == 0 {
                break;
            }
            resets -= 1;
            t = 1e-3;
        }
    }

    // Shrinking pattern-search polish: derivative-free, handles the curved
    // active boundary better than projected gradient steps do. Fixed budget:
    // the radius halves every batch whether or not it improved.
    let mut radius = 2e-2;
    let mut rng_state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        // xorshift64*, deterministic
        rng_state ^= rng_state >> 12;
        rng_state ^= rng_state << 25;
        rng_state ^= rng_state >> 27;
        (rng_state.wrapping_mul(0x2545_f491_4f6c_dd1d) >> 11) as f64 / (1u64 << 53) as f64
    };
    while radius > 1e-10 {
        for _ in 0..80 {
            let base = to_real(&best_x);
            let mut trial: Vec<f64> = base
                .iter()
                .map(|&v| v + radius * (2.0 * next() - 1.0))
                .collect();
            normalize_real(&mut trial);
            let mut xt = from_real(&trial);
            if let Some((cfun, cgrad)) = constraint.as_ref() {
                if !pull_back(&mut xt, cfun, cgrad, scale) {
                    continue;
                }
            }
            let ft = objective(&xt);
            if ft > best_f {
                best_f = ft;
                best_x = xt;
            }
        }
        radius *= 0.65;
    }
    // Land strictly on the feasible side so downstream filters with their own
    // (tighter) tolerances keep the refined point.
    if let Some((cfun, cgrad)) = constraint.as_ref() {
        let mut xt = best_x.clone();
        for _ in 0..20 {
            let cval = cfun(&xt);
            if cval >= 0.0 {
                break;
            }
            let cg = cgrad(&xt);
            let cg2 = dot(&cg, &cg).max(1e-300);
            let shift = (-cval * 1.01 + 1e-305) / cg2;
            let mut tr = to_real(&xt);
            for (ti, ci) in tr.iter_mut().zip(cg.iter()) {
                *ti += shift * ci;
            }
            normalize_real(&mut tr);
            xt = from_real(&tr);
        }
        if cfun(&xt) >= 0.0 {
            best_x = xt;
        }
    }
    best_x
}

/// Projects a point back to the feasible side of `c(x) >= 0` along the
/// constraint gradient, staying on the unit sphere. Returns feasibility.
fn pull_back(
    xt: &mut CVec,
    cfun: &dyn Fn(&CVec) -> f64,
    cgrad: &dyn Fn(&CVec) -> Vec<f64>,
    scale: f64,
) -> bool {
    for _ in 0..12 {
        let cval = cfun(xt);
        if cval >= -scale {
            return true;
        }
        let cg = cgrad(xt);
        let cg2 = dot(&cg, &cg).max(1e-300);
        let shift = -cval * 1.000_001 / cg2;
        let mut tr = to_real(xt);
        for (ti, ci) in tr.iter_mut().zip(cg.iter()) {
            *ti += shift * ci;
        }
        normalize_real(&mut tr);
        *xt = from_real(&tr);
    }
    cfun(xt) >= -scale
}

/// Deterministic-under-seed cloud of Davis-Wielandt shell points, with
/// projected-ascent refinement from the most extreme-angle seeds.
pub fn shell_sample_oracle(a: &ComplexMatrix, samples: usize, seed: u64) -> Vec<ShellPoint> {
    let (points, _) = shell_cloud(a, samples, seed, None);
    points
}

/// Shared sampler: returns shell points and the corresponding unit vectors.
fn shell_cloud(
    a: &ComplexMatrix,
    samples: usize,
    seed: u64,
    r_floor: Option<f64>,
) -> (Vec<ShellPoint>, Vec<CVec>) {
    use rand::SeedableRng;
    let n = a.nrows();
    let chunk = 1024usize;
    let chunks = samples.div_ceil(chunk).max(1);
    let mut vectors: Vec<CVec> = (0..chunks)
        .into_par_iter()
        .flat_map(|c| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let count = chunk.min(samples - c * chunk);
            (0..count)
                .map(|_| random_unit_vector(&mut rng, n))
                .collect::<Vec<_>>()
        })
        .collect();

    // Deterministic seeds around the leading singular directions: at high
    // gain floors the feasible set shrinks to a cap around the top right
    // singular vector, where uniform samples become sparse.
    let svd = a.clone().svd(false, true);
    if let Some(vt) = svd.v_t {
        let vmat = vt.adjoint();
        let top = CVec::from_column_slice(vmat.column(0).as_slice());
        vectors.push(top.clone());
        for k in 1..n {
            let other = CVec::from_column_slice(vmat.column(k).as_slice());
            for eps in [0.15, 0.4, 0.8] {
                for phase in [
                    Complex64::new(1.0, 0.0),
                    Complex64::new(-1.0, 0.0),
                    Complex64::new(0.0, 1.0),
                    Complex64::new(0.0, -1.0),
                ] {
                    let mut v = &top + other.map(|z| z * phase * eps);
                    let norm = v.norm();
                    if norm > 1e-12 {
                        v /= Complex64::new(norm, 0.0);
                        vectors.push(v);
                    }
                }
            }
        }
    }

    // Refinement: climb toward both angular extremes from the most extreme
    // seeds (anchored away from the branch cut by the cloud's mean direction).
    let evaluate = |x: &CVec| {
        let z = quad_form(a, x);
        (z, gain_squared(a, x))
    };
    let feasible = |h2: f64| r_floor.map(|r| h2 >= r * r * (1.0 - 1e-12)).unwrap_or(true);
    let mut mean = Complex64::new(0.0, 0.0);
    for x in &vectors {
        let (z, h2) = evaluate(x);
        if feasible(h2) && z.norm() > 1e-14 {
            mean += z / z.norm();
        }
    }
    let anchor = if mean.norm() > 1e-12 { mean.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, -anchor);
    let angle_of = |x: &CVec| (rot * quad_form(a, x)).arg();

    let mut ranked: Vec<(f64, usize)> = vectors
        .iter()
        .enumerate()
        .filter(|(_, x)| feasible(gain_squared(a, x)))
        .map(|(i, x)| (angle_of(x), i))
        .collect();
    ranked.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let take = 24usize.min(ranked.len());
    let mut starts: Vec<(usize, f64)> = Vec::new();
    for &(_, i) in ranked.iter().take(take) {
        starts.push((i, -1.0));
    }
    for &(_, i) in ranked.iter().rev().take(take) {
        starts.push((i, 1.0));
    }

    let gram = a.adjoint() * a;
    let refined: Vec<CVec> = starts
        .par_iter()
        .map(|&(i, sign)| {
            let objective = move |x: &CVec| sign * (rot * quad_form(a, x)).arg();
            let objective_grad = move |x: &CVec| {
                let mut g = angle_gradient(a, x);
                if sign < 0.0 {
                    for e in g.iter_mut() {
                        *e = -*e;
                    }
                }
                g
            };
            match r_floor {
                Some(r) => {
                    let r2 = r * r;
                    let cfun = move |x: &CVec| gain_squared(a, x) - r2;
                    let cgrad = |x: &CVec| gain_gradient(&gram, x);
                    climb(
                        &objective,
                        &objective_grad,
                        Some((&cfun, &cgrad)),
                        &vectors[i],
                        1500,
                    )
                }
                None => climb(&objective, &objective_grad, None, &vectors[i], 300),
            }
        })
        .collect();
    vectors.extend(refined);

    let points = vectors
        .iter()
        .map(|x| {
            let z = quad_form(a, x);
            ShellPoint {
                re: z.re,
                im: z.im,
                h2: gain_squared(a, x),
            }
        })
        .collect();
    (points, vectors)
}

/// Empirical `[psi_lo, psi_hi]` envelope of `W_{>=r}(A)` from the sampling
/// oracle. Returns `None` when no sample clears the gain floor.
pub fn sampled_phase_envelope(
    a: &ComplexMatrix,
    r: f64,
    samples: usize,
    seed: u64,
) -> Option<(f64, f64)> {
    let (points, vectors) = shell_cloud(a, samples, seed, Some(r));
    let r2 = r * r * (1.0 - 1e-12);
    let mut mean = Complex64::new(0.0, 0.0);
    for p in &points {
        if p.h2 >= r2 {
            let z = Complex64::new(p.re, p.im);
            if z.norm() > 1e-14 {
                mean += z / z.norm();
            }
        }
    }
    if mean.norm() < 1e-12 {
        let any = points.iter().any(|p| p.h2 >= r2);
        if !any {
            return None;
        }
    }
    let anchor = if mean.norm() > 1e-12 { mean.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, -anchor);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in &vectors {
        if gain_squared(a, x) >= r2 {
            let ang = (rot * quad_form(a, x)).arg();
            lo = lo.min(ang);
            hi = hi.max(ang);
        }
    }
    if lo.is_infinite() {
        return None;
    }
    Some((lo + anchor, hi + anchor))
}

/// Empirical `gamma_theta(A)` from the sampling oracle: the best `||Ax||`
/// among unit vectors whose quadratic-form angle avoids `(-theta, theta)`,
/// improved by projected ascent along the exclusion boundary.
pub fn sampled_gain_envelope(
    a: &ComplexMatrix,
    theta: f64,
    samples: usize,
    seed: u64,
) -> Option<f64> {
    if theta == 0.0 {
        return singular_values(a).ok().map(|sv| sv[0]);
    }
    let (_, vectors) = shell_cloud(a, samples, seed, None);
    let gram = a.adjoint() * a;
    let excluded = |z: Complex64| {
        let ang = z.arg();
        !(-theta < ang && ang < theta)
    };
    let mut ranked: Vec<(f64, usize, f64)> = vectors
        .iter()
        .enumerate()
        .filter_map(|(i, x)| {
            let z = quad_form(a, x);
            if excluded(z) {
                let side = if z.arg() >= 0.0 { 1.0 } else { -1.0 };
                Some((gain_squared(a, x), i, side))
            } else {
                None
            }
        })
        .collect();
    if ranked.is_empty() {
        return None;
    }
    ranked.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let mut best = ranked[0].0;
    let starts: Vec<(usize, f64)> = ranked.iter().take(32).map(|&(_, i, s)| (i, s)).collect();
    let refined: Vec<f64> = starts
        .par_iter()
        .map(|&(i, side)| {
            // Constraint: side * (angle - side*theta) >= 0, kept smooth by
            // rotating the exclusion boundary onto the positive real axis.
            let rotc = Complex64::from_polar(1.0, -side * theta);
            let cfun = move |x: &CVec| side * (rotc * quad_form(a, x)).arg();
            let cgrad = move |x: &CVec| {
                let mut g = angle_gradient(a, x);
                if side < 0.0 {
                    for e in g.iter_mut() {
                        *e = -*e;
                    }
                }
                g
            };
            let objective = |x: &CVec| gain_squared(a, x);
            let objective_grad = |x: &CVec| gain_gradient(&gram, x);
            let x = climb(
                &objective,
                &objective_grad,
                Some((&cfun, &cgrad)),
                &vectors[i],
                1500,
            );
            let z = quad_form(a, &x);
            if excluded(z) || cfun(&x) >= -1e-9 {
                gain_squared(a, &x)
            } else {
                0.0
            }
        })
        .collect();
    for v in refined {
        best = best.max(v);
    }
    Some(best.sqrt())
}
