//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (run with `--nocapture` to see them).
//!
//! Criterion 1 is asserted exactly as stated for the benchmark second-order
//! example at a cut-off of 3. With the printed matrices the gain product
//! only drops below one at omega = 3.2895, so the gain clause fails on
//! [3, 3.29) and the criterion is expected red; the test prints the blocking
//! numbers and a companion test demonstrates the working certification at a
//! cut-off of 4.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::prelude::*;

use phasegain::dwshell::{
    constrained_phase_sector, sampled_phase_envelope, shell_sample_oracle,
};
use phasegain::kyp::{bounded_sectored_check, BoundedSectoredOutcome};
use phasegain::lti::{
    build_indented_contour, frequency_sweep, gang_of_four, imaginary_axis_poles, is_hurwitz,
    sample_at_infinity, PoleSet, StateSpace,
};
use phasegain::matnum::{
    classify_sectoriality, default_sector_tol, matrix_phases, singular_values, spectral_norm,
    ComplexMatrix, SectorialTag,
};
use phasegain::stability::{
    closed_loop_is_stable, dw_gain_stability_check, dw_matrix_invertibility,
    dw_phase_stability_check, frequencywise_mixed_check, in_fan, in_vase, mixed_cutoff_check,
    robust_stabilization_epsilon, small_gain_check, small_phase_check,
    small_vase_necessity_check, vase_invertibility, CheckOptions, FanVaseSpec, RegionSpec,
    StabilityVerdict, Verdict,
};

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("phasegain-acc-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_file(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_phasegain"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const EXAMPLE1_PLANT_DOC: &str = r#"{
  "kind": "second_order",
  "m": [[1,0,0],[0,1,0],[0,0,1]],
  "c_damp": [[3,0,0],[0,2,0],[0,1,2]],
  "k": [[6,0,2],[0,7,0],[2,1,7]],
  "b_in": [[1,0,0],[0,1,0],[0,0,1]],
  "h1": [[0.03,0.02,0.01],[0.01,0.03,0],[0,0.01,0.02]],
  "h2": [[70,0,2],[0,70,1],[0,2,60]]
}"#;

const EXAMPLE1_CONTROLLER_DOC: &str = r#"{
  "kind": "state_space",
  "a": [[-10,0,0],[0,-10,0],[0,0,-10]],
  "b": [[1,0,0],[0,1,0],[0,0,1]],
  "c": [[1,0,0],[0,1,0],[0,0,1]],
  "d": [[0,0,0],[0,0,0],[0,0,0]]
}"#;

/// Reads a sweep CSV into (omega, sigma_max, phi_hi, phi_lo) rows.
fn read_sweep_csv(path: &Path) -> Vec<(f64, f64, Option<f64>, Option<f64>)> {
    let body = std::fs::read_to_string(path).unwrap();
    let mut rows = Vec::new();
    for line in body.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let omega: f64 = fields[0].parse().unwrap();
        if !omega.is_finite() {
            continue;
        }
        let sigma: f64 = fields[1].parse().unwrap();
        let nf = fields.len();
        let phi_hi = fields[nf - 3].parse().ok();
        let phi_lo = fields[nf - 2].parse().ok();
        rows.push((omega, sigma, phi_hi, phi_lo));
    }
    rows
}

#[test]
fn criterion_1_example1_reproduction() {
    let started = Instant::now();
    let dir = scratch_dir("c1");
    let plant_doc = write_file(&dir, "plant.json", EXAMPLE1_PLANT_DOC);
    let ctrl_doc = write_file(&dir, "controller.json", EXAMPLE1_CONTROLLER_DOC);

    // Closed-loop eigenvalue oracle.
    let plant = example1_plant();
    let controller = example1_controller();
    let g4 = gang_of_four(&plant, &controller).unwrap();
    let oracle_stable = is_hurwitz(&g4, 1e-9);

    // Sweep CSVs for both systems on the default grid.
    let plant_csv = dir.join("plant_sweep.csv");
    let ctrl_csv = dir.join("ctrl_sweep.csv");
    for (doc, out) in [(&plant_doc, &plant_csv), (&ctrl_doc, &ctrl_csv)] {
        let (code, _, stderr) = run_cli(&[
            "sweep",
            "--system",
            doc,
            "--out",
            out.to_str().unwrap(),
            "--grid-points",
            "400",
            "--omega-min",
            "0",
            "--omega-max",
            "1e4",
        ]);
        assert_eq!(code, 0, "sweep failed: {stderr}");
    }
    let p_rows = read_sweep_csv(&plant_csv);
    let c_rows = read_sweep_csv(&ctrl_csv);
    assert_eq!(p_rows.len(), c_rows.len());

    let pi = std::f64::consts::PI;
    let mut worst_product_high: Option<(f64, f64)> = None;
    let mut phase_ok_low = true;
    let mut gain_ok_high = true;
    for ((wp, sp, hi_p, lo_p), (_, sc, hi_c, lo_c)) in p_rows.iter().zip(c_rows.iter()) {
        if *wp >= 3.0 {
            let product = sp * sc;
            if product >= 1.0 {
                gain_ok_high = false;
                if worst_product_high.map(|(_, v)| product > v).unwrap_or(true) {
                    worst_product_high = Some((*wp, product));
                }
            }
        } else {
            match (hi_p, lo_p, hi_c, lo_c) {
                (Some(hp), Some(lp), Some(hc), Some(lc)) => {
                    if hp + hc >= pi || lp + lc <= -pi {
                        phase_ok_low = false;
                    }
                }
                _ => phase_ok_low = false,
            }
        }
    }

    // The analyze call, exactly as the criterion states.
    let (exit_code, stdout, _) = run_cli(&[
        "analyze",
        "--theorem",
        "mixed-cutoff",
        "--plant",
        &plant_doc,
        "--controller",
        &ctrl_doc,
        "--omega-c",
        "3",
        "--grid-points",
        "400",
    ]);

    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 1: analyze at cutoff 3 exited {exit_code} ({}); \
         gain product < 1 on [3, 1e4] grid: {gain_ok_high} (worst {:?}); \
         phase sums inside (-pi, pi) on [0, 3): {phase_ok_low}; \
         oracle stable: {oracle_stable}; runtime {elapsed:.1}s",
        stdout.lines().next().unwrap_or(""),
        worst_product_high,
    );
    if !gain_ok_high {
        println!(
            "criterion 1: note — with the printed matrices the gain product at omega=3 is \
             1.2211 and only crosses below 1 at omega=3.2895, so the stated cut-off of 3 \
             cannot satisfy the high-band gain condition; a cut-off of 4 certifies (see \
             companion test)."
        );
    }
    let pass = exit_code == 0 && gain_ok_high && phase_ok_low && oracle_stable && elapsed < 10.0;
    println!("criterion 1: {}", if pass { "PASS" } else { "FAIL" });

    assert!(oracle_stable, "closed-loop oracle must confirm stability");
    assert!(phase_ok_low, "phase sums must hold on [0, 3)");
    assert!(elapsed < 10.0, "runtime budget exceeded: {elapsed:.1}s");
    assert!(
        gain_ok_high,
        "gain product must stay below one on [3, 1e4] (worst {worst_product_high:?})"
    );
    assert_eq!(exit_code, 0, "analyze at cutoff 3 must report Stable");
}

#[test]
fn criterion_1_companion_certification_at_cutoff_4() {
    let plant = example1_plant();
    let controller = example1_controller();
    let opts = CheckOptions::default();
    let verdict = mixed_cutoff_check(&plant, &controller, 4.0, &opts).unwrap();
    assert_eq!(
        verdict.verdict,
        Verdict::Stable,
        "failures: {:?}",
        verdict.failures
    );
    assert!(closed_loop_is_stable(&plant, &controller).unwrap());

    // Neither single-condition theorem certifies this pair: the gain product
    // exceeds one at low frequency and the phase sums leave (-pi, pi) at
    // high frequency; a cut-off far above the crossover reintroduces the
    // failing phase band.
    let sg = small_gain_check(&plant, &controller, &opts).unwrap();
    assert_eq!(sg.verdict, Verdict::ConditionFailed);
    assert!(sg.failures.iter().any(|f| f.omega < 3.0));
    let sp = small_phase_check(&plant, &controller, &opts).unwrap();
    assert_eq!(sp.verdict, Verdict::ConditionFailed);
    assert!(sp.failures.iter().any(|f| f.omega > 4.0));
    let far = mixed_cutoff_check(&plant, &controller, 100.0, &opts).unwrap();
    assert_eq!(far.verdict, Verdict::ConditionFailed);
    assert!(far
        .failures
        .iter()
        .any(|f| f.omega > 4.0 && f.omega < 100.0));

    println!(
        "criterion 1 companion: PASS — cutoff 4 certifies Stable with margin {:.3e}, oracle \
         agrees; small-gain, small-phase and cutoff-100 all fail as they should",
        verdict.margins_min
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: randomized soundness across the seven checkers
// ---------------------------------------------------------------------------

/// MIMO system with sectorial frequency response everywhere: an orthogonal
/// conjugation of a diagonal of first-order lags (phases within (-pi/2, 0]).
fn random_lag_network(rng: &mut rand_chacha::ChaCha8Rng, n: usize, gain: f64) -> StateSpace {
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        let pole = 0.3 + 3.0 * rng.random::<f64>();
        let k = gain * (0.4 + 0.6 * rng.random::<f64>());
        a[(i, i)] = -pole;
        b[(i, i)] = 1.0;
        c[(i, i)] = k * pole;
    }
    // Random orthogonal conjugation keeps phases and gains.
    let q = random_matrix(rng, n, n).qr().q();
    StateSpace::new(a.clone(), &a * 0.0 + b * q.transpose(), q * c, DMatrix::zeros(n, n)).unwrap()
}

fn assert_sound(
    label: &str,
    p: &StateSpace,
    c: &StateSpace,
    verdict: &StabilityVerdict,
    stable_count: &mut usize,
) {
    if verdict.verdict == Verdict::Stable {
        *stable_count += 1;
        let hurwitz = closed_loop_is_stable(p, c).unwrap();
        assert!(
            hurwitz,
            "{label}: Stable verdict with non-Hurwitz closed loop (margins {:.3e})",
            verdict.margins_min
        );
    }
}

#[test]
fn criterion_2_checker_soundness_suite() {
    let started = Instant::now();
    let mut rng = rng(0xacc2);
    let opts = CheckOptions {
        grid_points: 60,
        omega_min: 0.0,
        omega_max: 1e3,
        ..CheckOptions::default()
    };
    let mut stable = 0usize;
    let mut total = 0usize;

    // Small gain: scaled pairs, half comfortably inside, half violating.
    for k in 0..75 {
        let p_raw = random_stable(&mut rng, 3, 2, k % 3 == 0);
        let c_raw = random_stable(&mut rng, 2, 2, false);
        let target = if k % 2 == 0 { 0.6 } else { 1.6 };
        let scale = target / (hinf_norm(&p_raw) * hinf_norm(&c_raw)).max(1e-9);
        let p = p_raw.scaled(scale);
        let v = small_gain_check(&p, &c_raw, &opts).unwrap();
        assert_sound("small-gain", &p, &c_raw, &v, &mut stable);
        total += 1;
    }

    // Small phase: lag networks (phase-friendly) plus wild pairs.
    for k in 0..75 {
        let (p, c) = if k % 2 == 0 {
            let (g1, g2) = (1.0 + 4.0 * rng.random::<f64>(), 1.0 + 4.0 * rng.random::<f64>());
            (
                random_lag_network(&mut rng, 2, g1),
                random_lag_network(&mut rng, 2, g2),
            )
        } else {
            (
                random_stable(&mut rng, 3, 2, false),
                random_stable(&mut rng, 2, 2, false),
            )
        };
        let v = small_phase_check(&p, &c, &opts).unwrap();
        assert_sound("small-phase", &p, &c, &v, &mut stable);
        total += 1;
    }

    // Mixed cutoff: big low-frequency gain, lag phases.
    for k in 0..75 {
        let gp = 3.0 + 10.0 * rng.random::<f64>();
        let p = random_lag_network(&mut rng, 2, gp);
        let gc = 0.2 + 0.3 * rng.random::<f64>();
        let c = if k % 2 == 0 {
            random_lag_network(&mut rng, 2, gc)
        } else {
            random_stable(&mut rng, 2, 2, false)
        };
        let omega_c = 0.5 + 2.0 * rng.random::<f64>();
        let v = mixed_cutoff_check(&p, &c, omega_c, &opts).unwrap();
        assert_sound("mixed-cutoff", &p, &c, &v, &mut stable);
        total += 1;
    }

    // Frequency-wise fan/vase via the cut-off reduction spec.
    for k in 0..75 {
        let gp = 2.0 + 6.0 * rng.random::<f64>();
        let p = random_lag_network(&mut rng, 2, gp);
        let gc = 0.2 + 0.4 * rng.random::<f64>();
        let c = if k % 2 == 0 {
            random_lag_network(&mut rng, 2, gc)
        } else {
            random_stable(&mut rng, 2, 2, false)
        };
        let poles = imaginary_axis_poles(&p, opts.tol);
        let contour =
            build_indented_contour(&poles, 1e-3, opts.grid_points, opts.omega_min, opts.omega_max)
                .unwrap();
        let sweep = frequency_sweep(&p, &contour).unwrap();
        let inf = sample_at_infinity(&p);
        let spec = FanVaseSpec::cutoff_reduction(&sweep, Some(&inf), 1.0).unwrap();
        let v = frequencywise_mixed_check(&p, &c, &spec, &opts).unwrap();
        assert_sound("frequencywise-mixed", &p, &c, &v, &mut stable);
        total += 1;
    }

    // Small vase with necessity: scaled controllers against constant g and a
    // lead/lag h; every Stable verdict is probed with sampled vase members.
    let g_weight = StateSpace::static_gain(DMatrix::from_element(1, 1, 2.0)).unwrap();
    let h_weight = StateSpace::from_scalar_rational(&[1.0, 2.0], &[1.0, 3.0]).unwrap();
    for k in 0..75 {
        let c_raw = random_stable(&mut rng, 2, 1, false);
        let target = if k % 2 == 0 { 0.35 } else { 0.9 };
        let c = c_raw.scaled(target / hinf_norm(&c_raw).max(1e-9));
        let v = small_vase_necessity_check(&c, &g_weight, &h_weight, &opts).unwrap();
        if v.verdict == Verdict::Stable {
            stable += 1;
            for _ in 0..3 {
                // Vase members through the gain branch: ||P||_inf <= 2.
                let p_raw = random_stable(&mut rng, 2, 1, false);
                let p = p_raw.scaled(2.0 * rng.random::<f64>() / hinf_norm(&p_raw).max(1e-9));
                assert!(
                    closed_loop_is_stable(&p, &c).unwrap(),
                    "small-vase: Stable verdict but sampled vase member destabilizes"
                );
            }
        }
        total += 1;
    }

    // Davis-Wielandt phase checker: phase-friendly, gain-rescued, and wild.
    for k in 0..75 {
        let (g1, g2) = (1.0 + 2.0 * rng.random::<f64>(), 0.5 + 0.5 * rng.random::<f64>());
        let (p, c) = match k % 3 {
            0 => (
                random_lag_network(&mut rng, 2, g1),
                random_lag_network(&mut rng, 2, g2),
            ),
            1 => {
                // Third-order roll-off where the pure phase condition dies at
                // high frequency but the loop gain is already small.
                let p = StateSpace::from_scalar_rational(
                    &[4.0 + 6.0 * rng.random::<f64>()],
                    &[1.0, 3.0, 3.0, 1.0],
                )
                .unwrap();
                let c = StateSpace::static_gain(DMatrix::from_element(
                    1,
                    1,
                    0.02 + 0.05 * rng.random::<f64>(),
                ))
                .unwrap();
                (p, c)
            }
            _ => (
                random_stable(&mut rng, 3, 2, false),
                random_stable(&mut rng, 2, 2, false),
            ),
        };
        let v = dw_phase_stability_check(&p, &c, None, &opts).unwrap();
        assert_sound("dw-phase", &p, &c, &v, &mut stable);
        total += 1;
    }

    // Davis-Wielandt gain checker.
    for k in 0..75 {
        let p_raw = random_stable(&mut rng, 2, 2, false);
        let gc = 0.5 + 0.8 * rng.random::<f64>();
        let c = random_lag_network(&mut rng, 2, gc);
        let target = if k % 2 == 0 { 0.5 } else { 1.4 };
        let p = p_raw.scaled(target / (hinf_norm(&p_raw) * hinf_norm(&c)).max(1e-9));
        let v = dw_gain_stability_check(&p, &c, None, &opts).unwrap();
        assert_sound("dw-gain", &p, &c, &v, &mut stable);
        total += 1;
    }

    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 2: PASS — {total} randomized pairs across 7 checkers, {stable} Stable \
         verdicts, 0 soundness violations, {elapsed:.0}s"
    );
    assert!(total >= 500);
    assert!(stable >= 100, "suite should produce many Stable verdicts, got {stable}");
    assert!(elapsed < 300.0, "runtime budget exceeded: {elapsed:.0}s");
}

#[test]
fn criterion_3_constrained_phase_matches_decomposition() {
    let mut rng = rng(0xacc3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_sectorial(&mut rng, 3);
        let tol = default_sector_tol(&a);
        let phases = matrix_phases(&a, tol).unwrap();
        let sector = constrained_phase_sector(&a, 0.0).unwrap();
        worst = worst
            .max((sector.hi - phases.hi).abs())
            .max((sector.lo - phases.lo).abs());
        assert!(
            (sector.hi - phases.hi).abs() <= 1e-5,
            "upper phase mismatch: {} vs {}",
            sector.hi,
            phases.hi
        );
        assert!(
            (sector.lo - phases.lo).abs() <= 1e-5,
            "lower phase mismatch: {} vs {}",
            sector.lo,
            phases.lo
        );
    }
    println!("criterion 3: PASS — 100 random sectorial matrices, worst deviation {worst:.2e}");
}

#[test]
fn criterion_4_constrained_phase_curves() {
    let a = fig5_matrix();
    let sigma_max = singular_values(&a).unwrap()[0];
    let mut last: Option<(f64, f64)> = None;
    let mut worst_env: f64 = 0.0;
    for k in 0..50 {
        let r = sigma_max * k as f64 / 49.0 * (1.0 - 1e-9);
        let sector = constrained_phase_sector(&a, r).unwrap();
        assert!(!sector.empty, "sector empty at r={r} below sigma_max {sigma_max}");
        if let Some((lo_prev, hi_prev)) = last {
            assert!(sector.lo >= lo_prev - 1e-6, "psi_lo must be non-decreasing");
            assert!(sector.hi <= hi_prev + 1e-6, "psi_hi must be non-increasing");
        }
        last = Some((sector.lo, sector.hi));
        let (env_lo, env_hi) = sampled_phase_envelope(&a, r, 20_000, 0xf16_5).unwrap();
        worst_env = worst_env
            .max((env_hi - sector.hi).abs())
            .max((env_lo - sector.lo).abs());
        assert!(
            (env_hi - sector.hi).abs() <= 1e-3 && (env_lo - sector.lo).abs() <= 1e-3,
            "r={r}: SDP [{}, {}] vs sampled [{env_lo}, {env_hi}]",
            sector.lo,
            sector.hi
        );
    }
    // Nonempty right below the top gain, empty beyond.
    let near = constrained_phase_sector(&a, sigma_max - 1e-3).unwrap();
    assert!(!near.empty);
    let beyond = constrained_phase_sector(&a, sigma_max + 1e-3).unwrap();
    assert!(beyond.empty);
    println!(
        "criterion 4: PASS — 50-point curve monotone, empties past sigma_max {sigma_max:.4}, \
         worst oracle deviation {worst_env:.2e}"
    );
}

#[test]
fn criterion_5_scaling_law() {
    let mut rng = rng(0xacc5);
    let mut sqrt_dev: f64 = 0.0;
    let mut linear_dev: f64 = 0.0;
    for _ in 0..20 {
        let a = random_accretive(&mut rng, 3);
        let sigma = spectral_norm(&a);
        for tau in [0.25, 0.5, 1.0] {
            let scaled = a.map(|z| z * tau);
            for frac in [0.2, 0.5, 0.8] {
                let r = frac * tau * sigma;
                let left = constrained_phase_sector(&scaled, r).unwrap();
                let linear = constrained_phase_sector(&a, r / tau).unwrap();
                linear_dev = linear_dev
                    .max((left.hi - linear.hi).abs())
                    .max((left.lo - linear.lo).abs());
                let sqrt_form = constrained_phase_sector(&a, r / tau.sqrt()).unwrap();
                if !sqrt_form.empty {
                    sqrt_dev = sqrt_dev
                        .max((left.hi - sqrt_form.hi).abs())
                        .max((left.lo - sqrt_form.lo).abs());
                }
            }
        }
    }
    assert!(
        linear_dev <= 1e-5,
        "psi_r(tau A) must equal psi_(r/tau)(A); worst deviation {linear_dev:.2e}"
    );
    // The square-root variant is refuted by the same data.
    assert!(sqrt_dev > 1e-3);
    println!(
        "criterion 5: PASS — scaling identity holds in the r/tau form (worst {linear_dev:.2e}); \
         the r/sqrt(tau) variant is refuted (deviations up to {sqrt_dev:.2e})"
    );
}

#[test]
fn criterion_6_reduction_chain() {
    let mut rng = rng(0xacc6);
    let opts = CheckOptions {
        grid_points: 80,
        omega_max: 1e3,
        ..CheckOptions::default()
    };

    // dw-phase at r = 0 vs small phase, dw-gain at theta = 0 vs small gain.
    let zero = |_: f64| 0.0;
    for k in 0..20 {
        let gp = 0.5 + 2.0 * rng.random::<f64>();
        let p = if k % 2 == 0 {
            random_lag_network(&mut rng, 2, gp)
        } else {
            let raw = random_stable(&mut rng, 3, 2, false);
            let s = (0.4 + 1.2 * rng.random::<f64>()) / hinf_norm(&raw).max(1e-9);
            raw.scaled(s)
        };
        let gc = 0.3 + 0.8 * rng.random::<f64>();
        let c = random_lag_network(&mut rng, 2, gc);
        let dw = dw_phase_stability_check(&p, &c, Some(&zero), &opts).unwrap();
        let sp = small_phase_check(&p, &c, &opts).unwrap();
        assert_eq!(
            dw.verdict, sp.verdict,
            "dw-phase(r=0) diverged from small-phase on pair {k}"
        );
        let dg = dw_gain_stability_check(&p, &c, Some(&zero), &opts).unwrap();
        let sg = small_gain_check(&p, &c, &opts).unwrap();
        assert_eq!(
            dg.verdict, sg.verdict,
            "dw-gain(theta=0) diverged from small-gain on pair {k}"
        );
    }

    // Frequency-wise fan/vase with the cut-off reduction spec vs the cut-off
    // checker, on the benchmark example (both cut-offs) and random systems.
    let reduction_matches = |p: &StateSpace, c: &StateSpace, omega_c: f64, opts: &CheckOptions| {
        let poles = imaginary_axis_poles(p, opts.tol);
        let contour =
            build_indented_contour(&poles, 1e-3, opts.grid_points, opts.omega_min, opts.omega_max)
                .unwrap();
        let sweep = frequency_sweep(p, &contour).unwrap();
        let inf = sample_at_infinity(p);
        let spec = FanVaseSpec::cutoff_reduction(&sweep, Some(&inf), omega_c).unwrap();
        let fw = frequencywise_mixed_check(p, c, &spec, opts).unwrap();
        let mc = mixed_cutoff_check(p, c, omega_c, opts).unwrap();
        (fw.verdict, mc.verdict)
    };

    let plant = example1_plant();
    let controller = example1_controller();
    let default_opts = CheckOptions::default();
    for omega_c in [3.0, 4.0] {
        let (fw, mc) = reduction_matches(&plant, &controller, omega_c, &default_opts);
        assert_eq!(fw, mc, "reduction diverged on the benchmark at cutoff {omega_c}");
    }
    for k in 0..10 {
        let gp = 2.0 + 4.0 * rng.random::<f64>();
        let p = random_lag_network(&mut rng, 2, gp);
        let gc = 0.2 + 0.3 * rng.random::<f64>();
        let c = if k % 2 == 0 {
            random_lag_network(&mut rng, 2, gc)
        } else {
            random_stable(&mut rng, 2, 2, false)
        };
        let (fw, mc) = reduction_matches(&p, &c, 1.0, &opts);
        assert_eq!(fw, mc, "reduction diverged on random pair {k}");
    }
    println!("criterion 6: PASS — reduction chain verdicts identical on all pairs");
}

// ---------------------------------------------------------------------------
// Criterion 7: LMI certificate vs grid verification
// ---------------------------------------------------------------------------

/// Grid-side margin of the combined phase/gain property: canonical phase
/// containment in `[alpha, beta]` on `[0, omega_c]`, gain below `gamma`
/// beyond (positive margin means the property holds).
fn grid_margin(
    sys: &StateSpace,
    omega_c: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    points: usize,
    omega_max: f64,
) -> f64 {
    let contour =
        build_indented_contour(&PoleSet::empty(), 1e-3, points, 0.0, omega_max).unwrap();
    let sweep = frequency_sweep(sys, &contour).unwrap();
    let mut margin = f64::INFINITY;
    for sample in &sweep {
        if sample.omega <= omega_c {
            match &sample.phases_canonical {
                Some(ph) => {
                    margin = margin.min(ph.lo - alpha).min(beta - ph.hi);
                }
                None if sample.is_zero() => {}
                None => return f64::NEG_INFINITY,
            }
        }
        if sample.omega >= omega_c {
            margin = margin.min(gamma - sample.sigma_max());
        }
    }
    let inf = sample_at_infinity(sys);
    margin.min(gamma - inf.sigma_max())
}

/// Smallest gamma the certificate accepts, by bisection.
fn certificate_gamma_flip(sys: &StateSpace, omega_c: f64, alpha: f64, beta: f64, hint: f64) -> f64 {
    let certifies = |gamma: f64| {
        matches!(
            bounded_sectored_check(sys, omega_c, alpha, beta, gamma),
            Ok(BoundedSectoredOutcome::Certified(_))
        )
    };
    let mut hi = hint.max(1e-6);
    let mut grow = 0;
    while !certifies(hi) && grow < 60 {
        hi *= 2.0;
        grow += 1;
    }
    assert!(grow < 60, "no certifiable gamma found");
    let mut lo = hi / 2f64.powi(grow.max(1));
    for _ in 0..45 {
        let mid = 0.5 * (lo + hi);
        if certifies(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_7_certificate_matches_grid() {
    let mut rng = rng(0xacc7);
    let mut checked = 0usize;
    let mut attempts = 0usize;
    while checked < 20 && attempts < 200 {
        attempts += 1;
        let nx = 2 + (rng.random::<u32>() % 3) as usize;
        let sys = random_stable(&mut rng, nx, 2, true);
        if sys.controllability_rank(1e-8) < nx || sys.observability_rank(1e-8) < nx {
            continue;
        }
        let omega_c = 0.5 + 2.0 * rng.random::<f64>();
        // Build the phase envelope on [0, omega_c] to place the corridor.
        let contour = build_indented_contour(&PoleSet::empty(), 1e-3, 120, 0.0, 1e3).unwrap();
        let sweep = frequency_sweep(&sys, &contour).unwrap();
        let mut lo_env = f64::INFINITY;
        let mut hi_env = f64::NEG_INFINITY;
        let mut gain_env = 0.0f64;
        let mut sectorial = true;
        for s in &sweep {
            if s.omega <= omega_c {
                match &s.phases_canonical {
                    Some(ph) => {
                        lo_env = lo_env.min(ph.lo);
                        hi_env = hi_env.max(ph.hi);
                    }
                    None => sectorial = false,
                }
            }
            if s.omega >= omega_c {
                gain_env = gain_env.max(s.sigma_max());
            }
        }
        gain_env = gain_env.max(sample_at_infinity(&sys).sigma_max());
        let slack_phase = 0.15 * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let slack_gain = 0.15 * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let (alpha, beta) = if sectorial && hi_env - lo_env < 2.5 {
            let mut a = lo_env - slack_phase;
            let mut b = hi_env + slack_phase;
            if b - a > std::f64::consts::PI {
                let mid = 0.5 * (a + b);
                a = mid - 0.5 * std::f64::consts::PI;
                b = mid + 0.5 * std::f64::consts::PI;
            }
            if b - a <= 0.01 {
                continue;
            }
            (a, b)
        } else {
            // Responses that leave the sectorial class in the band cannot be
            // certified with any corridor; both routes must agree on failure.
            (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)
        };
        let gamma = gain_env * (1.0 + slack_gain);
        if gamma <= 0.0 {
            continue;
        }
        let margin = grid_margin(&sys, omega_c, alpha, beta, gamma, 240, 1e4);
        if margin.abs() < 1e-4 {
            continue; // boundary zone excluded by the criterion
        }
        let outcome = bounded_sectored_check(&sys, omega_c, alpha, beta, gamma).unwrap();
        match (&outcome, margin > 0.0) {
            (BoundedSectoredOutcome::Certified(_), true)
            | (BoundedSectoredOutcome::NotCertified, false) => {}
            (BoundedSectoredOutcome::Unknown(_), _) => continue,
            (got, expected) => panic!(
                "certificate/grid disagreement: grid margin {margin:.3e} (pass={expected}) \
                 but LMI said {got:?}"
            ),
        }
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} usable random systems");

    // Limiting cases against the Hamiltonian bisection oracle (gain side).
    let mut limit_worst: f64 = 0.0;
    for k in 0..5 {
        let mut r2 = rng.clone();
        r2.set_stream(k);
        let gain = 0.5 + 1.5 * rng.random::<f64>();
        let sys = random_lag_network(&mut r2, 2, gain);
        // Tiny cut-off: the gain block covers essentially every frequency,
        // so the flip point is the H-infinity norm.
        let hinf = hinf_norm(&sys);
        let flip = certificate_gamma_flip(&sys, 1e-6, -1.5, 1.5, hinf);
        limit_worst = limit_worst.max((flip - hinf).abs() / (1.0 + hinf));
        assert!(
            (flip - hinf).abs() <= 1e-4 * (1.0 + hinf),
            "omega_c=1e-6: flip {flip} vs hinf {hinf}"
        );
        // Huge cut-off: the gain block only sees the far tail.
        let tail_ref = {
            let contour =
                build_indented_contour(&PoleSet::empty(), 1e-3, 200, 1e6, 1e10).unwrap();
            let sweep = frequency_sweep(&sys, &contour).unwrap();
            sweep
                .iter()
                .map(|s| s.sigma_max())
                .fold(sample_at_infinity(&sys).sigma_max(), f64::max)
        };
        let flip_hi = certificate_gamma_flip(&sys, 1e6, -2.0, 0.5, tail_ref.max(1e-9));
        limit_worst = limit_worst.max((flip_hi - tail_ref).abs() / (1.0 + tail_ref));
        assert!(
            (flip_hi - tail_ref).abs() <= 1e-4 * (1.0 + tail_ref),
            "omega_c=1e6: flip {flip_hi} vs tail sup {tail_ref}"
        );
    }
    println!(
        "criterion 7: PASS — {checked} random systems agree with the grid in both directions; \
         limiting cut-offs match the bisection oracle (worst rel dev {limit_worst:.2e})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: randomized matrix lemmas
// ---------------------------------------------------------------------------

fn loop_det(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    (ComplexMatrix::identity(n, n) + a * b).lu().determinant().norm()
}

/// Rotates a random accretive matrix so its sector midpoint hits `center`,
/// scaled to spectral norm `norm`.
fn accretive_rotated(
    rng: &mut rand_chacha::ChaCha8Rng,
    n: usize,
    center: f64,
    norm: f64,
) -> ComplexMatrix {
    let raw = random_accretive(rng, n);
    let tol = default_sector_tol(&raw);
    let sector = matrix_phases(&raw, tol).unwrap();
    let spin = Complex64::from_polar(1.0, center - sector.center);
    let scale = norm / spectral_norm(&raw);
    raw.map(|z| z * spin * scale)
}

#[test]
fn criterion_8_matrix_lemma_randomized() {
    let pi = std::f64::consts::PI;
    let mut rng = rng(0xacc8);
    let mut min_det = f64::INFINITY;

    // Vase-hypothesis pairs (9000): A qualifies through the gain or the
    // phase branch; B sits in the complementary fan with margin.
    let mut done = 0usize;
    while done < 9000 {
        let through_gain = done % 2 == 0;
        let (a, alpha, beta, gamma) = if through_gain {
            let a = random_complex_matrix(&mut rng, 3);
            let gamma = spectral_norm(&a) * (1.0 + rng.random::<f64>());
            // Any corridor works: the gain branch carries membership.
            (a, -0.4, 0.4, gamma)
        } else {
            let a = random_sectorial(&mut rng, 3);
            let tol = default_sector_tol(&a);
            let sector = matrix_phases(&a, tol).unwrap();
            let slack: f64 = 0.05 + 0.2 * rng.random::<f64>();
            let alpha = sector.lo - slack;
            let beta = sector.hi + slack;
            if beta - alpha > pi || beta.abs() >= pi || alpha.abs() >= pi {
                continue;
            }
            // A tiny gamma keeps the gain branch inert.
            (a, alpha, beta, 1e-3)
        };
        // Complementary fan: center of the admissible phase interval, gain
        // strictly below 1/gamma.
        let lo_b = -pi - alpha;
        let hi_b = pi - beta;
        let b_norm = 0.8 / gamma * rng.random::<f64>().max(0.1);
        let b = accretive_rotated(&mut rng, 3, 0.5 * (lo_b + hi_b), b_norm);
        let tol_b = default_sector_tol(&b);
        let sector_b = matrix_phases(&b, tol_b).unwrap();
        if sector_b.lo <= lo_b || sector_b.hi >= hi_b {
            continue;
        }
        let holds = vase_invertibility(&a, &b, alpha, beta, gamma).unwrap();
        assert!(holds, "constructed pair must satisfy the vase hypothesis");
        let det = loop_det(&a, &b);
        min_det = min_det.min(det);
        assert!(det > 1e-12, "vase pair produced near-singular I+AB: {det:.3e}");
        done += 1;
    }

    // Constrained-phase pairs (1000): A with a feasible gain floor r, B
    // centered against the constrained sector with the gain condition.
    let mut done_dw = 0usize;
    while done_dw < 1000 {
        let a = random_complex_matrix(&mut rng, 3).map(|z| z * 3.0);
        let sigma = spectral_norm(&a);
        let r = sigma * (0.3 + 0.8 * rng.random::<f64>());
        let sector = match constrained_phase_sector(&a, r) {
            Ok(s) if !s.empty => s,
            Ok(_) => {
                // Empty constrained range: any sectorial B with
                // sigma_max(B) r < 1 qualifies.
                let b = accretive_rotated(&mut rng, 3, 0.0, 0.9 / r);
                let holds = dw_matrix_invertibility(&a, &b, r).unwrap();
                assert!(holds);
                let det = loop_det(&a, &b);
                min_det = min_det.min(det);
                assert!(det > 1e-12);
                done_dw += 1;
                continue;
            }
            Err(_) => continue,
        };
        let spread = sector.hi - sector.lo;
        if spread > pi - 0.2 {
            continue;
        }
        let b_norm = (0.9 / r).min(1.0) * (0.2 + 0.8 * rng.random::<f64>());
        let b = accretive_rotated(&mut rng, 3, -0.5 * (sector.hi + sector.lo), b_norm);
        let tol_b = default_sector_tol(&b);
        let sector_b = matrix_phases(&b, tol_b).unwrap();
        if sector.hi + sector_b.hi >= pi - 0.05 || sector.lo + sector_b.lo <= -pi + 0.05 {
            continue;
        }
        let holds = dw_matrix_invertibility(&a, &b, r).unwrap();
        if !holds {
            continue;
        }
        let det = loop_det(&a, &b);
        min_det = min_det.min(det);
        assert!(det > 1e-12, "constrained-phase pair near-singular: {det:.3e}");
        done_dw += 1;
    }
    println!(
        "criterion 8: PASS — 10000 hypothesis-satisfying pairs, min |det(I+AB)| = {min_det:.3e}"
    );
}

#[test]
fn criterion_9_robust_stabilization_samples() {
    let mut rng = rng(0xacc9);
    let k = DMatrix::identity(3, 3);
    let (delta, eta, gamma) = (0.5, 2.0, 1.0);
    // Sampled accretivity margins stay above 0.8, so any cut-off below
    // 0.8/(gamma sigma_max(K)) is admissible.
    let omega_c = 0.5;
    let res = robust_stabilization_epsilon(&k, delta, eta, gamma, omega_c).unwrap();
    let eps = 0.9 * res.eps_bound;
    let controller = StateSpace::static_gain(k.clone() * eps).unwrap();

    let mut trials = 0usize;
    while trials < 200 {
        // A = S0 + X with S0 symmetric (eigenvalues in [0.8, 1.6]) and a
        // small perturbation: sigma_min >= 0.6 >= delta, sigma_max <= 1.8
        // <= eta, Hermitian part >= 0.6 I (accretive with margin).
        let q = random_matrix(&mut rng, 3, 3).qr().q();
        let eigs = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(3, |_, _| {
            0.8 + 0.8 * rng.random::<f64>()
        }));
        let s0 = &q * eigs * q.transpose();
        let x_raw = random_matrix(&mut rng, 3, 3);
        let x = x_raw.clone() * (0.2 / x_raw.norm());
        let a = &s0 + &x;
        let sv = a.clone().svd(false, false).singular_values;
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().copied().fold(0.0f64, f64::max);
        if smin < delta || smax > eta {
            continue;
        }

        // P: random stable transfer matrix with ||P||_inf <= gamma.
        let p_raw = random_stable(&mut rng, 3, 3, false);
        let p_scaled = p_raw.scaled(gamma * (0.2 + 0.75 * rng.random::<f64>()) / hinf_norm(&p_raw));

        // M = A/s + P.
        let integrator_bank = StateSpace::new(
            DMatrix::zeros(3, 3),
            DMatrix::identity(3, 3),
            a.clone(),
            DMatrix::zeros(3, 3),
        )
        .unwrap();
        let m = integrator_bank.parallel(&p_scaled).unwrap();
        let g4 = gang_of_four(&m, &controller).unwrap();
        assert!(
            is_hurwitz(&g4, 1e-9),
            "trial {trials}: closed loop not Hurwitz with eps = {eps}"
        );
        trials += 1;
    }
    println!(
        "criterion 9: PASS — 200/200 sampled loops Hurwitz with eps = 0.9/c = {eps:.4} \
         (c = {:.3})",
        res.c
    );
}

// ---------------------------------------------------------------------------
// Supplementary: spec-level invariants that complement the criteria
// ---------------------------------------------------------------------------

#[test]
fn shell_oracle_convexity_projection() {
    // Midpoints of projected shell points stay inside the convex hull of the
    // cloud (sampled convexity of the gain-constrained range).
    let a = fig5_matrix();
    let points = shell_sample_oracle(&a, 4000, 0xc0_7e);
    let level = 36.0; // r = 6
    let slice: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.h2 >= level)
        .map(|p| (p.re, p.im))
        .collect();
    assert!(slice.len() > 100);
    let hull = convex_hull(&slice);
    for i in (0..slice.len()).step_by(7) {
        for j in (i + 1..slice.len()).step_by(11) {
            let mid = (
                0.5 * (slice[i].0 + slice[j].0),
                0.5 * (slice[i].1 + slice[j].1),
            );
            assert!(
                hull_distance(&hull, mid) <= 1e-6,
                "midpoint escapes the hull by {}",
                hull_distance(&hull, mid)
            );
        }
    }
}

fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Distance from a point to a convex polygon (0 inside).
fn hull_distance(hull: &[(f64, f64)], p: (f64, f64)) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let mut max_out = 0.0f64;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let nx = -(b.1 - a.1);
        let ny = b.0 - a.0;
        let len = (nx * nx + ny * ny).sqrt().max(1e-300);
        // Outward side: hull is counter-clockwise, normals point inward with
        // this orientation; positive distance along -n means outside.
        let d = ((p.0 - a.0) * nx + (p.1 - a.1) * ny) / len;
        max_out = max_out.max(-d);
    }
    max_out
}

#[test]
fn matrix_lemma_boundary_strictness() {
    // Shrinking any condition's slack to zero flips the certificate on
    // scalar examples.
    let pi = std::f64::consts::PI;
    let unit = ComplexMatrix::identity(1, 1);
    // Gain boundary.
    let b = unit.map(|z| z * 0.999_999);
    assert!(phasegain::stability::vase_necessity_certificate(&b, -pi / 2.0, pi / 2.0, 1.0).unwrap());
    let b = unit.clone();
    assert!(!phasegain::stability::vase_necessity_certificate(&b, -pi / 2.0, pi / 2.0, 1.0).unwrap());
    // Phase boundary (gamma = 0.5 keeps the fan's gain bound at 2 so only
    // the phase condition is in play).
    let b = unit.map(|z| z * Complex64::from_polar(1.0, pi / 2.0 - 1e-6));
    assert!(
        phasegain::stability::vase_necessity_certificate(&b, -pi / 2.0, pi / 2.0, 0.5).unwrap()
    );
    let b = unit.map(|z| z * Complex64::from_polar(1.0, pi / 2.0));
    assert!(
        !phasegain::stability::vase_necessity_certificate(&b, -pi / 2.0, pi / 2.0, 0.5).unwrap()
    );
}

#[test]
fn fan_and_vase_region_examples() {
    let polar = |r: f64, th: f64| ComplexMatrix::from_element(1, 1, Complex64::from_polar(r, th));
    let (ok, _) = in_fan(
        &polar(0.5, std::f64::consts::FRAC_PI_6),
        &RegionSpec::strict(Some((0.0, std::f64::consts::FRAC_PI_4)), Some(1.0)),
        1e-9,
    );
    assert!(ok);
    let (ok, _) = in_vase(
        &polar(10.0, 0.1),
        &RegionSpec::closed(Some((-0.2, 0.2)), Some(1.0)),
        1e-9,
    );
    assert!(ok);
    let tol = 1e-9;
    let diag = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
    ]));
    let class = classify_sectoriality(&diag, tol).unwrap();
    assert_eq!(class.tag, SectorialTag::SemiSectorial);
}
