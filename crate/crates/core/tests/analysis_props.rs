use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use ptycho_core::ambiguity::{apply_affine_phase, apply_scaling, AmbiguityParams, apply_params, SolutionPair};
use ptycho_core::analysis::*;
use ptycho_core::constraints::wrap;
use ptycho_core::field::ComplexField;
use ptycho_core::rng::{aux_rng, random_object, random_phase_mask, MaskSpec};
use ptycho_core::scheme::{certify_mixing, MixingOptions, ScanScheme};
use ptycho_core::{GridSpec, Point};

fn mask(m: usize, seed: u64) -> ComplexField {
    random_phase_mask(&MaskSpec::unimodular(m, 1.0, seed)).unwrap()
}

fn perturbed() -> ScanScheme {
    ScanScheme::perturbed_raster(GridSpec::torus(16, 8).unwrap(), 4, vec![0, 1, 1, 0], vec![0, 1, 0, -1]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_affine_input_is_recovered(w0 in -3.0f64..3.0, w1 in -3.0f64..3.0, c in -3.0f64..3.0) {
        let s = perturbed();
        let theta: Vec<f64> = s.shifts().iter().map(|t| wrap(c + w0 * t.0[0] as f64 + w1 * t.0[1] as f64)).collect();
        let fit = affine_fit(&theta, &s).unwrap();
        prop_assert!(fit.residual < 1e-10);
        prop_assert!(wrap(fit.r[0] - w0).abs() < 1e-9 && wrap(fit.r[1] - w1).abs() < 1e-9, "{:?}", fit);
        prop_assert!(wrap(fit.theta0 - c).abs() < 1e-9);
        prop_assert!(fit.undetermined.is_none());
    }

    #[test]
    fn residual_invariant_under_global_shift(seed in any::<u64>(), c in -3.0f64..3.0) {
        let s = perturbed();
        let mut rng = aux_rng(seed, 0);
        let theta: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-PI..PI)).collect();
        let moved: Vec<f64> = theta.iter().map(|t| t + c).collect();
        let (a, b) = (affine_fit(&theta, &s).unwrap(), affine_fit(&moved, &s).unwrap());
        prop_assert!((a.residual - b.residual).abs() < 1e-9);
        // random phases are not affine
        prop_assert!(a.residual > 1e-3);
    }

    #[test]
    fn drift_reproduces_differences(seed in any::<u64>()) {
        let s = perturbed();
        let mut rng = aux_rng(seed, 1);
        let theta: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-PI..PI)).collect();
        let d = phase_drift(&theta, &s).unwrap();
        prop_assert!(!d.is_empty());
        for x in d {
            prop_assert!((x.drift - wrap(theta[x.i] - theta[x.j])).abs() < 1e-12);
        }
    }

    #[test]
    fn log_ratio_closed_form(seed in any::<u64>(), b in -3.0f64..3.0, w0 in -0.5f64..0.5, w1 in -0.5f64..0.5) {
        let f = random_object(8, seed);
        let g = ComplexField::from_fn(8, 8, |i, j| f.data()[[i, j]] * Complex64::from_polar(1.0, b + w0 * i as f64 + w1 * j as f64));
        let h = log_ratio(&g, &f, ZERO_REL_THRESHOLD).unwrap();
        for ((i, j), z) in h.values.indexed_iter() {
            prop_assert!(z.re.abs() < 1e-12);
            prop_assert!(wrap(z.im - (b + w0 * i as f64 + w1 * j as f64)).abs() < 1e-12);
        }
        let fit = fit_log_ratio_phase(&h).unwrap();
        prop_assert!((fit.r[0] - w0).abs() < 1e-9 && (fit.r[1] - w1).abs() < 1e-9);
        prop_assert!(wrap(fit.theta0 - b).abs() < 1e-9);
    }

    #[test]
    fn scaling_and_affine_align(seed in any::<u64>(), c in 0.2f64..5.0, j0 in -7i64..8, j1 in -7i64..8, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = perturbed();
        let (f, mu) = (random_object(16, seed), mask(8, seed));
        let w = [2.0 * PI * j0 as f64 / 16.0, 2.0 * PI * j1 as f64 / 16.0];
        let p = apply_params(&f, &mu, &AmbiguityParams { c, a, b, w, theta: vec![] }).unwrap();
        prop_assert!(aligned_error(&p, &f, &mu, &s).unwrap() < 1e-8);
        let bp = block_phases(&p, &f, &mu, &s).unwrap();
        prop_assert!(bp.residuals.iter().all(|&r| r < 1e-10));
        for (t, th) in s.shifts().iter().zip(&bp.theta) {
            prop_assert!(wrap(th - (w[0] * t.0[0] as f64 + w[1] * t.0[1] as f64 + b - a)).abs() < 1e-8);
        }
    }
}

#[test]
fn global_phase_block_phases() {
    let s = perturbed();
    let (f, mu) = (random_object(16, 2), mask(8, 2));
    let p = SolutionPair { object: f.map(|z| z * Complex64::from_polar(1.0, PI / 4.0)), mask: mu.clone() };
    let bp = block_phases(&p, &f, &mu, &s).unwrap();
    assert!(bp.theta.iter().all(|t| (t - PI / 4.0).abs() < 1e-12));
    assert!(bp.residuals.iter().all(|&r| r < 1e-12));
}

#[test]
fn constant_profile_has_zero_slope() {
    let s = perturbed();
    let p = block_phase_profile(&vec![-2.0; s.len()], &s).unwrap();
    assert_eq!(p.r, [0.0, 0.0]);
    assert!((p.h0 + 2.0).abs() < 1e-12);
}

#[test]
fn pixel_and_block_fits_agree_on_certified_scheme() {
    let d = vec![0, 1, 1, 0, 0, 0, 0, 0];
    let s = ScanScheme::perturbed_raster(GridSpec::torus(32, 9).unwrap(), 4, d.clone(), d).unwrap();
    let cert = certify_mixing(&s, &MixingOptions::default()).unwrap();
    let cert = cert.certificate().expect("certified");
    let (f, mu) = (random_object(32, 8), mask(9, 8));
    let w = [2.0 * PI * 3.0 / 32.0, -2.0 * PI * 5.0 / 32.0];
    let p = apply_affine_phase(&f, &mu, 0.2, 1.3, w);
    let bp = block_phases(&p, &f, &mu, &s).unwrap();
    let block = affine_fit(&bp.theta, &s).unwrap();
    let pixel = fit_log_ratio_phase(&log_ratio(&p.object, &f, ZERO_REL_THRESHOLD).unwrap()).unwrap();
    assert!(wrap(block.r[0] - pixel.r[0]).abs() < 1e-6 && wrap(block.r[1] - pixel.r[1]).abs() < 1e-6);
    assert!(certificate_slope_gap(cert, &bp.theta, block.r) < 1e-6);
}

#[test]
fn collinear_shifts_flag_a_direction() {
    let g = GridSpec::torus(16, 8).unwrap();
    let shifts = (0..4).map(|k| ptycho_core::Shift::new(2 * k, 0)).collect();
    let s = ScanScheme::new(g, shifts).unwrap();
    let theta: Vec<f64> = (0..4).map(|k| 0.3 * (2 * k) as f64).collect();
    let fit = affine_fit(&theta, &s).unwrap();
    assert!((fit.r[0] - 0.3).abs() < 1e-10);
    let u = fit.undetermined.expect("flagged");
    assert!(u[0].abs() < 1e-12 && (u[1].abs() - 1.0).abs() < 1e-12);
}

#[test]
fn length_mismatch_is_an_error() {
    let s = perturbed();
    assert!(affine_fit(&[0.0; 3], &s).is_err());
    assert!(phase_drift(&[0.0; 3], &s).is_err());
    let pts: Vec<Point> = vec![[0, 0]];
    assert!(fit_affine_phase(&pts, &[]).is_err());
}

#[test]
fn scaled_pair_aligns() {
    let s = perturbed();
    let (f, mu) = (random_object(16, 3), mask(8, 3));
    let p = apply_scaling(&f, &mu, 3.5).unwrap();
    let al = align(&p, &f, &mu).unwrap();
    assert!((al.c - 3.5).abs() < 1e-12);
    assert!(aligned_error(&p, &f, &mu, &s).unwrap() < 1e-12);
}
