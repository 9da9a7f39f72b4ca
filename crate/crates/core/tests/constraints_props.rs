use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use ptycho_core::constraints::*;
use ptycho_core::field::{twin, ComplexField};
use ptycho_core::rng::{aux_rng, phase_from_unit, random_phase_mask, MaskSpec};
use ptycho_core::{Rect, Shift};

/// Width of the shortest arc containing all angles: `2π` minus the largest
/// gap between circularly sorted angles.
fn sorted_gap_width(angles: &[f64]) -> f64 {
    let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(2.0 * PI)).collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut gap = a[0] + 2.0 * PI - a[a.len() - 1];
    for w in a.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    2.0 * PI - gap
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn minimal_arc_matches_sorted_gaps(angles in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
        let (w, mid) = minimal_arc(&angles).unwrap();
        prop_assert!((w - sorted_gap_width(&angles)).abs() < 1e-9);
        // every angle lies within w/2 of the midpoint
        for a in &angles {
            prop_assert!(wrap(a - mid).abs() <= w / 2.0 + 1e-9);
        }
    }

    #[test]
    fn wrap_lands_in_half_open_interval(x in -100.0f64..100.0) {
        let y = wrap(x);
        prop_assert!(y > -PI && y <= PI);
        prop_assert!(((x - y) / (2.0 * PI)).fract().abs() < 1e-9 || ((x - y) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
    }

    #[test]
    fn narrow_ratio_passes(seed in any::<u64>(), delta in 0.01f64..0.49, spread in 0.0f64..1.0, rot in -3.0f64..3.0) {
        let mu = random_phase_mask(&MaskSpec::unimodular(6, 1.0, seed)).unwrap();
        let mut rng = aux_rng(seed, 1);
        // ratio phases inside an arc of width 2δπ·spread centred at rot
        let nu = mu.map(|z| z * Complex64::from_polar(1.0, rot + (rng.gen::<f64>() - 0.5) * 2.0 * delta * PI * spread));
        let rep = check_mpc(&nu, &mu, MpcParams::new(delta, 1.0).unwrap()).unwrap();
        prop_assert!(rep.pass);
        prop_assert!(rep.arc_width <= rep.allowed_width + 1e-12);
    }

    #[test]
    fn twin_ratio_is_wide(seed in any::<u64>()) {
        let mu = random_phase_mask(&MaskSpec::unimodular(16, 1.0, seed)).unwrap();
        let nu = twin(&mu).unwrap();
        let rep = check_mpc(&nu, &mu, MpcParams::new(0.4, 1.0).unwrap()).unwrap();
        prop_assert!(!rep.pass);
    }
}

#[test]
fn flat_probability_matches_monte_carlo() {
    // |θ1 - θ2| for two independent phases is triangular; the flattest
    // window of width 4δπ sits at the peak.
    for (gamma, delta) in [(1.0, 0.2), (0.5, 0.1), (0.8, 0.4)] {
        let mut rng = aux_rng(77, 0);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| {
                let u = phase_from_unit(rng.gen(), gamma);
                let v = phase_from_unit(rng.gen(), gamma);
                (u - v).abs() <= 2.0 * delta * PI
            })
            .count();
        let empirical = hits as f64 / trials as f64;
        let exact = flat_probability(gamma, delta);
        assert!((empirical - exact).abs() < 0.005, "γ={gamma} δ={delta}: {empirical} vs {exact}");
    }
}

#[test]
fn mpc_parameter_range() {
    assert!(MpcParams::new(0.5, 1.0).is_err());
    assert!(MpcParams::new(0.3, 0.3).is_err());
    assert!(MpcParams::new(0.0, 0.3).is_ok());
    assert!(MpcParams::new(0.1, 1.5).is_err());
}

#[test]
fn sign_tests_follow_rotation() {
    let mu = random_phase_mask(&MaskSpec::unimodular(5, 1.0, 3)).unwrap();
    let nu = mu.map(|z| z * Complex64::from_polar(1.0, 2.5));
    let rep = check_mpc(&nu, &mu, MpcParams::new(0.1, 1.0).unwrap()).unwrap();
    assert!(rep.pass);
    assert!(!rep.sign_test);
    assert!(rep.rotated_sign_test);
}

#[test]
fn zero_mask_pixel_is_an_error() {
    let mut mu = random_phase_mask(&MaskSpec::unimodular(4, 1.0, 3)).unwrap();
    mu.data_mut()[[1, 2]] = Complex64::new(0.0, 0.0);
    assert!(check_mpc(&mu.clone(), &mu, MpcParams::new(0.1, 1.0).unwrap()).is_err());
}

fn patch(m: usize, rect: Rect) -> ComplexField {
    ComplexField::from_fn(m, m, |i, j| {
        if rect.contains([i as i64, j as i64]) {
            Complex64::new(1.0 + i as f64, j as f64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[test]
fn tight_hull_admits_only_zero_shift() {
    let m = 6;
    let full = Rect { start: [0, 0], extent: [m, m] };
    let g0 = patch(m, full);
    let rep = check_osc(&g0, &OscParams { t0: vec![Shift::ZERO], fbox: full }).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.candidates, vec![Shift::ZERO]);
}

#[test]
fn loose_box_lists_translations() {
    let m = 8;
    let fbox = Rect { start: [4, 0], extent: [4, 8] };
    let g0 = patch(m, Rect { start: [0, 0], extent: [4, 8] });
    let rep = check_osc(&g0, &OscParams::row_shifts(4, fbox)).unwrap();
    assert!(rep.pass, "{rep:?}");
    let rep = check_osc(&g0, &OscParams::row_shifts(3, fbox)).unwrap();
    assert_eq!(rep.offender, Some(Shift::new(4, 0)));
}

#[test]
fn empty_support_makes_every_shift_a_candidate() {
    let m = 4;
    let fbox = Rect { start: [1, 1], extent: [2, 2] };
    let rep = check_osc(&ComplexField::zeros(m, m), &OscParams { t0: vec![Shift::ZERO], fbox }).unwrap();
    assert!(rep.support_empty);
    assert_eq!(rep.candidates.len(), 9);
    assert!(!rep.pass);
}
