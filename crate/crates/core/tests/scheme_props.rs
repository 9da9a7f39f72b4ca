use proptest::prelude::*;

use ptycho_core::grid::block_of;
use ptycho_core::scheme::*;
use ptycho_core::{Boundary, GridSpec, PixelSet, Point, Shift};

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Index of the lattice spanned by integer vectors: gcd of all 2x2 minors.
fn minor_gcd(v: &[Point]) -> i64 {
    let mut g = 0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            g = gcd(g, v[i][0] * v[j][1] - v[i][1] * v[j][0]);
        }
    }
    g
}

fn small_scheme(n: usize, m: usize, raw: &[(i64, i64)]) -> ScanScheme {
    let grid = GridSpec::torus(n, m).unwrap();
    let mut shifts = vec![Shift::ZERO];
    for &(a, b) in raw {
        let t = Shift::new(a.rem_euclid(n as i64), b.rem_euclid(n as i64));
        if !shifts.contains(&t) {
            shifts.push(t);
        }
    }
    ScanScheme::new(grid, shifts).unwrap()
}

/// Brute-force coverage of one path family: `x ∈ D` iff some shift `t`
/// puts `y = x - t + t0` in the base block together with `y + a` and every
/// anchor translate `y + v`.
fn brute_coverage(scheme: &ScanScheme, tr: Triplet, p1: i64, p2: i64, a: Point) -> Vec<Point> {
    let g = scheme.grid();
    let (n, m) = (g.n as i64, g.m as i64);
    let (s1, s2) = tr.differences(scheme).unwrap();
    let t0 = scheme.shifts()[tr.l0].0;
    let inb = |y: Point| (0..2).all(|k| (y[k] - t0[k]).rem_euclid(n) < m);
    let families: Vec<Vec<Point>> = enumerate_paths(p1, p2)
        .unwrap()
        .iter()
        .map(|p| p.anchor_vectors(s1, s2))
        .collect();
    let mut out = Vec::new();
    for x0 in 0..n {
        for x1 in 0..n {
            let hit = scheme.shifts().iter().any(|t| {
                let y = [x0 - t.0[0] + t0[0], x1 - t.0[1] + t0[1]];
                inb(y) && inb([y[0] + a[0], y[1] + a[1]]) && families.iter().any(|f| f.iter().all(|v| inb([y[0] + v[0], y[1] + v[1]])))
            });
            if hit {
                out.push([x0, x1]);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hnf_index_is_minor_gcd(v in proptest::collection::vec((-20i64..20, -20i64..20), 1..6)) {
        let v: Vec<Point> = v.into_iter().map(|(a, b)| [a, b]).collect();
        let h = hermite_normal_form(&v).unwrap();
        let g = minor_gcd(&v);
        match h.index() {
            Some(ix) => prop_assert_eq!(ix as i64, g),
            None => prop_assert_eq!(g, 0),
        }
        for (b, c) in h.basis.iter().zip(&h.coeffs) {
            let mut s = [0i64; 2];
            for (ci, vi) in c.iter().zip(&v) {
                s[0] += ci * vi[0];
                s[1] += ci * vi[1];
            }
            prop_assert_eq!(s, *b);
        }
    }

    #[test]
    fn path_count_is_binomial(p1 in -5i64..6, p2 in -5i64..6) {
        prop_assume!(p1 != 0 || p2 != 0);
        let paths = enumerate_paths(p1, p2).unwrap();
        let (a, b) = (p1.unsigned_abs(), p2.unsigned_abs());
        let want = (1..=a).fold(1u64, |acc, i| acc * (a + b + 1 - i) / i);
        prop_assert_eq!(paths.len() as u64, want);
        for p in &paths {
            prop_assert_eq!(p.start(), [p1, -p2]);
            prop_assert_eq!(*p.vertices.last().unwrap(), [0, 0]);
            prop_assert_eq!(p.len() as u64, a + b);
            for w in p.vertices.windows(2) {
                prop_assert_eq!((w[0][0] - w[1][0]).abs() + (w[0][1] - w[1][1]).abs(), 1);
            }
        }
    }

    #[test]
    fn validity_set_matches_membership(n in 6usize..12, m in 2usize..5, s1 in (-3i64..4, -3i64..4), s2 in (-3i64..4, -3i64..4), p1 in 1i64..3, p2 in -2i64..3) {
        prop_assume!(p2 != 0);
        let grid = GridSpec::torus(n, m).unwrap();
        let base = block_of(&grid, Shift::ZERO).unwrap();
        let (s1, s2) = ([s1.0, s1.1], [s2.0, s2.1]);
        for path in enumerate_paths(p1, p2).unwrap() {
            let sigma = validity_set(&path, Shift(s1), Shift(s2), &base);
            let vs = path.anchor_vectors(s1, s2);
            for x in 0..n as i64 {
                for y in 0..n as i64 {
                    let inside = vs.iter().all(|v| {
                        let q = [(x + v[0]).rem_euclid(n as i64), (y + v[1]).rem_euclid(n as i64)];
                        q[0] < m as i64 && q[1] < m as i64
                    });
                    prop_assert_eq!(sigma.contains([x, y]), inside);
                }
            }
        }
    }

    #[test]
    fn coverage_matches_brute_force(raw in proptest::collection::vec((0i64..8, 0i64..8), 3..7), p1 in -2i64..3, p2 in -2i64..3) {
        prop_assume!(p1 != 0);
        let s = small_scheme(8, 4, &raw);
        prop_assume!(s.len() >= 3);
        let tr = Triplet::new(0, 1, 2);
        let (s1, s2) = tr.differences(&s).unwrap();
        let a = [p1 * s1[0] - p2 * s2[0], p1 * s1[1] - p2 * s2[1]];
        prop_assume!(a != [0, 0]);
        let got = coverage_region(&s, tr, p1, p2, a);
        let want = brute_coverage(&s, tr, p1, p2, a);
        match got {
            Ok(d) => {
                let d: Vec<Point> = d.iter().copied().collect();
                prop_assert_eq!(d, want);
            }
            Err(e) => prop_assert!(false, "coverage failed: {e}"),
        }
    }

    #[test]
    fn connectivity_strength_is_bottleneck(raw in proptest::collection::vec((0i64..10, 0i64..10), 1..8), keep in proptest::collection::vec(any::<bool>(), 100)) {
        let s = small_scheme(10, 4, &raw);
        let blocks = s.blocks().unwrap();
        let mut pts = Vec::new();
        for b in &blocks {
            for p in b.iter() {
                if keep[(p[0] * 10 + p[1]) as usize] {
                    pts.push(*p);
                }
            }
        }
        let support = PixelSet::from_points(*s.grid(), pts).unwrap();
        let rep = connectivity(&s, &support).unwrap();
        let q = s.len();
        let ov = |i: usize, j: usize| blocks[i].intersection(&blocks[j]).intersection(&support).len();
        for i in 0..q {
            for j in 0..q {
                if i != j {
                    prop_assert_eq!(rep.overlap(i, j), ov(i, j));
                }
            }
        }
        // largest s whose threshold graph is connected
        let connected = |th: usize| {
            let mut seen = vec![false; q];
            seen[0] = true;
            let mut stack = vec![0];
            while let Some(v) = stack.pop() {
                for u in 0..q {
                    if !seen[u] && ov(v, u) >= th {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            seen.into_iter().all(|x| x)
        };
        if q == 1 {
            prop_assert_eq!(rep.strength, None);
        } else {
            let want = (1..=16).filter(|&th| connected(th)).max().unwrap_or(0);
            prop_assert_eq!(rep.strength, Some(want));
        }
    }
}

#[test]
fn uncovered_support_is_rejected() {
    let grid = GridSpec::torus(8, 2).unwrap();
    let s = ScanScheme::new(grid, vec![Shift::ZERO]).unwrap();
    let support = PixelSet::from_points(grid, vec![[5, 5]]).unwrap();
    assert!(connectivity(&s, &support).is_err());
}

#[test]
fn raster_common_factor_index() {
    for (n, m, tau) in [(16usize, 8usize, 2usize), (32, 8, 4), (24, 8, 3)] {
        let s = ScanScheme::raster(GridSpec::torus(n, m).unwrap(), tau).unwrap();
        match certify_mixing(&s, &MixingOptions::default()).unwrap() {
            MixingOutcome::Refused(Refusal::CommonFactor { index }) => assert_eq!(index, (tau * tau) as u64),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn point_masks_exhaust_search() {
    let grid = GridSpec::torus(8, 1).unwrap();
    let s = ScanScheme::new(grid, vec![Shift::ZERO, Shift::new(1, 0), Shift::new(0, 1)]).unwrap();
    let out = certify_mixing(&s, &MixingOptions::default()).unwrap();
    assert!(matches!(out, MixingOutcome::Refused(Refusal::PBoundExhausted { .. })), "{out:?}");
}

#[test]
fn small_raster_certificate_verifies() {
    let s = ScanScheme::raster(GridSpec::torus(8, 4).unwrap(), 1).unwrap();
    let out = certify_mixing(&s, &MixingOptions::default()).unwrap();
    let cert = out.certificate().expect("certified");
    cert.verify(&s).unwrap();
    assert!(cert.entries.iter().all(|e| e.coverage_verified));
    let json = serde_json::to_string(&out).unwrap();
    let back: MixingOutcome = serde_json::from_str(&json).unwrap();
    assert_eq!(back, out);
}

#[test]
fn dirichlet_scheme_is_not_certified() {
    let s = ScanScheme::new(GridSpec::dirichlet(8, 4).unwrap(), vec![Shift::ZERO, Shift::new(1, 0)]).unwrap();
    assert!(certify_mixing(&s, &MixingOptions::default()).is_err());
}

#[test]
fn reference_fixture_margins() {
    let d = vec![0, 1, 1, 0, 0, 0, 0, 0];
    let s = ScanScheme::perturbed_raster(GridSpec::torus(32, 9).unwrap(), 4, d.clone(), d).unwrap();
    let mg = perturbation_margins(&s).unwrap();
    assert!(mg.all_satisfied());
    assert_eq!(mg.gcd, [1, 1]);
    let out = certify_mixing(&s, &MixingOptions::default()).unwrap();
    let cert = out.certificate().expect("certified");
    let rows: Vec<_> = cert.entries.iter().map(|e| (e.a, e.p1, e.p2)).collect();
    assert!(rows.contains(&([1, 0], 1, -1)), "{rows:?}");
}

#[test]
fn scheme_json_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = vec![0, 1, 0, -1];
    let s = ScanScheme::perturbed_raster(GridSpec::torus(16, 8).unwrap(), 4, d.clone(), d).unwrap();
    let path = dir.path().join("s.json");
    s.write_json(&path).unwrap();
    assert_eq!(ScanScheme::read_json(&path).unwrap(), s);
    let g = GridSpec::new(12, 4, Boundary::DirichletZero).unwrap();
    let s = ScanScheme::new(g, vec![Shift::ZERO, Shift::new(8, 8)]).unwrap();
    s.write_json(&path).unwrap();
    assert_eq!(ScanScheme::read_json(&path).unwrap(), s);
}

