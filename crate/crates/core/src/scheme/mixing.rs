//! Coverage regions of three-part phase reductions and mixing certificates.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::hermite_normal_form;
use super::paths::{enumerate_paths, validity_set, LatticePath};
use super::ScanScheme;
use crate::error::{PtychoError, Result};
use crate::grid::{block_of, Boundary, GridSpec, PixelSet, Point, Shift};

/// Indices `(l0, l1, l2)` into the scheme's shift list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub l0: usize,
    pub l1: usize,
    pub l2: usize,
}

impl Triplet {
    pub fn new(l0: usize, l1: usize, l2: usize) -> Self {
        Self { l0, l1, l2 }
    }

    /// Lifted differences `(t_l1 - t_l0, t_l2 - t_l0)` (shortest representatives).
    pub fn differences(&self, scheme: &ScanScheme) -> Result<(Point, Point)> {
        let t = scheme.shifts();
        let q = t.len();
        if self.l0 >= q || self.l1 >= q || self.l2 >= q {
            return Err(PtychoError::InvalidParameter(format!(
                "triplet {:?} out of range for {q} shifts",
                self
            )));
        }
        let g = scheme.grid();
        let d = |k: usize| g.min_image([t[k].0[0] - t[self.l0].0[0], t[k].0[1] - t[self.l0].0[1]]);
        Ok((d(self.l1), d(self.l2)))
    }
}

fn combo(p1: i64, s1: Point, p2: i64, s2: Point) -> Point {
    [p1 * s1[0] - p2 * s2[0], p1 * s1[1] - p2 * s2[1]]
}

fn check_identity(scheme: &ScanScheme, triplet: Triplet, p1: i64, p2: i64, a: Point) -> Result<(Point, Point)> {
    let (s1, s2) = triplet.differences(scheme)?;
    let got = combo(p1, s1, p2, s2);
    if got != a {
        return Err(PtychoError::TripletIdentity { triplet: [triplet.l0, triplet.l1, triplet.l2], got, expected: a });
    }
    Ok((s1, s2))
}

fn require_torus(grid: &GridSpec) -> Result<()> {
    if grid.boundary != Boundary::Torus {
        return Err(PtychoError::InvalidScheme("mixing analysis requires the torus boundary".into()));
    }
    Ok(())
}

/// `{x : x + off in [0, m) mod n}` along one axis.
fn axis_window(n: usize, m: usize, off: i64) -> Vec<bool> {
    let mut out = vec![false; n];
    for y in 0..m as i64 {
        out[(y - off).rem_euclid(n as i64) as usize] = true;
    }
    out
}

/// Per-path term `M0 ∩ (M0 - a) ∩ Σ_σ(M0)` as a product of axis masks.
fn term_axes(grid: &GridSpec, path: &LatticePath, s1: Point, s2: Point, a: Point) -> Option<[Vec<bool>; 2]> {
    let (n, m) = (grid.n, grid.m);
    let mut offsets = path.anchor_vectors(s1, s2);
    offsets.push([0, 0]);
    offsets.push(a);
    let mut axes: [Vec<bool>; 2] = [vec![true; n], vec![true; n]];
    for (k, axis) in axes.iter_mut().enumerate() {
        for v in &offsets {
            let w = axis_window(n, m, v[k]);
            for (x, y) in axis.iter_mut().zip(w) {
                *x &= y;
            }
        }
        if !axis.iter().any(|&x| x) {
            return None;
        }
    }
    Some(axes)
}

/// The base region `W0 = ∪_σ [M0 ∩ (M0 - a) ∩ Σ_σ]` as a row-major mask.
fn base_region(grid: &GridSpec, paths: &[LatticePath], s1: Point, s2: Point, a: Point) -> Vec<bool> {
    let n = grid.n;
    let mut w = vec![false; n * n];
    for path in paths {
        if let Some([r, c]) = term_axes(grid, path, s1, s2, a) {
            for (i, _) in r.iter().enumerate().filter(|(_, &x)| x) {
                for (j, _) in c.iter().enumerate().filter(|(_, &x)| x) {
                    w[i * n + j] = true;
                }
            }
        }
    }
    w
}

/// `∪_t (t + W0)` as a row-major mask.
fn union_of_translates(grid: &GridSpec, shifts: &[Shift], w0: &[bool]) -> Vec<bool> {
    let n = grid.n;
    let pts: Vec<(usize, usize)> = w0
        .iter()
        .enumerate()
        .filter(|(_, &x)| x)
        .map(|(k, _)| (k / n, k % n))
        .collect();
    let mut out = vec![false; n * n];
    let mut count = 0;
    for t in shifts {
        let (t0, t1) = (t.0[0].rem_euclid(n as i64) as usize, t.0[1].rem_euclid(n as i64) as usize);
        for &(i, j) in &pts {
            let k = ((i + t0) % n) * n + (j + t1) % n;
            if !out[k] {
                out[k] = true;
                count += 1;
            }
        }
        if count == n * n {
            break;
        }
    }
    out
}

fn coverage_is_full(scheme: &ScanScheme, s1: Point, s2: Point, p1: i64, p2: i64) -> Result<bool> {
    let grid = scheme.grid();
    let a = combo(p1, s1, p2, s2);
    let paths = enumerate_paths(p1, p2)?;
    let w0 = base_region(grid, &paths, s1, s2, a);
    let size = w0.iter().filter(|&&x| x).count();
    if size == 0 || size * scheme.len() < grid.n * grid.n {
        return Ok(false);
    }
    Ok(union_of_translates(grid, scheme.shifts(), &w0).into_iter().all(|x| x))
}

/// Region `D` on which the reduction identity for `(triplet, p1, p2, a)`
/// holds: the union over monotone paths `σ` and shifts `t` of
/// `t - t_l0 + M^l0 ∩ (M^l0 - a) ∩ Σ_σ`.
pub fn coverage_region(scheme: &ScanScheme, triplet: Triplet, p1: i64, p2: i64, a: Point) -> Result<PixelSet> {
    let grid = *scheme.grid();
    require_torus(&grid)?;
    let (s1, s2) = check_identity(scheme, triplet, p1, p2, a)?;
    let paths = enumerate_paths(p1, p2)?;
    let w0 = base_region(&grid, &paths, s1, s2, a);
    let d = union_of_translates(&grid, scheme.shifts(), &w0);
    let n = grid.n;
    PixelSet::from_points(
        grid,
        d.iter()
            .enumerate()
            .filter(|(_, &x)| x)
            .map(|(k, _)| [(k / n) as i64, (k % n) as i64]),
    )
}

/// The same region assembled from pixel sets: validity sets are built on
/// the block `M^l0` and translated by `t - t_l0`.
pub(crate) fn coverage_region_by_sets(
    scheme: &ScanScheme,
    triplet: Triplet,
    p1: i64,
    p2: i64,
    a: Point,
) -> Result<(PixelSet, Vec<PathWitness>)> {
    let grid = *scheme.grid();
    require_torus(&grid)?;
    let (s1, s2) = check_identity(scheme, triplet, p1, p2, a)?;
    let t0 = scheme.shifts()[triplet.l0];
    let base = block_of(&grid, t0)?;
    let base_a = base.intersection(&base.translate([-a[0], -a[1]]));
    let mut d = PixelSet::empty(grid);
    let mut witnesses = Vec::new();
    for path in enumerate_paths(p1, p2)? {
        let sigma = validity_set(&path, Shift(s1), Shift(s2), &base);
        let term = sigma.intersection(&base_a);
        if term.is_empty() {
            continue;
        }
        for t in scheme.shifts() {
            d = d.union(&term.translate([t.0[0] - t0.0[0], t.0[1] - t0.0[1]]));
        }
        witnesses.push(PathWitness { sigma_size: sigma.len(), term_size: term.len(), path });
    }
    Ok((d, witnesses))
}

/// A path whose validity term is nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathWitness {
    pub path: LatticePath,
    /// `|Σ_σ|`
    pub sigma_size: usize,
    /// `|M ∩ (M - a) ∩ Σ_σ|`
    pub term_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub triplet: Triplet,
    pub p1: i64,
    pub p2: i64,
    pub s1: Point,
    pub s2: Point,
    pub a: Point,
    pub witness_paths: Vec<PathWitness>,
    pub coverage_verified: bool,
}

/// Witness of the mixing property: `Σ_e c[i][e] a_e = u[i]`, `det u = 1` and
/// `b u = I`; every entry has coverage equal to the whole torus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixingCertificate {
    pub entries: Vec<CertificateEntry>,
    pub c: [Vec<i64>; 2],
    pub u: [Point; 2],
    pub b: [Point; 2],
    pub max_p: i64,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub triplets: usize,
    pub candidate_keys: usize,
    pub distinct_vectors: usize,
    pub kept_vectors: Vec<Point>,
}

impl MixingCertificate {
    /// Re-check every claim from scratch against `scheme`.
    pub fn verify(&self, scheme: &ScanScheme) -> Result<()> {
        let fail = |msg: String| Err(PtychoError::Certificate(msg));
        let det = self.u[0][0] * self.u[1][1] - self.u[0][1] * self.u[1][0];
        if det != 1 {
            return fail(format!("det u = {det}"));
        }
        for j in 0..2 {
            let row = [
                self.b[j][0] * self.u[0][0] + self.b[j][1] * self.u[1][0],
                self.b[j][0] * self.u[0][1] + self.b[j][1] * self.u[1][1],
            ];
            let e = if j == 0 { [1, 0] } else { [0, 1] };
            if row != e {
                return fail(format!("b u row {j} = {row:?}"));
            }
        }
        for i in 0..2 {
            if self.c[i].len() != self.entries.len() {
                return fail("coefficient length mismatch".into());
            }
            let mut s = [0i64; 2];
            for (c, e) in self.c[i].iter().zip(&self.entries) {
                s[0] += c * e.a[0];
                s[1] += c * e.a[1];
            }
            if s != self.u[i] {
                return fail(format!("combination {i} gives {s:?}, expected {:?}", self.u[i]));
            }
        }
        for e in &self.entries {
            let (s1, s2) = check_identity(scheme, e.triplet, e.p1, e.p2, e.a)?;
            if (s1, s2) != (e.s1, e.s2) {
                return fail(format!("differences of {:?} changed", e.triplet));
            }
            let (d, _) = coverage_region_by_sets(scheme, e.triplet, e.p1, e.p2, e.a)?;
            if !d.is_full() {
                return fail(format!("coverage of {:?} misses {} pixels", e.triplet, scheme.grid().n.pow(2) - d.len()));
            }
        }
        Ok(())
    }

    /// `r_j = Σ_i b_ji Σ_e c_i[e] (p1 (θ_l1 - θ_l0) - p2 (θ_l2 - θ_l0))`, the
    /// affine slope implied by block phases `theta` (not reduced mod 2π).
    pub fn predicted_slope(&self, theta: &[f64]) -> [f64; 2] {
        let mut v = [0.0f64; 2];
        for (i, vi) in v.iter_mut().enumerate() {
            for (c, e) in self.c[i].iter().zip(&self.entries) {
                let t = &e.triplet;
                let incr = e.p1 as f64 * (theta[t.l1] - theta[t.l0]) - e.p2 as f64 * (theta[t.l2] - theta[t.l0]);
                *vi += *c as f64 * incr;
            }
        }
        [
            self.b[0][0] as f64 * v[0] + self.b[0][1] as f64 * v[1],
            self.b[1][0] as f64 * v[0] + self.b[1][1] as f64 * v[1],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Refusal {
    /// Every shift difference (and the torus period) lies in a proper
    /// sublattice of the given index, so no unit vector can be combined.
    CommonFactor { index: u64 },
    /// No candidate vector had coverage equal to the whole torus.
    NoCoverageVectors { note: String },
    /// Kept vectors span a proper sublattice (`None`: rank below two).
    ProperSublattice { index: Option<u64>, kept: Vec<Point>, note: String },
    /// No nonzero candidate vector within the bound on `p`.
    PBoundExhausted { max_p: i64, note: String },
}

impl Refusal {
    /// Only the common-factor refusal proves the scheme is not mixing.
    pub fn is_structural(&self) -> bool {
        matches!(self, Refusal::CommonFactor { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum MixingOutcome {
    Certified(MixingCertificate),
    Refused(Refusal),
}

impl MixingOutcome {
    pub fn certificate(&self) -> Option<&MixingCertificate> {
        match self {
            MixingOutcome::Certified(c) => Some(c),
            MixingOutcome::Refused(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixingOptions {
    /// Bound on `|p1|` and `|p2|`.
    pub max_p: i64,
    /// Schemes up to this many shifts use every ordered triplet.
    pub full_enumeration_limit: usize,
    /// Otherwise both differences must have sup-norm at most this radius
    /// (default `2m`).
    pub neighborhood_radius: Option<i64>,
}

impl Default for MixingOptions {
    fn default() -> Self {
        Self { max_p: 2, full_enumeration_limit: 64, neighborhood_radius: None }
    }
}

const SEARCH_NOTE: &str = "not certified within the search bounds; non-monotone paths and larger |p| were not searched";

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Key {
    weight: i64,
    pair: bool,
    s1: Point,
    s2: Point,
    p1: i64,
    p2: i64,
}

/// The smallest-index shift `t_l0 + 2 s1`, used to display pair reductions
/// as triplets; falls back to `l1`.
fn pair_partner(scheme: &ScanScheme, l0: usize, l1: usize, s1: Point) -> usize {
    let g = scheme.grid();
    let t0 = scheme.shifts()[l0].0;
    let target = Shift(g.canonical([t0[0] + 2 * s1[0], t0[1] + 2 * s1[1]]));
    scheme.shifts().iter().position(|t| *t == target).unwrap_or(l1)
}

/// Search for a mixing certificate.
pub fn certify_mixing(scheme: &ScanScheme, options: &MixingOptions) -> Result<MixingOutcome> {
    let grid = *scheme.grid();
    require_torus(&grid)?;
    if options.max_p < 1 {
        return Err(PtychoError::InvalidParameter("max_p must be at least 1".into()));
    }
    let shifts = scheme.shifts();
    let q = shifts.len();
    let n = grid.n as i64;

    // Structural obstruction: all lifts of all differences in a sublattice.
    let mut gens: Vec<Point> = vec![[n, 0], [0, n]];
    for t in shifts {
        gens.push(t.0);
    }
    let structural = hermite_normal_form(&gens)?;
    if let Some(index) = structural.index() {
        if index > 1 {
            return Ok(MixingOutcome::Refused(Refusal::CommonFactor { index }));
        }
    }

    let radius = options.neighborhood_radius.unwrap_or(2 * grid.m as i64);
    let near = |d: Point| q <= options.full_enumeration_limit || d[0].abs().max(d[1].abs()) <= radius;
    let diff = |i: usize, j: usize| grid.min_image([shifts[j].0[0] - shifts[i].0[0], shifts[j].0[1] - shifts[i].0[1]]);

    // Axis offsets after which two blocks still overlap.
    let axis_ok: Vec<bool> = (0..n).map(|d| axis_window(grid.n, grid.m, d)[..grid.m].iter().any(|&x| x)).collect();
    let valid = |a: Point| [a[0].rem_euclid(n), a[1].rem_euclid(n)] != [0, 0] && axis_ok[a[0].rem_euclid(n) as usize] && axis_ok[a[1].rem_euclid(n) as usize];

    // Bases with the same neighbour differences produce the same keys; the
    // smallest such base yields the lexicographically first triplets.
    let neighbours: Vec<Vec<(Point, usize)>> = (0..q)
        .map(|l0| (0..q).filter(|&l| l != l0).map(|l| (diff(l0, l), l)).filter(|(d, _)| near(*d)).collect())
        .collect();
    let mut stats = SearchStats::default();
    let mut bases: Vec<usize> = Vec::new();
    let mut seen: HashSet<Vec<Point>> = HashSet::new();
    for (l0, nb) in neighbours.iter().enumerate() {
        stats.triplets += nb.len() * nb.len().saturating_sub(1);
        let mut sig: Vec<Point> = nb.iter().map(|x| x.0).collect();
        sig.sort_unstable();
        if seen.insert(sig) {
            bases.push(l0);
        }
    }

    // First triplet (in lexicographic order) for every reduction key.
    let merge = |mut a: HashMap<Key, Triplet>, b: HashMap<Key, Triplet>| {
        for (k, t) in b {
            a.entry(k).and_modify(|old| *old = (*old).min(t)).or_insert(t);
        }
        a
    };
    let merged: HashMap<Key, Triplet> = bases
        .par_iter()
        .fold(HashMap::new, |mut map: HashMap<Key, Triplet>, &l0| {
            let mut add = |key: Key, t: Triplet| {
                if valid(combo(key.p1, key.s1, key.p2, key.s2)) {
                    map.entry(key).and_modify(|old| *old = (*old).min(t)).or_insert(t);
                }
            };
            let nb = &neighbours[l0];
            for &(s1, l1) in nb {
                for p1 in -options.max_p..=options.max_p {
                    if p1 != 0 {
                        let key = Key { weight: p1.abs(), pair: true, s1, s2: [0, 0], p1, p2: 0 };
                        add(key, Triplet::new(l0, l1, l1));
                    }
                }
                for &(s2, l2) in nb {
                    if l2 == l1 {
                        continue;
                    }
                    for p1 in -options.max_p..=options.max_p {
                        for p2 in -options.max_p..=options.max_p {
                            if p1 == 0 || p2 == 0 {
                                continue;
                            }
                            let key = Key { weight: p1.abs() + p2.abs(), pair: false, s1, s2, p1, p2 };
                            add(key, Triplet::new(l0, l1, l2));
                        }
                    }
                }
            }
            map
        })
        .reduce(HashMap::new, merge);
    stats.candidate_keys = merged.len();
    if merged.is_empty() {
        return Ok(MixingOutcome::Refused(Refusal::PBoundExhausted { max_p: options.max_p, note: SEARCH_NOTE.into() }));
    }

    // Group by vector, simplest reductions first.
    let mut by_vector: BTreeMap<Point, Vec<(Key, Triplet)>> = BTreeMap::new();
    for (k, t) in merged {
        by_vector.entry(combo(k.p1, k.s1, k.p2, k.s2)).or_default().push((k, t));
    }
    for list in by_vector.values_mut() {
        list.sort_by(|x, y| (x.0.weight, !x.0.pair, x.1, x.0).cmp(&(y.0.weight, !y.0.pair, y.1, y.0)));
    }
    stats.distinct_vectors = by_vector.len();

    let kept: Vec<(Point, Key, Triplet)> = by_vector
        .par_iter()
        .map(|(a, list)| -> Result<Option<(Point, Key, Triplet)>> {
            for (k, t) in list {
                if coverage_is_full(scheme, k.s1, k.s2, k.p1, k.p2)? {
                    return Ok(Some((*a, *k, *t)));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut kept = kept;
    kept.sort_by_key(|(a, _, _)| (a[0].abs() + a[1].abs(), a[0] < 0 || a[1] < 0, -a[0], -a[1]));
    stats.kept_vectors = kept.iter().map(|(a, _, _)| *a).collect();
    if kept.is_empty() {
        return Ok(MixingOutcome::Refused(Refusal::NoCoverageVectors { note: SEARCH_NOTE.into() }));
    }
    let full = hermite_normal_form(&stats.kept_vectors)?;
    if !full.is_full() {
        return Ok(MixingOutcome::Refused(Refusal::ProperSublattice {
            index: full.index(),
            kept: stats.kept_vectors.clone(),
            note: SEARCH_NOTE.into(),
        }));
    }

    // Greedy selection of a small generating subset.
    let mut selected: Vec<(Point, Key, Triplet)> = Vec::new();
    let mut current: Option<u64> = None;
    let mut rank = 0;
    for item in &kept {
        let mut trial: Vec<Point> = selected.iter().map(|x| x.0).collect();
        trial.push(item.0);
        let h = hermite_normal_form(&trial)?;
        let better = h.rank > rank || matches!((h.index(), current), (Some(a), Some(b)) if a < b);
        if better {
            selected.push(*item);
            rank = h.rank;
            current = h.index();
            if h.is_full() {
                break;
            }
        }
    }
    let vectors: Vec<Point> = selected.iter().map(|x| x.0).collect();
    let h = hermite_normal_form(&vectors)?;
    debug_assert!(h.is_full());

    let mut entries = Vec::new();
    for (a, k, t) in &selected {
        let triplet = if k.pair { Triplet::new(t.l0, t.l1, pair_partner(scheme, t.l0, t.l1, k.s1)) } else { *t };
        let (s1, s2) = triplet.differences(scheme)?;
        let (d, witness_paths) = coverage_region_by_sets(scheme, triplet, k.p1, k.p2, *a)?;
        entries.push(CertificateEntry {
            triplet,
            p1: k.p1,
            p2: k.p2,
            s1,
            s2,
            a: *a,
            witness_paths,
            coverage_verified: d.is_full(),
        });
    }
    let cert = MixingCertificate {
        entries,
        c: [h.coeffs[0].clone(), h.coeffs[1].clone()],
        u: [[1, 0], [0, 1]],
        b: [[1, 0], [0, 1]],
        max_p: options.max_p,
        stats,
    };
    cert.verify(scheme)?;
    Ok(MixingOutcome::Certified(cert))
}

/// Margins of the perturbed-raster sufficient conditions (nonnegative
/// means satisfied) and the gcd of the second differences, per direction.
/// Indices are cyclic in `k` and `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationMargins {
    /// `m - (2 tau + δ_{k+1} - δ_{k-1})`, min over k, per direction.
    pub overlap: [i64; 2],
    /// `|s±| - |a|`, min over k, per direction.
    pub step_vs_second_difference: [i64; 2],
    /// `(m - 1 - |a_k|) - (tau + δ_{k'+1} - δ_{k'} + |a_k|)`, min over k, k'.
    pub neighbor_overlap: [i64; 2],
    /// Second differences `δ_{k+1} + δ_{k-1} - 2 δ_k`.
    pub second_differences: [Vec<i64>; 2],
    pub gcd: [i64; 2],
}

impl PerturbationMargins {
    pub fn all_satisfied(&self) -> bool {
        self.overlap.iter().chain(&self.step_vs_second_difference).chain(&self.neighbor_overlap).all(|&x| x >= 0)
            && self.gcd == [1, 1]
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub fn perturbation_margins(scheme: &ScanScheme) -> Result<PerturbationMargins> {
    let r = scheme
        .raster_params()
        .ok_or_else(|| PtychoError::InvalidScheme("scheme has no raster parameters".into()))?;
    let (m, tau, q) = (scheme.grid().m as i64, r.tau as i64, r.q);
    let mut out = PerturbationMargins {
        overlap: [0; 2],
        step_vs_second_difference: [0; 2],
        neighbor_overlap: [0; 2],
        second_differences: [vec![], vec![]],
        gcd: [0; 2],
    };
    for (j, d) in [&r.delta1, &r.delta2].into_iter().enumerate() {
        let at = |k: isize| d[k.rem_euclid(q as isize) as usize];
        let a: Vec<i64> = (0..q as isize).map(|k| at(k + 1) + at(k - 1) - 2 * at(k)).collect();
        let max_step = (0..q as isize).map(|k| at(k + 1) - at(k)).max().unwrap();
        out.overlap[j] = (0..q as isize).map(|k| m - (2 * tau + at(k + 1) - at(k - 1))).min().unwrap();
        out.step_vs_second_difference[j] = (0..q as isize)
            .map(|k| {
                let plus = (tau + at(k + 1) - at(k)).abs();
                let minus = (-tau + at(k - 1) - at(k)).abs();
                plus.min(minus) - a[k as usize].abs()
            })
            .min()
            .unwrap();
        out.neighbor_overlap[j] = a.iter().map(|ak| (m - 1 - ak.abs()) - (tau + max_step + ak.abs())).min().unwrap();
        out.gcd[j] = a.iter().fold(0, |g, &x| gcd(g, x));
        out.second_differences[j] = a;
    }
    Ok(out)
}
