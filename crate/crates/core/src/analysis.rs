//! Comparison of a candidate (object, mask) pair with the ground truth:
//! log-ratio field, block phases, phase drift and affine phase profiles.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ambiguity::SolutionPair;
use crate::constraints::wrap;
use crate::error::{PtychoError, Result};
use crate::field::ComplexField;
use crate::forward::{exit_waves, fft2};
use crate::grid::{GridSpec, Point};
use crate::scheme::{MixingCertificate, ScanScheme};

pub const ZERO_REL_THRESHOLD: f64 = 1e-12;

/// `h = ln g - ln f` where both are nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRatioField {
    pub values: Array2<Complex64>,
    pub defined: Array2<bool>,
}

impl LogRatioField {
    pub fn defined_points(&self) -> Vec<(Point, Complex64)> {
        self.values
            .indexed_iter()
            .filter(|(ix, _)| self.defined[*ix])
            .map(|((i, j), z)| ([i as i64, j as i64], *z))
            .collect()
    }
}

/// Pixels where `|f|` or `|g|` is at most `zero_threshold` times its peak
/// are left undefined.
pub fn log_ratio(g: &ComplexField, f: &ComplexField, zero_threshold: f64) -> Result<LogRatioField> {
    if g.data().dim() != f.data().dim() {
        return Err(PtychoError::Shape("log ratio of unequal shapes".into()));
    }
    let (tf, tg) = (zero_threshold * f.max_abs(), zero_threshold * g.max_abs());
    let defined = ndarray::Zip::from(g.data()).and(f.data()).map_collect(|a, b| a.norm() > tg && b.norm() > tf);
    let values = ndarray::Zip::from(g.data()).and(f.data()).and(&defined).map_collect(|a, b, &d| {
        if d {
            let q = a / b;
            Complex64::new(q.norm().ln(), q.arg())
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(LogRatioField { values, defined })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPhases {
    pub theta: Vec<f64>,
    /// `|y - exp(iθ) x| / |x|` with `x = μ^k f^k`, `y = ν^k g^k`.
    pub residuals: Vec<f64>,
}

pub fn block_phases(pair: &SolutionPair, f: &ComplexField, mu: &ComplexField, scheme: &ScanScheme) -> Result<BlockPhases> {
    let truth = exit_waves(scheme, mu, f)?;
    let cand = exit_waves(scheme, &pair.mask, &pair.object)?;
    let mut theta = Vec::with_capacity(truth.len());
    let mut residuals = Vec::with_capacity(truth.len());
    for (k, (x, y)) in truth.iter().zip(&cand).enumerate() {
        let ip = x.field.inner(&y.field)?;
        let nx = x.field.norm();
        if nx == 0.0 {
            return Err(PtychoError::ZeroBlock { index: k });
        }
        // orthogonal blocks: every phase is equally bad, report 0
        let th = ip.arg();
        let rot = Complex64::from_polar(1.0, th);
        let diff: f64 = x
            .field
            .data()
            .iter()
            .zip(y.field.data().iter())
            .map(|(a, b)| (b - rot * a).norm_sqr())
            .sum::<f64>()
            .sqrt();
        theta.push(th);
        residuals.push(diff / nx);
    }
    Ok(BlockPhases { theta, residuals })
}

/// Wrapped block-phase difference of two overlapping shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub i: usize,
    pub j: usize,
    pub drift: f64,
}

fn axis_overlap(grid: &GridSpec, d: i64) -> usize {
    let (n, m) = (grid.n as i64, grid.m as i64);
    match grid.boundary {
        crate::grid::Boundary::Torus => (0..m).filter(|x| (x + d).rem_euclid(n) < m).count(),
        crate::grid::Boundary::DirichletZero => (m - d.abs()).max(0) as usize,
    }
}

/// `θ_i - θ_j` wrapped into `(-π, π]` for every pair of overlapping blocks.
pub fn phase_drift(theta: &[f64], scheme: &ScanScheme) -> Result<Vec<Drift>> {
    if theta.len() != scheme.len() {
        return Err(PtychoError::Shape(format!("{} phases for {} shifts", theta.len(), scheme.len())));
    }
    let grid = scheme.grid();
    let t = scheme.shifts();
    let mut out = Vec::new();
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            let d = [t[j].0[0] - t[i].0[0], t[j].0[1] - t[i].0[1]];
            if axis_overlap(grid, d[0]) > 0 && axis_overlap(grid, d[1]) > 0 {
                out.push(Drift { i, j, drift: wrap(theta[i] - theta[j]) });
            }
        }
    }
    Ok(out)
}

/// Fit of `phase(p) = theta0 + p·r (mod 2π)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub r: [f64; 2],
    pub theta0: f64,
    /// `max |1 - exp(i (phase - fitted))|`.
    pub residual: f64,
    /// Direction along which `r` is not determined (collinear points).
    pub undetermined: Option<[f64; 2]>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Circular regression of phases on integer points: coarse search by a
/// zero-padded DFT, then Gauss-Newton on wrapped residuals. Among equally
/// good coarse candidates the one with the smallest wrapped `|r|` wins.
pub fn fit_affine_phase(points: &[Point], phases: &[f64]) -> Result<AffineFit> {
    if points.len() != phases.len() || points.is_empty() {
        return Err(PtychoError::Shape("affine fit needs matching, nonempty inputs".into()));
    }
    let base = points[0];
    let rel: Vec<Point> = points.iter().map(|p| [p[0] - base[0], p[1] - base[1]]).collect();

    // Rank of the point differences.
    let dir = rel.iter().find(|p| **p != [0, 0]).copied();
    let collinear = match dir {
        None => true,
        Some(d) => rel.iter().all(|p| p[0] * d[1] - p[1] * d[0] == 0),
    };
    if collinear {
        let Some(d) = dir else {
            let theta0 = phases[0];
            let residual = max_residual(&rel, phases, [0.0, 0.0], theta0);
            return Ok(AffineFit { r: [0.0, 0.0], theta0: wrap(theta0), residual, undetermined: Some([1.0, 0.0]) });
        };
        let g = gcd(d[0], d[1]);
        let prim = [d[0] / g, d[1] / g];
        let coords: Vec<Point> = rel
            .iter()
            .map(|p| {
                let s = if prim[0] != 0 { p[0] / prim[0] } else { p[1] / prim[1] };
                [s, 0]
            })
            .collect();
        let (r1, theta0) = fit_full(&coords, phases, true);
        let norm2 = (prim[0] * prim[0] + prim[1] * prim[1]) as f64;
        let r = [r1[0] * prim[0] as f64 / norm2, r1[0] * prim[1] as f64 / norm2];
        let residual = max_residual(&rel, phases, r, theta0);
        let len = norm2.sqrt();
        return Ok(AffineFit {
            r,
            theta0: wrap(theta0),
            residual,
            undetermined: Some([-prim[1] as f64 / len, prim[0] as f64 / len]),
        });
    }
    let (r, theta0) = fit_full(&rel, phases, false);
    let residual = max_residual(&rel, phases, r, theta0);
    Ok(AffineFit { r, theta0: wrap(theta0), residual, undetermined: None })
}

fn max_residual(points: &[Point], phases: &[f64], r: [f64; 2], theta0: f64) -> f64 {
    points
        .iter()
        .zip(phases)
        .map(|(p, &th)| {
            let e = th - theta0 - p[0] as f64 * r[0] - p[1] as f64 * r[1];
            (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, e)).norm()
        })
        .fold(0.0, f64::max)
}

fn fit_full(points: &[Point], phases: &[f64], one_dim: bool) -> ([f64; 2], f64) {
    let lo = [points.iter().map(|p| p[0]).min().unwrap(), points.iter().map(|p| p[1]).min().unwrap()];
    let hi = [points.iter().map(|p| p[0]).max().unwrap(), points.iter().map(|p| p[1]).max().unwrap()];
    let extent = ((hi[0] - lo[0]).max(hi[1] - lo[1]) + 1) as usize;
    let big = 4 * extent.max(2);
    let (n0, n1) = (big, if one_dim { 1 } else { big });
    let mut buf = Array2::<Complex64>::zeros((n0, n1));
    for (p, &th) in points.iter().zip(phases) {
        buf[[(p[0] - lo[0]) as usize, (p[1] - lo[1]) as usize]] += Complex64::from_polar(1.0, th);
    }
    fft2(&mut buf, false);
    let peak = buf.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-9 * peak.max(1.0);
    let freq = |j: usize, n: usize| wrap(2.0 * PI * j as f64 / n as f64);
    let mut best: Option<([f64; 2], f64)> = None;
    for ((j0, j1), z) in buf.indexed_iter() {
        if z.norm() < peak - tol {
            continue;
        }
        let r = [freq(j0, n0), if one_dim { 0.0 } else { freq(j1, n1) }];
        let size = r[0].hypot(r[1]);
        if best.map_or(true, |(_, s)| size < s - 1e-15) {
            best = Some((r, size));
        }
    }
    let mut r = best.unwrap().0;
    // constant from the circular mean at this slope
    let mean: Complex64 = points
        .iter()
        .zip(phases)
        .map(|(p, &th)| Complex64::from_polar(1.0, th - p[0] as f64 * r[0] - p[1] as f64 * r[1]))
        .sum();
    let mut theta0 = mean.arg();

    let k = if one_dim { 2 } else { 3 };
    for _ in 0..50 {
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        for (p, &th) in points.iter().zip(phases) {
            let e = wrap(th - theta0 - p[0] as f64 * r[0] - p[1] as f64 * r[1]);
            let row = [1.0, p[0] as f64, p[1] as f64];
            for a in 0..k {
                atb[a] += row[a] * e;
                for b in 0..k {
                    ata[a][b] += row[a] * row[b];
                }
            }
        }
        let Some(step) = solve(&ata, &atb, k) else { break };
        theta0 += step[0];
        r[0] += step[1];
        if !one_dim {
            r[1] += step[2];
        }
        if step.iter().take(k).all(|s| s.abs() < 1e-15) {
            break;
        }
    }
    (r, theta0)
}

/// Gaussian elimination with partial pivoting on the leading `k x k` block.
fn solve(a: &[[f64; 3]; 3], b: &[f64; 3], k: usize) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut v = *b;
    for c in 0..k {
        let piv = (c..k).max_by(|&x, &y| m[x][c].abs().partial_cmp(&m[y][c].abs()).unwrap())?;
        if m[piv][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, piv);
        v.swap(c, piv);
        for rr in c + 1..k {
            let f = m[rr][c] / m[c][c];
            for cc in c..k {
                m[rr][cc] -= f * m[c][cc];
            }
            v[rr] -= f * v[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..k).rev() {
        let s: f64 = (c + 1..k).map(|j| m[c][j] * x[j]).sum();
        x[c] = (v[c] - s) / m[c][c];
    }
    Some(x)
}

/// Affine profile `θ_k = θ_0 + (t_k - t_0)·r` of block phases.
pub fn affine_fit(theta: &[f64], scheme: &ScanScheme) -> Result<AffineFit> {
    if theta.len() != scheme.len() {
        return Err(PtychoError::Shape(format!("{} phases for {} shifts", theta.len(), scheme.len())));
    }
    let pts: Vec<Point> = scheme.shifts().iter().map(|t| t.0).collect();
    fit_affine_phase(&pts, theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPhaseProfile {
    pub theta: Vec<f64>,
    pub r: [f64; 2],
    pub h0: f64,
    pub residual: f64,
    pub undetermined: Option<[f64; 2]>,
}

pub fn block_phase_profile(theta: &[f64], scheme: &ScanScheme) -> Result<BlockPhaseProfile> {
    let fit = affine_fit(theta, scheme)?;
    Ok(BlockPhaseProfile {
        theta: theta.iter().map(|&t| wrap(t)).collect(),
        r: fit.r,
        h0: fit.theta0,
        residual: fit.residual,
        undetermined: fit.undetermined,
    })
}

/// Pixel-level fit of `Im h` over the defined pixels.
pub fn fit_log_ratio_phase(h: &LogRatioField) -> Result<AffineFit> {
    let pts = h.defined_points();
    if pts.is_empty() {
        return Err(PtychoError::EmptySet);
    }
    let (p, v): (Vec<Point>, Vec<f64>) = pts.into_iter().map(|(p, z)| (p, z.im)).unzip();
    let mut fit = fit_affine_phase(&p, &v)?;
    // re-anchor the constant at the origin
    fit.theta0 = wrap(fit.theta0 - p[0][0] as f64 * fit.r[0] - p[0][1] as f64 * fit.r[1]);
    Ok(fit)
}

/// Parameters `(c, w, a, b)` that best map `(f, mu)` onto the pair:
/// `g ≈ c f exp(i(b + w·n))`, `nu ≈ mu exp(-i(a + w·n)) / c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub c: f64,
    pub w: [f64; 2],
    pub a: f64,
    pub b: f64,
    pub object_error: f64,
    pub mask_error: f64,
}

impl Alignment {
    pub fn error(&self) -> f64 {
        self.object_error.max(self.mask_error)
    }
}

fn phase_ramp(field: &ComplexField, w: [f64; 2], sign: f64) -> ComplexField {
    let mut out = field.clone();
    for ((i, j), z) in out.data_mut().indexed_iter_mut() {
        let ph = sign * (w[0] * i as f64 + w[1] * j as f64);
        if ph != 0.0 {
            *z *= Complex64::from_polar(1.0, ph);
        }
    }
    out
}

fn best_phase(x: &ComplexField, y: &ComplexField) -> Result<f64> {
    Ok(x.inner(y)?.arg())
}

fn rel_err(y: &ComplexField, x: &ComplexField) -> Result<f64> {
    let d = y.max_abs_diff(x)?;
    if d == 0.0 {
        return Ok(0.0);
    }
    let d = y.data().iter().zip(x.data().iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok(d / y.norm())
}

pub fn align(pair: &SolutionPair, f: &ComplexField, mu: &ComplexField) -> Result<Alignment> {
    if pair.object.data().dim() != f.data().dim() || pair.mask.data().dim() != mu.data().dim() {
        return Err(PtychoError::Shape("pair and truth shapes differ".into()));
    }
    let (nf, ng, nm, nn) = (f.norm(), pair.object.norm(), mu.norm(), pair.mask.norm());
    if nf == 0.0 || ng == 0.0 || nm == 0.0 || nn == 0.0 {
        return Err(PtychoError::InvalidParameter("alignment needs nonzero fields".into()));
    }
    let c = ((ng / nf) * (nm / nn)).sqrt();
    let h = log_ratio(&pair.object, f, ZERO_REL_THRESHOLD)?;
    let w = match fit_log_ratio_phase(&h) {
        Ok(fit) => fit.r,
        Err(_) => [0.0, 0.0],
    };
    let fw = phase_ramp(f, w, 1.0).scale(c);
    let b = best_phase(&fw, &pair.object)?;
    let gfit = fw.map(|z| z * Complex64::from_polar(1.0, b));
    let mw = phase_ramp(mu, w, -1.0).scale(1.0 / c);
    let a = -best_phase(&mw, &pair.mask)?;
    let nfit = mw.map(|z| z * Complex64::from_polar(1.0, -a));
    Ok(Alignment {
        c,
        w,
        a,
        b,
        object_error: rel_err(&pair.object, &gfit)?,
        mask_error: rel_err(&pair.mask, &nfit)?,
    })
}

/// Relative error of the pair after removing the best scaling and affine
/// phase; zero for the inherent ambiguities.
pub fn aligned_error(pair: &SolutionPair, f: &ComplexField, mu: &ComplexField, _scheme: &ScanScheme) -> Result<f64> {
    Ok(align(pair, f, mu)?.error())
}

/// Slope predicted by a certificate from block phases, compared with a
/// fitted slope modulo `2π`: returns the largest wrapped component gap.
pub fn certificate_slope_gap(cert: &MixingCertificate, theta: &[f64], r: [f64; 2]) -> f64 {
    let pred = cert.predicted_slope(theta);
    wrap(pred[0] - r[0]).abs().max(wrap(pred[1] - r[1]).abs())
}
