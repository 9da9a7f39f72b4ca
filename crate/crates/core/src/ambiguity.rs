//! Inherent and example ambiguities, and a checker for data invariance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{align, block_phases};
use crate::error::{PtychoError, Result};
use crate::field::{restrict_at, twin, ComplexField};
use crate::forward::{acquire, data_distance, exit_wave, ExitWave};
use crate::grid::{Boundary, GridSpec, Shift};
use crate::rng::random_object;
use crate::scheme::ScanScheme;

/// Relative tolerance for pixelwise field comparisons in the classifier.
pub const FIELD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityParams {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub w: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<f64>,
}

impl Default for AmbiguityParams {
    fn default() -> Self {
        AmbiguityParams { c: 1.0, a: 0.0, b: 0.0, w: [0.0, 0.0], theta: Vec::new() }
    }
}

impl AmbiguityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(PtychoError::InvalidParameter(format!("scaling c must be positive, got {}", self.c)));
        }
        if ![self.a, self.b, self.w[0], self.w[1]].iter().all(|x| x.is_finite()) {
            return Err(PtychoError::InvalidParameter("phase parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Object estimate `g` and mask estimate `nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair {
    pub object: ComplexField,
    pub mask: ComplexField,
}

pub fn apply_scaling(f: &ComplexField, mu: &ComplexField, c: f64) -> Result<SolutionPair> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(PtychoError::InvalidParameter(format!("scaling c must be positive, got {c}")));
    }
    Ok(SolutionPair { object: f.scale(c), mask: mu.scale(1.0 / c) })
}

/// `nu(n) = mu(n) exp(-i(a + w·n))`, `g(n) = f(n) exp(i(b + w·n))`, with
/// `n` in mask-local and object coordinates respectively. On the torus the
/// data are invariant only for `w` in `(2π/n) Z^2`.
pub fn apply_affine_phase(f: &ComplexField, mu: &ComplexField, a: f64, b: f64, w: [f64; 2]) -> SolutionPair {
    let ramp = |field: &ComplexField, c0: f64, sign: f64| {
        let mut out = field.clone();
        for ((i, j), z) in out.data_mut().indexed_iter_mut() {
            let ph = c0 + sign * (w[0] * i as f64 + w[1] * j as f64);
            if ph != 0.0 {
                *z *= Complex64::from_polar(1.0, ph);
            }
        }
        out
    };
    SolutionPair { object: ramp(f, b, 1.0), mask: ramp(mu, -a, -1.0) }
}

pub fn apply_params(f: &ComplexField, mu: &ComplexField, p: &AmbiguityParams) -> Result<SolutionPair> {
    p.validate()?;
    let aff = apply_affine_phase(f, mu, p.a, p.b, p.w);
    apply_scaling(&aff.object, &aff.mask, p.c)
}

/// Multiplies exit wave `k` by `exp(iθ_k)`.
pub fn apply_block_phases(waves: &[ExitWave], theta: &[f64]) -> Result<Vec<ExitWave>> {
    if waves.len() != theta.len() {
        return Err(PtychoError::Shape(format!("{} phases for {} exit waves", theta.len(), waves.len())));
    }
    Ok(waves
        .iter()
        .zip(theta)
        .map(|(w, &th)| {
            let e = Complex64::from_polar(1.0, th);
            ExitWave { shift: w.shift, field: w.field.map(|z| z * e) }
        })
        .collect())
}

fn half_step(scheme: &ScanScheme) -> Result<usize> {
    let g = scheme.grid();
    let m = g.m;
    if m < 2 || m % 2 != 0 {
        return Err(PtychoError::Geometry(format!("example geometry needs even m, got {m}")));
    }
    let t = scheme.shifts();
    if t.len() != 2 || t[0] != Shift::ZERO || t[1] != Shift::new(m as i64 / 2, 0) {
        return Err(PtychoError::Geometry(format!("example geometry needs shifts (0,0),({},0)", m / 2)));
    }
    Ok(m / 2)
}

/// Two-block geometry with `t = (m/2, 0)`: `n = 3m/2`, or the torus with `n = m`.
pub fn example_grid(m: usize, periodic: bool, boundary: Boundary) -> Result<GridSpec> {
    if periodic {
        GridSpec::torus(m, m)
    } else {
        GridSpec::new(3 * m / 2, m, boundary)
    }
}

pub fn example_scheme(grid: GridSpec) -> Result<ScanScheme> {
    ScanScheme::new(grid, vec![Shift::ZERO, Shift::new(grid.m as i64 / 2, 0)])
}

/// Random object with rows `x` and `x + m` equal for `x < m/2`.
pub fn ex0_object(grid: &GridSpec, seed: u64) -> ComplexField {
    let n = grid.n;
    let m = grid.m;
    let mut f = random_object(n, seed);
    if n > m {
        for x in 0..m / 2 {
            for y in 0..n {
                let v = f.data()[[x, y]];
                f.data_mut()[[x + m, y]] = v;
            }
        }
    }
    f
}

/// Random object supported on rows `[m/2, m)` and columns `[0, m)`.
pub fn ex31_object(grid: &GridSpec, seed: u64) -> ComplexField {
    let n = grid.n;
    let m = grid.m;
    let full = random_object(n, seed);
    ComplexField::from_fn(n, n, |i, j| {
        if (m / 2..m).contains(&i) && j < m {
            full.data()[[i, j]]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn consistency_tol(f: &ComplexField) -> f64 {
    1e-12 * f.max_abs().max(1.0)
}

/// Writes block `part` into `g`, checking agreement with what earlier blocks wrote.
fn paint(
    g: &mut ComplexField,
    written: &mut ndarray::Array2<bool>,
    grid: &GridSpec,
    part: &ComplexField,
    tol: f64,
) -> Result<()> {
    let o = part.origin();
    for ((i, j), z) in part.data().indexed_iter() {
        let p = grid.canonical([o[0] + i as i64, o[1] + j as i64]);
        if !grid.contains(p) {
            continue;
        }
        let ix = [p[0] as usize, p[1] as usize];
        if written[ix] {
            if (g.data()[ix] - z).norm() > tol {
                return Err(PtychoError::Geometry(format!(
                    "blockwise construction disagrees at ({}, {})",
                    p[0], p[1]
                )));
            }
        } else {
            g.data_mut()[ix] = *z;
            written[ix] = true;
        }
    }
    Ok(())
}

fn blockwise_object<F>(f: &ComplexField, scheme: &ScanScheme, mut block: F) -> Result<ComplexField>
where
    F: FnMut(usize, &ComplexField) -> Result<ComplexField>,
{
    let grid = *scheme.grid();
    let mut g = f.clone();
    let mut written = ndarray::Array2::from_elem((grid.n, grid.n), false);
    let tol = consistency_tol(f);
    for (k, t) in scheme.shifts().iter().enumerate() {
        let part = restrict_at(f, &grid, *t)?;
        let new = block(k, &part)?.with_origin(part.origin());
        paint(&mut g, &mut written, &grid, &new, tol)?;
    }
    Ok(g)
}

/// `nu = Twin(mu)` and `g^t = Twin(f^t)` on each block, `g = f` elsewhere.
pub fn twin_pair_ex0(f: &ComplexField, mu: &ComplexField, scheme: &ScanScheme) -> Result<SolutionPair> {
    let h = half_step(scheme)?;
    let grid = scheme.grid();
    let fits = (grid.n == 3 * h) || (grid.boundary == Boundary::Torus && grid.n == 2 * h);
    if !fits {
        return Err(PtychoError::Geometry(format!(
            "twin example needs n = 3m/2, or the torus with n = m (n={}, m={})",
            grid.n, grid.m
        )));
    }
    let object = blockwise_object(f, scheme, |_, part| twin(part))?;
    Ok(SolutionPair { object, mask: twin(mu)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ex31Variant {
    Translate,
    TwinLike,
}

fn check_ex31_geometry(f: &ComplexField, scheme: &ScanScheme) -> Result<usize> {
    let h = half_step(scheme)?;
    let grid = scheme.grid();
    if grid.n != 3 * h {
        return Err(PtychoError::Geometry(format!("translate example needs n = 3m/2 (n={}, m={})", grid.n, grid.m)));
    }
    let tol = consistency_tol(f);
    for ((i, j), z) in f.data().indexed_iter() {
        let flank = (i < h || i >= 2 * h) && j < 2 * h;
        if flank && z.norm() > tol {
            return Err(PtychoError::Geometry(format!("object must vanish on the flank rows, found {z} at ({i}, {j})")));
        }
    }
    Ok(h)
}

/// `nu = mu` and an object whose masked blocks are translates (or twins)
/// of the true masked blocks.
pub fn translate_pair_ex31(
    f: &ComplexField,
    mu: &ComplexField,
    scheme: &ScanScheme,
    variant: Ex31Variant,
) -> Result<SolutionPair> {
    let h = check_ex31_geometry(f, scheme)?;
    let m = 2 * h;
    if mu.height() != m || mu.width() != m {
        return Err(PtychoError::Shape(format!("mask must be {m}x{m}")));
    }
    if let Some(((i, j), _)) = mu.data().indexed_iter().find(|(_, z)| z.norm() == 0.0) {
        return Err(PtychoError::ZeroMask { pixel: [i, j] });
    }
    let mud = mu.data();
    let zero = Complex64::new(0.0, 0.0);
    let object = blockwise_object(f, scheme, |k, part| {
        let p = part.data();
        Ok(match variant {
            Ex31Variant::Translate => ComplexField::from_fn(m, m, |i, j| {
                if k == 0 && i < h {
                    p[[i + h, j]] * mud[[i + h, j]] / mud[[i, j]]
                } else if k == 1 && i >= h {
                    p[[i - h, j]] * mud[[i - h, j]] / mud[[i, j]]
                } else {
                    zero
                }
            }),
            Ex31Variant::TwinLike => ComplexField::from_fn(m, m, |i, j| {
                let (a, b) = (m - 1 - i, m - 1 - j);
                (p[[a, b]] * mud[[a, b]]).conj() / mud[[i, j]]
            }),
        })
    })?;
    Ok(SolutionPair { object, mask: mu.clone() })
}

/// Largest pixelwise deviation from the identities that make the example
/// pair produce the same patterns: each candidate masked block equals the
/// true masked block translated by `∓(m/2, 0)` (or its block-frame twin).
pub fn ex31_identity_residual(
    pair: &SolutionPair,
    f: &ComplexField,
    mu: &ComplexField,
    scheme: &ScanScheme,
    variant: Ex31Variant,
) -> Result<f64> {
    let h = half_step(scheme)?;
    let grid = scheme.grid();
    let m = grid.m;
    let mut worst = 0.0f64;
    for (k, t) in scheme.shifts().iter().enumerate() {
        let lhs = exit_wave(&pair.mask, &pair.object, grid, *t)?.field;
        let x = exit_wave(mu, f, grid, *t)?.field;
        let rhs = match variant {
            Ex31Variant::Translate => {
                let xd = x.data();
                ComplexField::from_fn(m, m, |i, j| {
                    let src = if k == 0 { i as i64 + h as i64 } else { i as i64 - h as i64 };
                    if (0..m as i64).contains(&src) {
                        xd[[src as usize, j]]
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            }
            Ex31Variant::TwinLike => twin(&x)?,
        };
        let d = lhs
            .data()
            .iter()
            .zip(rhs.data().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(d);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Classification {
    Scaling { c: f64 },
    Affine { c: f64, w: [f64; 2], phase: f64 },
    BlockPhaseOnly,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCheck {
    pub theta: f64,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub data_equal: bool,
    pub max_dev: f64,
    pub theta: Vec<f64>,
    pub blockwise: Vec<BlockCheck>,
    pub classification: Classification,
    /// Best-fit `(c, a, b, w)` mapping the truth onto the pair.
    pub params: AmbiguityParams,
    pub aligned_error: f64,
}

fn rel_dist(x: &ComplexField, y: &ComplexField) -> f64 {
    let d = x.data().iter().zip(y.data().iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    if d == 0.0 {
        0.0
    } else {
        d / x.norm().max(f64::MIN_POSITIVE)
    }
}

/// Compares the data of the pair with the truth, extracts block phases and
/// classifies the pair: scaling, affine phase, block phases only, or other.
pub fn verify_equivalence(
    pair: &SolutionPair,
    f: &ComplexField,
    mu: &ComplexField,
    scheme: &ScanScheme,
    tol: f64,
) -> Result<EquivalenceReport> {
    let truth = acquire(scheme, mu, f)?;
    let cand = acquire(scheme, &pair.mask, &pair.object)?;
    let max_dev = data_distance(&truth, &cand)?;
    let data_equal = max_dev <= tol;

    let (theta, blockwise) = match block_phases(pair, f, mu, scheme) {
        Ok(bp) => {
            let checks = bp
                .theta
                .iter()
                .zip(&bp.residuals)
                .map(|(&theta, &residual)| BlockCheck { theta, residual, pass: residual <= FIELD_TOL })
                .collect();
            (bp.theta, checks)
        }
        Err(PtychoError::ZeroBlock { .. }) => (Vec::new(), Vec::new()),
        Err(e) => return Err(e),
    };
    let al = align(pair, f, mu)?;
    let params = AmbiguityParams { c: al.c, a: al.a, b: al.b, w: al.w, theta: theta.clone() };

    let cs = pair.object.norm() / f.norm();
    let is_scaling = cs > 0.0
        && cs.is_finite()
        && rel_dist(&pair.object, &f.scale(cs)) <= FIELD_TOL
        && rel_dist(&pair.mask, &mu.scale(1.0 / cs)) <= FIELD_TOL;
    let blocks_pass = !blockwise.is_empty() && blockwise.iter().all(|b| b.pass);

    let classification = if !data_equal {
        Classification::Other
    } else if is_scaling {
        Classification::Scaling { c: cs }
    } else if al.error() <= FIELD_TOL {
        Classification::Affine { c: al.c, w: al.w, phase: crate::constraints::wrap(al.b - al.a) }
    } else if blocks_pass {
        Classification::BlockPhaseOnly
    } else {
        Classification::Other
    };
    Ok(EquivalenceReport { data_equal, max_dev, theta, blockwise, classification, params, aligned_error: al.error() })
}
