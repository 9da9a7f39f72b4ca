//! Mask phase constraint (MPC) and object support constraint (OSC).

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PtychoError, Result};
use crate::field::{restrict_at, twin, ComplexField};
use crate::grid::{Point, Rect, Shift};
use crate::scheme::ScanScheme;

/// `alpha exp(i phi) = nu / mu`, pixelwise.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskRatio {
    pub alpha: Array2<f64>,
    pub phi: Array2<f64>,
}

impl MaskRatio {
    pub fn reconstruct(&self) -> Array2<Complex64> {
        ndarray::Zip::from(&self.alpha).and(&self.phi).map_collect(|&a, &p| Complex64::from_polar(a, p))
    }
}

pub fn mask_ratio(nu: &ComplexField, mu: &ComplexField) -> Result<MaskRatio> {
    if nu.data().dim() != mu.data().dim() {
        return Err(PtychoError::Shape("mask shapes differ".into()));
    }
    if let Some(((i, j), _)) = mu.data().indexed_iter().find(|(_, z)| z.norm() == 0.0) {
        return Err(PtychoError::ZeroMask { pixel: [i, j] });
    }
    let ratio = nu.data() / mu.data();
    Ok(MaskRatio { alpha: ratio.mapv(|z| z.norm()), phi: ratio.mapv(|z| z.arg()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcParams {
    pub delta: f64,
    pub gamma: f64,
}

impl MpcParams {
    pub fn new(delta: f64, gamma: f64) -> Result<Self> {
        let p = Self { delta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(PtychoError::InvalidParameter(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        let cap = self.gamma.min(0.5);
        if !(self.delta >= 0.0 && self.delta < cap) {
            return Err(PtychoError::InvalidParameter(format!(
                "delta must lie in [0, {cap}), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// `max_a Pr{Θ ∈ (a - 2δπ, a + 2δπ]}` for `Θ` with density `p_γ ⋆ p_γ`,
/// `p_γ` uniform on `(-γπ, γπ]`.
pub fn flat_probability(gamma: f64, delta: f64) -> f64 {
    if delta >= gamma {
        return 1.0;
    }
    1.0 - (1.0 - delta / gamma).powi(2)
}

/// Shortest arc of the circle containing all angles: `(width, midpoint)`.
pub fn minimal_arc(angles: &[f64]) -> Option<(f64, f64)> {
    if angles.is_empty() {
        return None;
    }
    let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(2.0 * PI)).collect();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut gap = a[0] + 2.0 * PI - a[a.len() - 1];
    let mut start = a[0];
    for w in a.windows(2) {
        let g = w[1] - w[0];
        if g > gap {
            gap = g;
            start = w[1];
        }
    }
    let width = (2.0 * PI - gap).max(0.0);
    let mid = wrap(start + width / 2.0);
    Some((width, mid))
}

/// Reduce an angle into `(-π, π]`.
pub fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcReport {
    pub pass: bool,
    pub arc_width: f64,
    pub phi0: f64,
    pub allowed_width: f64,
    /// `Re(conj(nu) mu) > 0` at every pixel.
    pub sign_test: bool,
    /// `Re(exp(i phi0) conj(nu) mu) > 0` at every pixel.
    pub rotated_sign_test: bool,
    pub params: MpcParams,
}

pub fn check_mpc(nu: &ComplexField, mu: &ComplexField, params: MpcParams) -> Result<MpcReport> {
    params.validate()?;
    let ratio = mask_ratio(nu, mu)?;
    let phases: Vec<f64> = ratio.phi.iter().copied().collect();
    let (width, phi0) = minimal_arc(&phases).ok_or(PtychoError::EmptySet)?;
    let allowed = 2.0 * params.delta * PI;
    let rot = Complex64::from_polar(1.0, phi0);
    let pairs = nu.data().iter().zip(mu.data().iter());
    let sign_test = pairs.clone().all(|(n, m)| (n.conj() * m).re > 0.0);
    let rotated_sign_test = pairs.clone().all(|(n, m)| (rot * n.conj() * m).re > 0.0);
    Ok(MpcReport {
        pass: width <= allowed + 1e-12,
        arc_width: width,
        phi0,
        allowed_width: allowed,
        sign_test,
        rotated_sign_test,
        params,
    })
}

/// Prior for the support constraint: admissible translations `t0` and the
/// box hull `fbox` of `supp(f⁰)` in block coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscParams {
    pub t0: Vec<Shift>,
    pub fbox: Rect,
}

impl OscParams {
    /// Box hull of the support of `f0` (an `m x m` block).
    pub fn from_object_block(f0: &ComplexField, t0: Vec<Shift>, threshold: f64) -> Result<Self> {
        let fbox = local_hull(f0, threshold).ok_or(PtychoError::EmptySet)?;
        Ok(Self { t0, fbox })
    }

    /// `{(a, 0) : a = 0, ..., hi}`.
    pub fn row_shifts(hi: i64, fbox: Rect) -> Self {
        Self { t0: (0..=hi).map(|a| Shift::new(a, 0)).collect(), fbox }
    }
}

fn local_hull(f: &ComplexField, threshold: f64) -> Option<Rect> {
    let supp = f.local_support(threshold);
    if supp.is_empty() {
        return None;
    }
    let lo = [supp.iter().map(|p| p[0]).min()?, supp.iter().map(|p| p[1]).min()?];
    let hi = [supp.iter().map(|p| p[0]).max()?, supp.iter().map(|p| p[1]).max()?];
    Some(Rect { start: lo, extent: [(hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscReport {
    pub pass: bool,
    pub offender: Option<Shift>,
    /// Translations `m` with `fbox - m` inside the block that contain the
    /// support of `g0` or of its twin.
    pub candidates: Vec<Shift>,
    pub support_empty: bool,
}

/// Support threshold relative to the peak modulus.
pub const SUPPORT_REL_THRESHOLD: f64 = 1e-12;

pub fn check_osc(g0: &ComplexField, params: &OscParams) -> Result<OscReport> {
    check_osc_with(g0, params, SUPPORT_REL_THRESHOLD)
}

pub fn check_osc_with(g0: &ComplexField, params: &OscParams, rel_threshold: f64) -> Result<OscReport> {
    if !g0.is_square() {
        return Err(PtychoError::Shape("g0 must be square".into()));
    }
    if params.t0.is_empty() {
        return Err(PtychoError::InvalidParameter("T0 must not be empty".into()));
    }
    let m = g0.width() as i64;
    let threshold = rel_threshold * g0.max_abs();
    let supp = g0.local_support(threshold);
    let tw_supp = twin(g0)?.local_support(threshold);
    let fb = params.fbox;
    let end = fb.end_inclusive();
    let inside = |p: &Point, d: Point| {
        let q = [p[0] + d[0], p[1] + d[1]];
        q[0] >= fb.start[0] && q[0] <= end[0] && q[1] >= fb.start[1] && q[1] <= end[1]
    };
    let mut candidates = Vec::new();
    // fbox - d inside [0, m)^2
    for d0 in (end[0] - (m - 1))..=fb.start[0] {
        for d1 in (end[1] - (m - 1))..=fb.start[1] {
            let d = [d0, d1];
            let hit = supp.is_empty()
                || supp.iter().all(|p| inside(p, d))
                || tw_supp.iter().all(|p| inside(p, d));
            if hit {
                candidates.push(Shift(d));
            }
        }
    }
    let offender = candidates.iter().find(|c| !params.t0.contains(c)).copied();
    Ok(OscReport { pass: offender.is_none(), offender, candidates, support_empty: supp.is_empty() })
}

/// Shifts whose object block has a tight box hull (the support constraint
/// holds with `T0 = {(0, 0)}`).
pub fn tight_hull_anchors(scheme: &ScanScheme, object: &ComplexField, rel_threshold: f64) -> Result<Vec<usize>> {
    let grid = scheme.grid();
    let threshold = rel_threshold * object.max_abs();
    let mut out = Vec::new();
    for (k, t) in scheme.shifts().iter().enumerate() {
        let part = restrict_at(object, grid, *t)?;
        if let Some(r) = local_hull(&part, threshold) {
            if r.start == [0, 0] && r.extent == [grid.m, grid.m] {
                out.push(k);
            }
        }
    }
    Ok(out)
}
