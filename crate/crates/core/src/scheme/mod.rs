//! Scan schemes and their combinatorics: overlap connectivity, lattice
//! paths, validity sets and mixing certificates.

mod connectivity;
mod lattice;
mod mixing;
mod paths;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PtychoError, Result};
use crate::grid::{block_of, Boundary, GridSpec, PixelSet, Point, Shift};

pub use connectivity::{connectivity, ConnectivityReport, PairOverlap};
pub use lattice::{hermite_normal_form, lattice_index, HermiteForm};
pub use mixing::{
    certify_mixing, coverage_region, perturbation_margins, CertificateEntry, PathWitness,
    MixingCertificate, MixingOptions, MixingOutcome, PerturbationMargins, Refusal, SearchStats, Triplet,
};
pub use paths::{enumerate_paths, validity_set, LatticePath};

/// Parameters of a (possibly perturbed) raster scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterParams {
    pub tau: usize,
    pub q: usize,
    pub delta1: Vec<i64>,
    pub delta2: Vec<i64>,
}

/// Ordered shift set on a grid. The first shift is always `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanScheme {
    grid: GridSpec,
    shifts: Vec<Shift>,
    raster: Option<RasterParams>,
}

impl ScanScheme {
    pub fn new(grid: GridSpec, shifts: Vec<Shift>) -> Result<Self> {
        Self::build(grid, shifts, None)
    }

    fn build(grid: GridSpec, shifts: Vec<Shift>, raster: Option<RasterParams>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(PtychoError::InvalidScheme("scheme has no shifts".into()));
        }
        let shifts: Vec<Shift> = shifts.into_iter().map(|t| t.canonical(&grid)).collect();
        if shifts[0] != Shift::ZERO {
            return Err(PtychoError::InvalidScheme(format!(
                "first shift must be (0, 0), got {:?}",
                shifts[0].0
            )));
        }
        let mut seen = HashSet::new();
        for t in &shifts {
            if !seen.insert(*t) {
                return Err(PtychoError::InvalidScheme(format!(
                    "duplicate shift {:?} after canonicalization",
                    t.0
                )));
            }
        }
        Ok(Self { grid, shifts, raster })
    }

    /// `t_kl = tau (k, l)` for `k, l < n / tau`, row-major.
    pub fn raster(grid: GridSpec, tau: usize) -> Result<Self> {
        let q = raster_count(&grid, tau)?;
        Self::perturbed_raster(grid, tau, vec![0; q], vec![0; q])
    }

    /// `t_kl = tau (k, l) + (delta1[k], delta2[l])`, reduced mod n.
    pub fn perturbed_raster(grid: GridSpec, tau: usize, delta1: Vec<i64>, delta2: Vec<i64>) -> Result<Self> {
        let q = raster_count(&grid, tau)?;
        if delta1.len() != q || delta2.len() != q {
            return Err(PtychoError::InvalidParameter(format!(
                "perturbation lists must have q={q} entries, got {} and {}",
                delta1.len(),
                delta2.len()
            )));
        }
        let tau_i = tau as i64;
        let mut shifts = Vec::with_capacity(q * q);
        for k in 0..q {
            for l in 0..q {
                shifts.push(Shift::new(tau_i * k as i64 + delta1[k], tau_i * l as i64 + delta2[l]));
            }
        }
        let raster = RasterParams { tau, q, delta1, delta2 };
        Self::build(grid, shifts, Some(raster))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn shifts(&self) -> &[Shift] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn raster_params(&self) -> Option<&RasterParams> {
        self.raster.as_ref()
    }

    /// Index of shift `(k, l)` in a raster-built scheme.
    pub fn raster_index(&self, k: usize, l: usize) -> Option<usize> {
        let r = self.raster.as_ref()?;
        Some((k % r.q) * r.q + l % r.q)
    }

    /// Blocks `M^t` in scheme order.
    pub fn blocks(&self) -> Result<Vec<PixelSet>> {
        self.shifts.iter().map(|t| block_of(&self.grid, *t)).collect()
    }

    /// Same shifts in a different order. `order[0]` must select `(0, 0)`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(PtychoError::InvalidParameter("permutation length mismatch".into()));
        }
        let shifts = order.iter().map(|&i| self.shifts[i]).collect();
        Self::build(self.grid, shifts, None)
    }

    pub fn to_file(&self) -> SchemeFile {
        SchemeFile {
            n: self.grid.n,
            m: self.grid.m,
            boundary: self.grid.boundary,
            shifts: self.shifts.iter().map(|t| t.0).collect(),
            raster: self.raster.clone(),
        }
    }

    pub fn from_file(file: SchemeFile) -> Result<Self> {
        let grid = GridSpec::new(file.n, file.m, file.boundary)?;
        let shifts: Vec<Shift> = file.shifts.iter().map(|p| Shift(*p)).collect();
        let scheme = Self::build(grid, shifts, file.raster.clone())?;
        if let Some(r) = &file.raster {
            let rebuilt = Self::perturbed_raster(grid, r.tau, r.delta1.clone(), r.delta2.clone())?;
            if rebuilt.shifts != scheme.shifts {
                return Err(PtychoError::InvalidScheme(
                    "raster parameters do not reproduce the listed shifts".into(),
                ));
            }
        }
        Ok(scheme)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file: SchemeFile = serde_json::from_slice(&fs::read(path)?)?;
        Self::from_file(file)
    }
}

fn raster_count(grid: &GridSpec, tau: usize) -> Result<usize> {
    if grid.boundary != Boundary::Torus {
        return Err(PtychoError::InvalidScheme("raster schemes require the torus boundary".into()));
    }
    if tau == 0 || grid.n % tau != 0 {
        return Err(PtychoError::InvalidParameter(format!(
            "raster step {tau} does not divide n={}",
            grid.n
        )));
    }
    Ok(grid.n / tau)
}

/// On-disk form of a scheme (`scheme.json`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeFile {
    pub n: usize,
    pub m: usize,
    pub boundary: Boundary,
    pub shifts: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster: Option<RasterParams>,
}
