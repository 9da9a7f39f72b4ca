//! Coded diffraction patterns and ptychographic datasets.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{PtychoError, Result};
use crate::field::{read_cf64, restrict_at, write_cf64, ComplexField};
use crate::grid::{block_of, Boundary, GridSpec, Shift};
use crate::scheme::{SchemeFile, ScanScheme};

pub const FORMAT_VERSION: u32 = 1;

/// Masked object on one block, in block coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitWave {
    pub shift: Shift,
    pub field: ComplexField,
}

/// Squared Fourier magnitudes on the `(2m-1) x (2m-1)` frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionPattern {
    pub m: usize,
    pub values: Array2<f64>,
}

impl DiffractionPattern {
    pub fn side(&self) -> usize {
        2 * self.m - 1
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Inverse transform of the pattern: the periodized autocorrelation
    /// `A(k) = Σ w(k' + k) conj(w(k'))`, with `k` taken mod `2m-1`.
    pub fn autocorrelation(&self) -> Array2<Complex64> {
        let mut a = self.values.mapv(|v| Complex64::new(v, 0.0));
        fft2(&mut a, true);
        let scale = 1.0 / (self.side() * self.side()) as f64;
        a.mapv_inplace(|z| z * scale);
        a
    }
}

/// In-place 2-D DFT, unnormalized. `inverse` uses the `+i` kernel.
pub fn fft2(data: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = data.dim();
    let mut planner = FftPlanner::new();
    let (fr, fc) = if inverse {
        (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h))
    } else {
        (planner.plan_fft_forward(w), planner.plan_fft_forward(h))
    };
    for mut row in data.axis_iter_mut(Axis(0)) {
        let mut buf: Vec<Complex64> = row.to_vec();
        fr.process(&mut buf);
        row.iter_mut().zip(buf).for_each(|(x, y)| *x = y);
    }
    for mut col in data.axis_iter_mut(Axis(1)) {
        let mut buf: Vec<Complex64> = col.to_vec();
        fc.process(&mut buf);
        col.iter_mut().zip(buf).for_each(|(x, y)| *x = y);
    }
}

/// `mu(. - t) f` on the block `M^t`.
pub fn exit_wave(mask: &ComplexField, object: &ComplexField, grid: &GridSpec, t: Shift) -> Result<ExitWave> {
    if mask.height() != grid.m || mask.width() != grid.m {
        return Err(PtychoError::Shape(format!(
            "mask is {}x{}, expected {m}x{m}",
            mask.height(),
            mask.width(),
            m = grid.m
        )));
    }
    if grid.boundary == Boundary::DirichletZero {
        block_of(grid, t)?;
    }
    let part = restrict_at(object, grid, t)?;
    let origin = part.origin();
    let field = part.with_origin([0, 0]).hadamard(mask)?.with_origin(origin);
    Ok(ExitWave { shift: t.canonical(grid), field })
}

/// `|Σ_k w(k) exp(-2πi k·ω)|^2` for `ω` on the `(2m-1)^2` grid.
pub fn diffract(w: &ComplexField) -> Result<DiffractionPattern> {
    if !w.is_square() {
        return Err(PtychoError::Shape("exit wave must be square".into()));
    }
    let m = w.width();
    let side = 2 * m - 1;
    let mut buf = Array2::<Complex64>::zeros((side, side));
    buf.slice_mut(ndarray::s![..m, ..m]).assign(w.data());
    fft2(&mut buf, false);
    let mut values = buf.mapv(|z| z.norm_sqr());
    let peak = values.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    values.mapv_inplace(|v| {
        if v < 0.0 {
            worst = worst.min(v);
            0.0
        } else {
            v
        }
    });
    if worst < 0.0 {
        log::debug!("clamped negative intensity {worst:e} (peak {peak:e})");
    }
    Ok(DiffractionPattern { m, values })
}

/// Provenance recorded with a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub gamma: Option<f64>,
    pub mask_seed: Option<u64>,
    pub object_seed: Option<u64>,
    pub phase_density: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtychoDataset {
    pub scheme: ScanScheme,
    pub patterns: Vec<DiffractionPattern>,
    pub meta: DatasetMeta,
}

impl PtychoDataset {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn m(&self) -> usize {
        self.scheme.grid().m
    }
}

/// Diffraction data of every scan position, in scheme order.
pub fn acquire(scheme: &ScanScheme, mask: &ComplexField, object: &ComplexField) -> Result<PtychoDataset> {
    let waves = exit_waves(scheme, mask, object)?;
    let patterns = patterns_of(&waves)?;
    Ok(PtychoDataset { scheme: scheme.clone(), patterns, meta: DatasetMeta::default() })
}

pub fn exit_waves(scheme: &ScanScheme, mask: &ComplexField, object: &ComplexField) -> Result<Vec<ExitWave>> {
    let grid = *scheme.grid();
    if object.height() != grid.n || object.width() != grid.n {
        return Err(PtychoError::Shape(format!("object must be {n}x{n}", n = grid.n)));
    }
    scheme.shifts().par_iter().map(|t| exit_wave(mask, object, &grid, *t)).collect()
}

pub fn patterns_of(waves: &[ExitWave]) -> Result<Vec<DiffractionPattern>> {
    waves.par_iter().map(|w| diffract(&w.field)).collect()
}

/// Dataset built directly from exit waves (one per scheme shift).
pub fn dataset_from_waves(scheme: &ScanScheme, waves: &[ExitWave]) -> Result<PtychoDataset> {
    if waves.len() != scheme.len() {
        return Err(PtychoError::Shape(format!("{} exit waves for {} shifts", waves.len(), scheme.len())));
    }
    Ok(PtychoDataset { scheme: scheme.clone(), patterns: patterns_of(waves)?, meta: DatasetMeta::default() })
}

/// Largest relative distance `|d1 - d2| / max(|d1|, |d2|)` over shifts
/// (two zero patterns are at distance 0).
pub fn data_distance(d1: &PtychoDataset, d2: &PtychoDataset) -> Result<f64> {
    if d1.patterns.len() != d2.patterns.len() {
        return Err(PtychoError::Shape(format!(
            "datasets have {} and {} patterns",
            d1.patterns.len(),
            d2.patterns.len()
        )));
    }
    let mut worst = 0.0f64;
    for (p, q) in d1.patterns.iter().zip(&d2.patterns) {
        if p.values.dim() != q.values.dim() {
            return Err(PtychoError::Shape("pattern sizes differ".into()));
        }
        let diff = p.values.iter().zip(q.values.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = p.norm().max(q.norm());
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub scheme: SchemeFile,
    pub pattern_count: usize,
    pub pattern_side: usize,
    pub meta: DatasetMeta,
}

pub fn pattern_file_name(k: usize) -> String {
    format!("patt_{k:04}.f64")
}

/// Write `manifest.json`, `scheme.json`, `mask.cf64`, `object.cf64` and
/// `patterns/` into `dir`.
pub fn write_dataset(dir: &Path, data: &PtychoDataset, mask: &ComplexField, object: &ComplexField) -> Result<()> {
    fs::create_dir_all(dir.join("patterns"))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scheme: data.scheme.to_file(),
        pattern_count: data.len(),
        pattern_side: 2 * data.m() - 1,
        meta: data.meta.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    data.scheme.write_json(&dir.join("scheme.json"))?;
    write_cf64(&dir.join("mask.cf64"), mask, "mask")?;
    write_cf64(&dir.join("object.cf64"), object, "object")?;
    for (k, p) in data.patterns.iter().enumerate() {
        let mut bytes = Vec::with_capacity(p.values.len() * 8);
        for v in p.values.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(dir.join("patterns").join(pattern_file_name(k)), bytes)?;
    }
    Ok(())
}

pub struct StoredDataset {
    pub data: PtychoDataset,
    pub mask: ComplexField,
    pub object: ComplexField,
    pub manifest: Manifest,
}

pub fn read_dataset(dir: &Path) -> Result<StoredDataset> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(PtychoError::Format(format!("unsupported format version {}", manifest.format_version)));
    }
    let scheme = ScanScheme::from_file(manifest.scheme.clone())?;
    let side = manifest.pattern_side;
    if side != 2 * scheme.grid().m - 1 {
        return Err(PtychoError::Format("pattern side does not match m".into()));
    }
    let mut patterns = Vec::with_capacity(manifest.pattern_count);
    for k in 0..manifest.pattern_count {
        let bytes = fs::read(dir.join("patterns").join(pattern_file_name(k)))?;
        if bytes.len() != side * side * 8 {
            return Err(PtychoError::Format(format!("pattern {k} has {} bytes", bytes.len())));
        }
        let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let values = Array2::from_shape_vec((side, side), vals).map_err(|e| PtychoError::Format(e.to_string()))?;
        patterns.push(DiffractionPattern { m: scheme.grid().m, values });
    }
    if patterns.len() != scheme.len() {
        return Err(PtychoError::Format("pattern count differs from shift count".into()));
    }
    let (mask, _) = read_cf64(&dir.join("mask.cf64"))?;
    let (object, _) = read_cf64(&dir.join("object.cf64"))?;
    let data = PtychoDataset { scheme, patterns, meta: manifest.meta.clone() };
    Ok(StoredDataset { data, mask, object, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_object, random_phase_mask, MaskSpec};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_pixel_flat_spectrum() {
        let mut w = ComplexField::zeros(4, 4);
        w.data_mut()[[2, 1]] = Complex64::from_polar(1.0, 0.7);
        let p = diffract(&w).unwrap();
        assert_eq!(p.values.dim(), (7, 7));
        assert!(p.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_pixel_column() {
        let mut w = ComplexField::zeros(2, 2);
        w.data_mut()[[0, 0]] = c(1.0, 0.0);
        w.data_mut()[[1, 0]] = c(1.0, 0.0);
        let p = diffract(&w).unwrap();
        for j1 in 0..3 {
            let expect = 2.0 + 2.0 * (2.0 * PI * j1 as f64 / 3.0).cos();
            for j2 in 0..3 {
                assert!((p.values[[j1, j2]] - expect).abs() < 1e-12);
            }
        }
        assert!((p.values[[0, 0]] - 4.0).abs() < 1e-12);
        assert!((p.values[[1, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_mask_gives_restriction() {
        let g = GridSpec::torus(8, 3).unwrap();
        let obj = random_object(8, 1);
        let ones = ComplexField::from_fn(3, 3, |_, _| c(1.0, 0.0));
        let w = exit_wave(&ones, &obj, &g, Shift::new(6, 2)).unwrap();
        assert_eq!(w.field.data(), restrict_at(&obj, &g, Shift::new(6, 2)).unwrap().data());
    }

    #[test]
    fn delta_object_single_entry() {
        let g = GridSpec::dirichlet(8, 4).unwrap();
        let mask = random_phase_mask(&MaskSpec::unimodular(4, 1.0, 9)).unwrap();
        let mut obj = ComplexField::zeros(8, 8);
        obj.data_mut()[[3, 5]] = c(2.0, -1.0);
        let w = exit_wave(&mask, &obj, &g, Shift::new(2, 3)).unwrap();
        let nz: Vec<_> = w.field.local_support(0.0);
        assert_eq!(nz, vec![[1, 2]]);
        assert_eq!(w.field.get(1, 2), mask.get(1, 2) * c(2.0, -1.0));
    }

    #[test]
    fn dirichlet_out_of_domain() {
        let g = GridSpec::dirichlet(4, 2).unwrap();
        let s = ScanScheme::new(g, vec![Shift::ZERO, Shift::new(3, 0)]).unwrap();
        let mask = ComplexField::zeros(2, 2);
        let obj = ComplexField::zeros(4, 4);
        assert!(matches!(acquire(&s, &mask, &obj), Err(PtychoError::OutOfDomain { .. })));
    }

    #[test]
    fn zero_object_zero_data() {
        let g = GridSpec::torus(8, 4).unwrap();
        let s = ScanScheme::raster(g, 2).unwrap();
        let mask = random_phase_mask(&MaskSpec::unimodular(4, 1.0, 2)).unwrap();
        let d = acquire(&s, &mask, &ComplexField::zeros(8, 8)).unwrap();
        assert_eq!(d.len(), 16);
        assert!(d.patterns.iter().all(|p| p.values.iter().all(|&v| v == 0.0)));
        assert_eq!(data_distance(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn doubled_data_distance() {
        let g = GridSpec::torus(8, 4).unwrap();
        let s = ScanScheme::raster(g, 4).unwrap();
        let mask = random_phase_mask(&MaskSpec::unimodular(4, 1.0, 2)).unwrap();
        let d = acquire(&s, &mask, &random_object(8, 3)).unwrap();
        let mut d2 = d.clone();
        for p in &mut d2.patterns {
            p.values.mapv_inplace(|v| 2.0 * v);
        }
        // |d - 2d| / |2d| = 1/2
        assert!((data_distance(&d, &d2).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::torus(8, 4).unwrap();
        let s = ScanScheme::raster(g, 4).unwrap();
        let mask = random_phase_mask(&MaskSpec::unimodular(4, 1.0, 2)).unwrap();
        let obj = random_object(8, 3);
        let mut d = acquire(&s, &mask, &obj).unwrap();
        d.meta.gamma = Some(1.0);
        write_dataset(dir.path(), &d, &mask, &obj).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.data, d);
        assert_eq!(back.mask, mask);
        assert_eq!(back.object, obj);
        assert!(dir.path().join("patterns/patt_0003.f64").exists());
    }
}
