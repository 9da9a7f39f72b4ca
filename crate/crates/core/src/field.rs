//! Complex fields: objects, masks and exit waves, plus the `cf64` file format.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PtychoError, Result};
use crate::grid::{box_hull_rect, Boundary, GridSpec, PixelSet, Point, Shift};

/// A 2-D complex array anchored at `origin` in the object grid.
///
/// `data[[k1, k2]]` is the value at `origin + (k1, k2)`; `height` is the
/// extent along `k1` and `width` the extent along `k2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    data: Array2<Complex64>,
    origin: Point,
}

impl ComplexField {
    pub fn new(data: Array2<Complex64>, origin: Point) -> Result<Self> {
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PtychoError::InvalidParameter(
                "field contains non-finite entries".into(),
            ));
        }
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().to_owned()
        };
        Ok(Self { data, origin })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            data: Array2::zeros((height, width)),
            origin: [0, 0],
        }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(height: usize, width: usize, mut f: F) -> Self {
        Self {
            data: Array2::from_shape_fn((height, width), |(i, j)| f(i, j)),
            origin: [0, 0],
        }
    }

    /// Build from row-major values.
    pub fn from_vec(height: usize, width: usize, values: Vec<Complex64>, origin: Point) -> Result<Self> {
        let data = Array2::from_shape_vec((height, width), values)
            .map_err(|e| PtychoError::Shape(e.to_string()))?;
        Self::new(data, origin)
    }

    pub fn with_origin(mut self, origin: Point) -> Self {
        self.origin = origin;
        self
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn is_square(&self) -> bool {
        self.width() == self.height()
    }

    pub fn get(&self, k1: usize, k2: usize) -> Complex64 {
        self.data[[k1, k2]]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn map<F: FnMut(Complex64) -> Complex64>(&self, f: F) -> Self {
        Self {
            data: self.data.mapv(f),
            origin: self.origin,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|z| z * c)
    }

    /// Componentwise product; shapes must agree. The origin of `self` is kept.
    pub fn hadamard(&self, other: &ComplexField) -> Result<Self> {
        if self.data.dim() != other.data.dim() {
            return Err(PtychoError::Shape(format!(
                "hadamard of {:?} and {:?}",
                self.data.dim(),
                other.data.dim()
            )));
        }
        Ok(Self {
            data: &self.data * &other.data,
            origin: self.origin,
        })
    }

    /// `<self, other> = sum conj(self) * other`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        if self.data.dim() != other.data.dim() {
            return Err(PtychoError::Shape("inner product shapes differ".into()));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Largest componentwise modulus of the difference.
    pub fn max_abs_diff(&self, other: &ComplexField) -> Result<f64> {
        if self.data.dim() != other.data.dim() {
            return Err(PtychoError::Shape("difference of unequal shapes".into()));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Support as a set of grid points (`origin + index`), with entries of
    /// modulus at most `threshold` treated as zero.
    pub fn support(&self, grid: &GridSpec, threshold: f64) -> Result<PixelSet> {
        let o = self.origin;
        let pts = self
            .data
            .indexed_iter()
            .filter(|(_, z)| z.norm() > threshold)
            .map(|((i, j), _)| [o[0] + i as i64, o[1] + j as i64]);
        PixelSet::from_points(*grid, pts)
    }

    /// Support in local (index) coordinates.
    pub fn local_support(&self, threshold: f64) -> Vec<Point> {
        self.data
            .indexed_iter()
            .filter(|(_, z)| z.norm() > threshold)
            .map(|((i, j), _)| [i as i64, j as i64])
            .collect()
    }
}

/// Conjugate inversion inside the block frame:
/// `out[k] = conj(in[(m-1, m-1) - k])`.
///
/// The output occupies the same block as the input so the support box of
/// the twin is congruent to the input's.
pub fn twin(field: &ComplexField) -> Result<ComplexField> {
    if !field.is_square() {
        return Err(PtychoError::Shape(format!(
            "twin needs a square field, got {}x{}",
            field.height(),
            field.width()
        )));
    }
    let m = field.width();
    let src = field.data();
    let data = Array2::from_shape_fn((m, m), |(i, j)| src[[m - 1 - i, m - 1 - j]].conj());
    Ok(ComplexField {
        data,
        origin: field.origin,
    })
}

/// Object values on the m x m block anchored at `t`. Under the torus the
/// block wraps; under dirichlet-zero values outside the domain read as zero.
pub fn restrict_at(object: &ComplexField, grid: &GridSpec, t: Shift) -> Result<ComplexField> {
    if object.height() != grid.n || object.width() != grid.n {
        return Err(PtychoError::Shape(format!(
            "object is {}x{}, grid expects {}x{}",
            object.height(),
            object.width(),
            grid.n,
            grid.n
        )));
    }
    let m = grid.m;
    let n = grid.n as i64;
    let t = t.canonical(grid);
    let src = object.data();
    let data = Array2::from_shape_fn((m, m), |(i, j)| {
        let p = [t.0[0] + i as i64, t.0[1] + j as i64];
        match grid.boundary {
            Boundary::Torus => src[[p[0].rem_euclid(n) as usize, p[1].rem_euclid(n) as usize]],
            Boundary::DirichletZero => {
                if grid.contains(p) {
                    src[[p[0] as usize, p[1] as usize]]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    });
    Ok(ComplexField { data, origin: t.0 })
}

/// Object values on a block given as a pixel set (`f^t` from `M^t`).
pub fn restrict(object: &ComplexField, block: &PixelSet) -> Result<ComplexField> {
    let grid = *block.grid();
    let rect = box_hull_rect(block)?;
    if rect.extent != [grid.m, grid.m] || block.len() != grid.m * grid.m {
        return Err(PtychoError::Shape(format!(
            "pixel set is not an {m}x{m} block",
            m = grid.m
        )));
    }
    restrict_at(object, &grid, Shift(rect.start))
}

/// Reassemble an object from block restrictions (`f = \/ f^t`). Pixels
/// covered by several blocks take the value of the last block written;
/// pixels covered by none are zero.
pub fn reassemble(parts: &[ComplexField], grid: &GridSpec) -> ComplexField {
    let n = grid.n;
    let mut out = ComplexField::zeros(n, n);
    for part in parts {
        let o = part.origin();
        for ((i, j), z) in part.data().indexed_iter() {
            let p = grid.canonical([o[0] + i as i64, o[1] + j as i64]);
            if grid.contains(p) {
                out.data[[p[0] as usize, p[1] as usize]] = *z;
            }
        }
    }
    out
}

/// JSON sidecar describing a `cf64` file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cf64Header {
    pub kind: String,
    pub width: usize,
    pub height: usize,
    pub origin: Point,
    pub dtype: String,
}

pub const CF64_DTYPE: &str = "c128le";

/// Sidecar path for a `cf64` file: `name.cf64` -> `name.cf64.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

pub fn encode_cf64(field: &ComplexField) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.data.len() * 16);
    for z in field.data.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_cf64(header: &Cf64Header, bytes: &[u8]) -> Result<ComplexField> {
    if header.dtype != CF64_DTYPE {
        return Err(PtychoError::Format(format!("unsupported dtype {}", header.dtype)));
    }
    let count = header.width * header.height;
    if bytes.len() != count * 16 {
        return Err(PtychoError::Format(format!(
            "expected {} bytes, found {}",
            count * 16,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    ComplexField::from_vec(header.height, header.width, values, header.origin)
}

/// Write `path` (raw values) and its JSON sidecar.
pub fn write_cf64(path: &Path, field: &ComplexField, kind: &str) -> Result<()> {
    let header = Cf64Header {
        kind: kind.to_string(),
        width: field.width(),
        height: field.height(),
        origin: field.origin(),
        dtype: CF64_DTYPE.to_string(),
    };
    fs::write(path, encode_cf64(field))?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&header)?)?;
    Ok(())
}

pub fn read_cf64(path: &Path) -> Result<(ComplexField, Cf64Header)> {
    let header: Cf64Header = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    Ok((decode_cf64(&header, &bytes)?, header))
}
