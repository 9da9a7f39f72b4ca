//! Blind ptychography: forward simulation, scan-scheme certification and
//! checks of the inherent ambiguities of the blind problem.
//!
//! The object `f` lives on an `n x n` grid, the mask `mu` on an `m x m`
//! block. Each scan position `t` produces the squared Fourier magnitude of
//! the masked block `mu(. - t) f` on the `(2m-1)^2` oversampled grid.

pub mod ambiguity;
pub mod analysis;
pub mod constraints;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod rng;
pub mod scheme;

pub use error::{PtychoError, Result};
pub use field::ComplexField;
pub use grid::{Boundary, GridSpec, PixelSet, Point, Rect, Shift};
