use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum PtychoError {
    #[error("shift {shift:?} places the block outside the {n}x{n} object domain")]
    OutOfDomain { shift: [i64; 2], n: usize },

    #[error("empty pixel set")]
    EmptySet,

    #[error("pixel set wraps all the way around the torus along axis {axis}")]
    WrapsAround { axis: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("mask vanishes at pixel {pixel:?}")]
    ZeroMask { pixel: [usize; 2] },

    #[error("masked block {index} is zero; block phase undefined")]
    ZeroBlock { index: usize },

    #[error("triplet {triplet:?} violates the reduction identity: p1*s1 - p2*s2 = {got:?}, expected {expected:?}")]
    TripletIdentity {
        triplet: [usize; 3],
        got: [i64; 2],
        expected: [i64; 2],
    },

    #[error("certificate failed re-verification: {0}")]
    Certificate(String),

    #[error("integer overflow in lattice arithmetic")]
    Overflow,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PtychoError>;
