//! Deterministic random masks and objects.
//!
//! Every pixel draws from its own ChaCha stream keyed by the seed and the
//! pixel's linear index, so the values do not depend on evaluation order or
//! thread count.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PtychoError, Result};
use crate::field::ComplexField;

const TAG_MASK: u64 = 0x6d61_736b_0000_0001;
const TAG_OBJECT: u64 = 0x6f62_6a65_0000_0002;
const TAG_AUX: u64 = 0x6175_7869_0000_0003;

/// Amplitude profile of a mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Amplitude {
    Unimodular,
    /// Row-major m x m strictly positive amplitudes.
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub m: usize,
    pub gamma: f64,
    pub amplitude: Amplitude,
    pub seed: u64,
}

impl MaskSpec {
    pub fn unimodular(m: usize, gamma: f64, seed: u64) -> Self {
        Self { m, gamma, amplitude: Amplitude::Unimodular, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(PtychoError::InvalidParameter("mask side must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(PtychoError::InvalidParameter(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if let Amplitude::Given(a) = &self.amplitude {
            if a.len() != self.m * self.m {
                return Err(PtychoError::Shape(format!(
                    "amplitude array has {} entries, expected {}",
                    a.len(),
                    self.m * self.m
                )));
            }
            if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(PtychoError::InvalidParameter(
                    "mask amplitudes must be strictly positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Independent generator for one pixel (or any counter) of a seeded family.
pub fn counter_rng(seed: u64, tag: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.rotate_left(17));
    rng.set_stream(counter);
    rng
}

/// Uniform draw in [0, 1) with 53 random bits.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Map u in [0, 1) onto (-gamma*pi, gamma*pi].
pub fn phase_from_unit(u: f64, gamma: f64) -> f64 {
    gamma * PI * (1.0 - 2.0 * u)
}

pub fn random_phase_mask(spec: &MaskSpec) -> Result<ComplexField> {
    spec.validate()?;
    let m = spec.m;
    let values: Vec<Complex64> = (0..m * m)
        .into_par_iter()
        .map(|idx| {
            let mut rng = counter_rng(spec.seed, TAG_MASK, idx as u64);
            let theta = phase_from_unit(unit(&mut rng), spec.gamma);
            let amp = match &spec.amplitude {
                Amplitude::Unimodular => 1.0,
                Amplitude::Given(a) => a[idx],
            };
            Complex64::from_polar(amp, theta)
        })
        .collect();
    ComplexField::from_vec(m, m, values, [0, 0])
}

/// Nonvanishing random object: amplitudes in [0.5, 1.5), phases uniform.
pub fn random_object(n: usize, seed: u64) -> ComplexField {
    let values: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let mut rng = counter_rng(seed, TAG_OBJECT, idx as u64);
            let amp = 0.5 + unit(&mut rng);
            let theta = phase_from_unit(unit(&mut rng), 1.0);
            Complex64::from_polar(amp, theta)
        })
        .collect();
    let data = Array2::from_shape_vec((n, n), values).expect("n*n values");
    ComplexField::new(data, [0, 0]).expect("finite values")
}

/// Seeded generator for auxiliary draws (test parameters, noise).
pub fn aux_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    counter_rng(seed, TAG_AUX, stream)
}

/// Standard complex Gaussian noise field (unit variance per component).
pub fn gaussian_field(height: usize, width: usize, seed: u64, stream: u64) -> ComplexField {
    let mut rng = aux_rng(seed, stream);
    let mut gauss = || {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        Complex64::from_polar(r, 2.0 * PI * u2)
    };
    ComplexField::from_fn(height, width, |_, _| gauss())
}
