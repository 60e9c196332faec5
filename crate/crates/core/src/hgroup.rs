//! Heisenberg group arithmetic in exponential coordinates.
//!
//! A point of ℍⁿ is `(z, t)` with `z = (x_1..x_n, y_1..y_n)`. The group law is
//!
//! ```text
//! (z, t) · (z', t') = (z + z', t + t' + ½ Σ (x_i y'_i − y_i x'_i))
//! ```
//!
//! with identity `(0, 0)` and inverse `(−z, −t)`. Distances use the Korányi
//! gauge `‖(z, t)‖ = (|z|⁴ + 16 t²)^{1/4}` and `d(p, q) = ‖q⁻¹ · p‖`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension bookkeeping for ℍⁿ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupParams {
    n: usize,
}

impl GroupParams {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Homogeneous (Hausdorff) dimension `D = 2n + 2`.
    pub fn homogeneous_dimension(&self) -> usize {
        2 * self.n + 2
    }
}

/// Homogeneous dimension `2n + 2` as a float, for exponents.
pub(crate) fn hom_dim(n: usize) -> f64 {
    (2 * n + 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    z: Vec<f64>,
    t: f64,
}

impl HPoint {
    /// Builds a point from its horizontal part `z = (x_1..x_n, y_1..y_n)` and
    /// vertical coordinate `t`.
    pub fn new(z: Vec<f64>, t: f64) -> Result<Self> {
        if z.is_empty() || !z.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "horizontal part must have even positive length, got {}",
                z.len()
            )));
        }
        if !t.is_finite() || z.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { z, t })
    }

    /// Point of ℍ¹.
    pub fn h1(x: f64, y: f64, t: f64) -> Result<Self> {
        Self::new(vec![x, y], t)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            z: vec![0.0; 2 * n],
            t: 0.0,
        }
    }

    pub(crate) fn from_parts_unchecked(z: Vec<f64>, t: f64) -> Self {
        Self { z, t }
    }

    pub fn n(&self) -> usize {
        self.z.len() / 2
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.z[..self.n()]
    }

    pub fn y(&self) -> &[f64] {
        &self.z[self.n()..]
    }

    pub fn is_identity(&self) -> bool {
        self.t == 0.0 && self.z.iter().all(|&c| c == 0.0)
    }

    /// Euclidean norm of the horizontal part.
    pub fn horizontal_norm(&self) -> f64 {
        norm2(&self.z).sqrt()
    }

    fn check_same_n(&self, other: &HPoint) -> Result<()> {
        if self.z.len() != other.z.len() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: other.n(),
            });
        }
        Ok(())
    }
}

pub(crate) fn norm2(z: &[f64]) -> f64 {
    z.iter().map(|c| c * c).sum()
}

/// Symplectic form `Σ (x_i y'_i − y_i x'_i)`.
pub(crate) fn symplectic(z: &[f64], w: &[f64]) -> f64 {
    let n = z.len() / 2;
    let (x, y) = z.split_at(n);
    let (xw, yw) = w.split_at(n);
    let mut acc = 0.0;
    for i in 0..n {
        acc += x[i] * yw[i] - y[i] * xw[i];
    }
    acc
}

/// Korányi gauge from raw coordinates.
#[inline]
pub(crate) fn gauge(z2: f64, t: f64) -> f64 {
    (z2 * z2 + 16.0 * t * t).sqrt().sqrt()
}

/// Writes the horizontal part of `q⁻¹ · p` into `out` and returns its vertical part.
#[inline]
pub(crate) fn relative_position(pz: &[f64], pt: f64, qz: &[f64], qt: f64, out: &mut [f64]) -> f64 {
    for ((o, a), b) in out.iter_mut().zip(pz).zip(qz) {
        *o = a - b;
    }
    pt - qt + 0.5 * symplectic(pz, qz)
}

/// `d(p, q)` from raw coordinates, without allocation.
#[inline]
pub(crate) fn raw_dist(pz: &[f64], pt: f64, qz: &[f64], qt: f64) -> f64 {
    let mut z2 = 0.0;
    for (a, b) in pz.iter().zip(qz) {
        let d = a - b;
        z2 += d * d;
    }
    let t = pt - qt + 0.5 * symplectic(pz, qz);
    gauge(z2, t)
}

pub fn mul(p: &HPoint, q: &HPoint) -> Result<HPoint> {
    p.check_same_n(q)?;
    let z = p.z.iter().zip(&q.z).map(|(a, b)| a + b).collect();
    let t = p.t + q.t + 0.5 * symplectic(&p.z, &q.z);
    Ok(HPoint { z, t })
}

pub fn inv(p: &HPoint) -> HPoint {
    HPoint {
        z: p.z.iter().map(|c| -c).collect(),
        t: -p.t,
    }
}

/// Anisotropic dilation `(z, t) ↦ (λz, λ²t)`.
pub fn dilate(lam: f64, p: &HPoint) -> Result<HPoint> {
    if !(lam > 0.0) || !lam.is_finite() {
        return Err(Error::invalid(format!(
            "dilation factor must be positive, got {lam}"
        )));
    }
    Ok(HPoint {
        z: p.z.iter().map(|c| lam * c).collect(),
        t: lam * lam * p.t,
    })
}

pub fn knorm(p: &HPoint) -> f64 {
    gauge(norm2(&p.z), p.t)
}

/// Korányi distance `‖q⁻¹ · p‖`.
pub fn dist(p: &HPoint, q: &HPoint) -> Result<f64> {
    p.check_same_n(q)?;
    Ok(raw_dist(&p.z, p.t, &q.z, q.t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Samples per independently keyed RNG stream in Monte Carlo routines.
pub(crate) const MC_CHUNK: usize = 1 << 14;

/// Monte Carlo estimate of the Lebesgue volume of the closed Korányi ball `B(center, r)`.
///
/// Samples are drawn uniformly from a Euclidean box containing the ball. The
/// box is centred at `center` with horizontal half-width `r` and vertical
/// half-width `r²/4 + |z_center| r / 2`, which accounts for the shear of left
/// translation. Each chunk of samples uses its own ChaCha stream keyed by
/// `(seed, chunk index)`, so the estimate does not depend on thread count.
pub fn ball_volume_mc(
    center: &HPoint,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    let dim = center.z.len();
    let t_half = r * r / 4.0 + 0.5 * center.horizontal_norm() * r;
    let box_volume = (2.0 * r).powi(dim as i32) * 2.0 * t_half;

    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let mut z = vec![0.0; dim];
            let mut hits = 0u64;
            for _ in 0..count {
                for (zi, ci) in z.iter_mut().zip(&center.z) {
                    *zi = ci + r * (2.0 * rng.gen::<f64>() - 1.0);
                }
                let t = center.t + t_half * (2.0 * rng.gen::<f64>() - 1.0);
                if raw_dist(&z, t, &center.z, center.t) <= r {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    let frac = hits as f64 / samples as f64;
    Ok(VolumeEstimate {
        estimate: box_volume * frac,
        stderr: box_volume * (frac * (1.0 - frac) / samples as f64).sqrt(),
    })
}
