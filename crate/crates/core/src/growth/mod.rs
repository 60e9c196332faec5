//! Densities, growth constants, high-density cube selection and the
//! nested iteration that builds a positive-mass, dimension-≤2 witness set
//! whenever a measure fails polynomial growth.

mod iteration;
mod selection;
mod witness;

pub use iteration::{
    cover_dimension_estimate, iterate, DimensionRow, DimensionTable, DimensionVerdict,
    IterationState, Level, StopReason,
};
pub use selection::{hd_select, hd_tube_check, tube_membership, HDSelection, TubeReport};
pub use witness::{
    growth_witness, GrowthCertificate, WitnessOptions, WitnessOutcome, WitnessReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::{self, HPoint};
use crate::lattice::CubeId;
use crate::measure::AtomicMeasure;

/// Constants of the high-density selection: scale gap `A`, density threshold
/// `M`, mass-loss exponent `s` and iteration depth cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    #[serde(rename = "A")]
    pub scale_gap: f64,
    #[serde(rename = "M")]
    pub threshold: f64,
    pub s: f64,
    pub j_max: usize,
}

impl GrowthParams {
    pub fn new(scale_gap: f64, threshold: f64, s: f64, j_max: usize) -> Result<Self> {
        let p = Self {
            scale_gap,
            threshold,
            s,
            j_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_gap > 1.0) || !self.scale_gap.is_finite() {
            return Err(Error::invalid(format!(
                "A must exceed 1, got {}",
                self.scale_gap
            )));
        }
        if !(self.threshold > 100.0) || !self.threshold.is_finite() {
            return Err(Error::invalid(format!(
                "M must exceed 100, got {}",
                self.threshold
            )));
        }
        if !(self.s > 0.0 && self.s < 0.5) {
            return Err(Error::invalid(format!(
                "s must lie in (0, 1/2), got {}",
                self.s
            )));
        }
        Ok(())
    }

    /// `A = 2`, `M = 128`, `s = min(0.1, (D − 3) / (2A²))`, three levels.
    pub fn experimental(n: usize) -> Self {
        let scale_gap = 2.0;
        let d = hgroup::hom_dim(n);
        Self {
            scale_gap,
            threshold: 128.0,
            s: f64::min(0.1, (d - 3.0) / (2.0 * scale_gap * scale_gap)),
            j_max: 3,
        }
    }

    /// Whether `A` is below the `5D` the existence argument needs.
    pub fn is_experimental(&self, n: usize) -> bool {
        self.scale_gap < 5.0 * hgroup::hom_dim(n)
    }
}

/// `ℓ(Q)^{D−1}` for a cube of ℍⁿ.
pub(crate) fn density_scale(q: &CubeId) -> f64 {
    q.sidelength().powi(2 * q.n() as i32 + 1)
}

/// `Θ(Q) = μ(Q) / ℓ(Q)^{D−1}`.
pub fn density(mu: &AtomicMeasure, q: &CubeId) -> f64 {
    mu.mass_in_cube(q) / density_scale(q)
}

/// `N = ⌊A^{−2} log₂ Θ⌋`.
pub fn select_n(theta: f64, scale_gap: f64) -> Result<u32> {
    if !(theta > 1.0) {
        return Err(Error::invalid(format!(
            "density must exceed 1 to pick a scale gap, got {theta}"
        )));
    }
    if !(scale_gap > 1.0) {
        return Err(Error::invalid(format!("A must exceed 1, got {scale_gap}")));
    }
    Ok((theta.log2() / (scale_gap * scale_gap)).floor() as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstant {
    pub value: f64,
    pub center: HPoint,
    pub radius: f64,
}

/// `sup μ(B(x, r)) / r^{2n+1}` over the grid; the first maximiser in
/// `(center, radius)` order wins ties.
pub fn growth_constant(
    mu: &AtomicMeasure,
    centers: &[HPoint],
    radii: &[f64],
) -> Result<GrowthConstant> {
    if centers.is_empty() || radii.is_empty() {
        return Err(Error::invalid(
            "growth constant needs nonempty center and radius grids",
        ));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::invalid(format!("radii must be positive, got {r}")));
    }
    let exponent = 2 * mu.n() as i32 + 1;
    let per_center: Vec<(f64, usize)> = centers
        .par_iter()
        .map(|c| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (ri, &r) in radii.iter().enumerate() {
                let v = mu.mass_in_ball(c, r) / r.powi(exponent);
                if v > best.0 {
                    best = (v, ri);
                }
            }
            best
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (ci, &(v, ri)) in per_center.iter().enumerate() {
        if v > best.0 {
            best = (v, ci, ri);
        }
    }
    Ok(GrowthConstant {
        value: best.0,
        center: centers[best.1].clone(),
        radius: radii[best.2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::cube_at;
    use crate::measure::{axis_segment_measure, uniform_on_cube};

    fn unit(n: usize) -> CubeId {
        CubeId {
            k: 0,
            a: vec![0; 2 * n],
            b: 0,
        }
    }

    #[test]
    fn params_validation_and_defaults() {
        assert!(GrowthParams::new(1.0, 128.0, 0.1, 3).is_err());
        assert!(GrowthParams::new(2.0, 100.0, 0.1, 3).is_err());
        assert!(GrowthParams::new(2.0, 128.0, 0.5, 3).is_err());
        let p = GrowthParams::experimental(1);
        assert_eq!(
            (p.scale_gap, p.threshold, p.s, p.j_max),
            (2.0, 128.0, 0.1, 3)
        );
        assert!(p.is_experimental(1));
        assert!(!GrowthParams::new(20.0, 128.0, 0.1, 3)
            .unwrap()
            .is_experimental(1));
    }

    #[test]
    fn density_examples() {
        let q = unit(1);
        let mu = uniform_on_cube(&q, 256, 1.0, 1).unwrap();
        assert_eq!(density(&mu, &q), 1.0);
        // all mass in a child: density grows by 2^{D−1}
        let child = CubeId {
            k: 1,
            a: vec![0, 0],
            b: 0,
        };
        let small = uniform_on_cube(&child, 64, 1.0, 1).unwrap();
        assert_eq!(density(&small, &child), 8.0 * density(&small, &q));
        let axis = axis_segment_measure(1, -1.0, 1.0, 1024).unwrap();
        assert_eq!(density(&axis, &q), axis.mass_in_cube(&q));
        assert_eq!(density(&axis, &q), 1.0);
        let scaled = axis.scaled(3.0).unwrap();
        assert_eq!(density(&scaled, &q), 3.0 * density(&axis, &q));
    }

    #[test]
    fn select_n_examples() {
        let a: f64 = 2.0;
        assert_eq!(select_n((a * a * 2.0).exp2(), a).unwrap(), 2);
        assert_eq!(select_n((a * a * 2.9).exp2(), a).unwrap(), 2);
        assert_eq!(select_n(16.0, a).unwrap(), 1);
        assert!(select_n(1.0, a).is_err());
        assert!(select_n(0.5, a).is_err());
    }

    #[test]
    fn growth_constant_examples() {
        let c = HPoint::h1(0.2, 0.1, 0.4).unwrap();
        let mu = AtomicMeasure::from_atoms(1, vec![c.clone()], vec![1.0]).unwrap();
        let g = growth_constant(&mu, std::slice::from_ref(&c), &[1.0]).unwrap();
        assert_eq!(g.value, 1.0);
        assert!(growth_constant(&mu, &[], &[1.0]).is_err());

        let axis = axis_segment_measure(1, -1.0, 1.0, 1 << 16).unwrap();
        let origin = HPoint::identity(1);
        let (xs, ys): (Vec<f64>, Vec<f64>) = (1..=6)
            .map(|m| {
                let r = (-(m as f64)).exp2();
                let v = growth_constant(&axis, std::slice::from_ref(&origin), &[r])
                    .unwrap()
                    .value;
                (r.ln(), v.ln())
            })
            .unzip();
        let slope = fit_slope(&xs, &ys);
        assert!((slope + 1.0).abs() <= 0.1, "slope {slope}");

        let cloud = uniform_on_cube(&cube_at(0, &origin), 200, 1.0, 2).unwrap();
        let centers = vec![HPoint::h1(0.5, 0.5, 0.5).unwrap()];
        let mut prev = f64::INFINITY;
        for r in [4.0, 8.0, 16.0] {
            let g = growth_constant(&cloud, &centers, &[r]).unwrap().value;
            assert!((g - 1.0 / (r * r * r)).abs() < 1e-15);
            assert!(g < prev);
            prev = g;
        }
    }

    pub(crate) fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        num / den
    }
}
