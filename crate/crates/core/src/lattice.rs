//! Anisotropic dyadic boxes on ℍⁿ.
//!
//! A generation-`k` cube is the half-open box
//! `∏ [a_i 2^{−k}, (a_i + 1) 2^{−k}) × [b 4^{−k}, (b + 1) 4^{−k})`.
//! Horizontal sides halve and the vertical side quarters from one generation
//! to the next, so every cube has exactly `2^D` children and sidelength
//! `ℓ(Q) = 2^{−k}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::{self, HPoint};

/// A dyadic cube, ordered lexicographically by `(k, a, b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(i32, Vec<i64>, i64)", into = "(i32, Vec<i64>, i64)")]
pub struct CubeId {
    pub k: i32,
    pub a: Vec<i64>,
    pub b: i64,
}

impl From<(i32, Vec<i64>, i64)> for CubeId {
    fn from((k, a, b): (i32, Vec<i64>, i64)) -> Self {
        CubeId { k, a, b }
    }
}

impl From<CubeId> for (i32, Vec<i64>, i64) {
    fn from(c: CubeId) -> Self {
        (c.k, c.a, c.b)
    }
}

#[inline]
fn side(k: i32) -> f64 {
    (-(k as f64)).exp2()
}

#[inline]
fn t_side(k: i32) -> f64 {
    (-(2.0 * k as f64)).exp2()
}

/// Generation-`k` cube containing `p`.
pub fn cube_at(k: i32, p: &HPoint) -> CubeId {
    cube_at_raw(k, p.z(), p.t())
}

#[inline]
pub(crate) fn cube_at_raw(k: i32, z: &[f64], t: f64) -> CubeId {
    let zs = (k as f64).exp2();
    let ts = (2.0 * k as f64).exp2();
    CubeId {
        k,
        a: z.iter().map(|c| (c * zs).floor() as i64).collect(),
        b: (t * ts).floor() as i64,
    }
}

impl CubeId {
    pub fn n(&self) -> usize {
        self.a.len() / 2
    }

    pub fn sidelength(&self) -> f64 {
        side(self.k)
    }

    pub fn z_bounds(&self, i: usize) -> (f64, f64) {
        let s = side(self.k);
        (self.a[i] as f64 * s, (self.a[i] + 1) as f64 * s)
    }

    pub fn t_bounds(&self) -> (f64, f64) {
        let s = t_side(self.k);
        (self.b as f64 * s, (self.b + 1) as f64 * s)
    }

    /// Euclidean centre of the box.
    pub fn center(&self) -> HPoint {
        let z = (0..self.a.len())
            .map(|i| {
                let (lo, hi) = self.z_bounds(i);
                0.5 * (lo + hi)
            })
            .collect();
        let (lo, hi) = self.t_bounds();
        HPoint::from_parts_unchecked(z, 0.5 * (lo + hi))
    }

    pub fn contains(&self, p: &HPoint) -> bool {
        self.contains_raw(p.z(), p.t())
    }

    pub(crate) fn contains_raw(&self, z: &[f64], t: f64) -> bool {
        z.len() == self.a.len() && cube_at_raw(self.k, z, t) == *self
    }

    pub fn parent(&self) -> CubeId {
        CubeId {
            k: self.k - 1,
            a: self.a.iter().map(|c| c.div_euclid(2)).collect(),
            b: self.b.div_euclid(4),
        }
    }

    /// Ancestor at generation `k` (`k ≤ self.k`).
    pub fn ancestor(&self, k: i32) -> CubeId {
        debug_assert!(k <= self.k);
        let j = (self.k - k) as u32;
        CubeId {
            k,
            a: self.a.iter().map(|c| c.div_euclid(1 << j)).collect(),
            b: self.b.div_euclid(1 << (2 * j)),
        }
    }

    /// Whether `self ⊆ other` as point sets.
    pub fn is_within(&self, other: &CubeId) -> bool {
        self.k >= other.k && self.a.len() == other.a.len() && self.ancestor(other.k) == *other
    }

    pub fn children(&self) -> Vec<CubeId> {
        self.descendants(1)
    }

    /// All `2^{jD}` descendants at depth `j`, in lexicographic order.
    pub fn descendants(&self, depth: u32) -> Vec<CubeId> {
        let dim = self.a.len();
        let per_axis = 1i64 << depth;
        let t_count = 1i64 << (2 * depth);
        let z_count = (per_axis as usize).pow(dim as u32);
        let mut out = Vec::with_capacity(z_count * t_count as usize);
        let mut offsets = vec![0i64; dim];
        for _ in 0..z_count {
            let a: Vec<i64> = self
                .a
                .iter()
                .zip(&offsets)
                .map(|(base, o)| base * per_axis + o)
                .collect();
            for tb in 0..t_count {
                out.push(CubeId {
                    k: self.k + depth as i32,
                    a: a.clone(),
                    b: self.b * t_count + tb,
                });
            }
            // odometer, last coordinate fastest
            for o in offsets.iter_mut().rev() {
                *o += 1;
                if *o < per_axis {
                    break;
                }
                *o = 0;
            }
        }
        out
    }

    /// Corners of the closed box.
    pub fn corners(&self) -> Vec<HPoint> {
        let dim = self.a.len();
        let (t_lo, t_hi) = self.t_bounds();
        let mut out = Vec::with_capacity(1 << (dim + 1));
        for mask in 0u64..(1 << (dim + 1)) {
            let z = (0..dim)
                .map(|i| {
                    let (lo, hi) = self.z_bounds(i);
                    if mask >> i & 1 == 1 {
                        hi
                    } else {
                        lo
                    }
                })
                .collect();
            let t = if mask >> dim & 1 == 1 { t_hi } else { t_lo };
            out.push(HPoint::from_parts_unchecked(z, t));
        }
        out
    }
}

/// Sampled sandwich constants of a cube: `U(p_Q, λℓ) ⊂ Q ⊂ B(p_Q, Λℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub lambda_eff: f64,
    #[serde(rename = "Lambda_eff")]
    pub big_lambda_eff: f64,
    pub window_radius: f64,
}

/// Measures the inner and outer ball radii of `q` around its centre, in units
/// of `ℓ(Q)`.
///
/// The outer radius is exact: `‖p_Q⁻¹ x‖⁴` is convex in `x`, so its maximum
/// over the box sits at a corner. The inner radius is the minimum distance
/// from the centre to `samples` boundary points (face centres included).
pub fn sandwich_measure(
    q: &CubeId,
    window_radius: f64,
    samples: usize,
    seed: u64,
) -> Result<SandwichReport> {
    let corners = q.corners();
    if corners.iter().any(|c| hgroup::knorm(c) > window_radius) {
        return Err(Error::OutsideWindow {
            k: q.k,
            window_radius,
        });
    }
    let center = q.center();
    let ell = q.sidelength();
    let d = |p: &HPoint| hgroup::raw_dist(p.z(), p.t(), center.z(), center.t());

    let big_lambda = corners.iter().map(d).fold(0.0, f64::max) / ell;

    let dim = q.a.len();
    let faces = 2 * (dim + 1);
    let (t_lo, t_hi) = q.t_bounds();
    let face_point = |face: usize, u: &[f64]| {
        let axis = face / 2;
        let upper = face % 2 == 1;
        let z: Vec<f64> = u[..dim]
            .iter()
            .enumerate()
            .map(|(i, &ui)| {
                let (lo, hi) = q.z_bounds(i);
                match (i == axis, upper) {
                    (true, true) => hi,
                    (true, false) => lo,
                    _ => lo + ui * (hi - lo),
                }
            })
            .collect();
        let t = if axis == dim {
            if upper {
                t_hi
            } else {
                t_lo
            }
        } else {
            t_lo + u[dim] * (t_hi - t_lo)
        };
        HPoint::from_parts_unchecked(z, t)
    };

    let half = vec![0.5; dim + 1];
    let mut inner = (0..faces)
        .map(|f| d(&face_point(f, &half)))
        .fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; dim + 1];
    for _ in 0..samples {
        let face = rng.gen_range(0..faces);
        u.iter_mut().for_each(|c| *c = rng.gen::<f64>());
        inner = inner.min(d(&face_point(face, &u)));
    }

    Ok(SandwichReport {
        lambda_eff: inner / ell,
        big_lambda_eff: big_lambda,
        window_radius,
    })
}

/// Vertical tube `T_κ = {(z, t) ∈ Q₀ : |z − axis| ≤ κ 2^{−N} ℓ(Q₀)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub q0: CubeId,
    pub depth: u32,
    pub kappa: f64,
    pub axis: Vec<f64>,
}

impl Tube {
    pub fn new(q0: CubeId, depth: u32, kappa: f64, axis: Vec<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("tube depth N must be at least 1"));
        }
        if !(kappa > 0.0) {
            return Err(Error::invalid(format!(
                "tube width kappa must be positive, got {kappa}"
            )));
        }
        if axis.len() != q0.a.len() {
            return Err(Error::DimensionMismatch {
                expected: q0.n(),
                found: axis.len() / 2,
            });
        }
        Ok(Self {
            q0,
            depth,
            kappa,
            axis,
        })
    }

    pub fn radius(&self) -> f64 {
        self.kappa * side(self.depth as i32) * self.q0.sidelength()
    }

    pub fn contains(&self, p: &HPoint) -> bool {
        if !self.q0.contains(p) {
            return false;
        }
        let d2: f64 = p
            .z()
            .iter()
            .zip(&self.axis)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d2.sqrt() <= self.radius()
    }

    fn z_box_distance(&self, cube: &CubeId, farthest: bool) -> f64 {
        (0..cube.a.len())
            .map(|i| {
                let (lo, hi) = cube.z_bounds(i);
                let c = self.axis[i];
                let gap = if farthest {
                    (c - lo).abs().max((hi - c).abs())
                } else if c < lo {
                    lo - c
                } else if c > hi {
                    c - hi
                } else {
                    0.0
                };
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Whether the closure of `cube` meets the (closed) tube. `cube` is assumed
    /// to lie in `Q₀`.
    pub fn closure_meets(&self, cube: &CubeId) -> bool {
        self.z_box_distance(cube, false) <= self.radius()
    }

    /// Whether the closed box `cube` lies inside the tube cylinder.
    pub fn contains_cube(&self, cube: &CubeId) -> bool {
        self.z_box_distance(cube, true) <= self.radius()
    }

    fn z_candidates(&self) -> Vec<std::ops::Range<i64>> {
        let per_axis = 1i64 << self.depth;
        let s = side(self.q0.k + self.depth as i32);
        let r = self.radius();
        self.q0
            .a
            .iter()
            .zip(&self.axis)
            .map(|(&base, &c)| {
                let lo = base * per_axis;
                let hi = lo + per_axis;
                let from = (((c - r) / s).floor() as i64 - 1).clamp(lo, hi);
                let to = (((c + r) / s).floor() as i64 + 2).clamp(lo, hi);
                from..to
            })
            .collect()
    }

    fn for_each_z_cell(&self, mut visit: impl FnMut(&CubeId)) {
        let ranges = self.z_candidates();
        if ranges.iter().any(|r| r.is_empty()) {
            return;
        }
        let k = self.q0.k + self.depth as i32;
        let mut a: Vec<i64> = ranges.iter().map(|r| r.start).collect();
        loop {
            let probe = CubeId {
                k,
                a: a.clone(),
                b: self.q0.b << (2 * self.depth),
            };
            if self.closure_meets(&probe) {
                visit(&probe);
            }
            let mut i = a.len();
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                a[i] += 1;
                if a[i] < ranges[i].end {
                    break;
                }
                a[i] = ranges[i].start;
            }
        }
    }

    /// Number of generation-`(k₀ + N)` descendants of `Q₀` whose closure meets the tube.
    pub fn count_cubes(&self) -> usize {
        let mut columns = 0usize;
        self.for_each_z_cell(|_| columns += 1);
        columns << (2 * self.depth)
    }

    /// The generation-`(k₀ + N)` descendants of `Q₀` whose closure meets the tube.
    pub fn cubes(&self) -> Vec<CubeId> {
        let t_count = 1i64 << (2 * self.depth);
        let mut out = Vec::new();
        self.for_each_z_cell(|probe| {
            for tb in 0..t_count {
                out.push(CubeId {
                    k: probe.k,
                    a: probe.a.clone(),
                    b: probe.b + tb,
                });
            }
        });
        out.sort();
        out
    }
}

/// Descendants of `q0` at depth `depth` meeting the tube around the vertical
/// axis `z = 0`.
pub fn cubes_in_tube(q0: &CubeId, depth: u32, kappa: f64) -> Result<Vec<CubeId>> {
    let axis = vec![0.0; q0.a.len()];
    Ok(Tube::new(q0.clone(), depth, kappa, axis)?.cubes())
}
