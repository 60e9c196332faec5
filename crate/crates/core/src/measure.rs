//! Finitely supported measures on ℍⁿ and generators for the test cases used
//! throughout the crate.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::{self, HPoint};
use crate::lattice::{cube_at_raw, CubeId};

/// A weighted point set. Atoms are kept sorted lexicographically by
/// `(x_1..x_n, y_1..y_n, t)` with duplicate points merged.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    n: usize,
    points: Vec<HPoint>,
    weights: Vec<f64>,
    total_mass: f64,
}

fn cmp_points(p: &HPoint, q: &HPoint) -> std::cmp::Ordering {
    p.z()
        .iter()
        .zip(q.z())
        .map(|(a, b)| a.total_cmp(b))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| p.t().total_cmp(&q.t()))
}

impl AtomicMeasure {
    pub fn from_atoms(n: usize, points: Vec<HPoint>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        if points.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| p.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.n(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!(
                "weights must be positive and finite, got {w}"
            )));
        }

        let mut atoms: Vec<(HPoint, f64)> = points.into_iter().zip(weights).collect();
        atoms.sort_by(|a, b| cmp_points(&a.0, &b.0));
        let mut merged: Vec<(HPoint, f64)> = Vec::with_capacity(atoms.len());
        for (p, w) in atoms {
            match merged.last_mut() {
                Some((q, acc)) if cmp_points(q, &p).is_eq() => *acc += w,
                _ => merged.push((p, w)),
            }
        }
        let (points, weights): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
        let total_mass = weights.iter().sum();
        Ok(Self {
            n,
            points,
            weights,
            total_mass,
        })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::from_atoms(n, Vec::new(), Vec::new())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[HPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&HPoint, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Same support, every weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("scale must be positive, got {c}")));
        }
        let weights: Vec<f64> = self.weights.iter().map(|w| w * c).collect();
        Ok(Self {
            n: self.n,
            points: self.points.clone(),
            total_mass: weights.iter().sum(),
            weights,
        })
    }

    /// Largest Korányi distance between two atoms (0 for fewer than two).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                best = best.max(hgroup::raw_dist(p.z(), p.t(), q.z(), q.t()));
            }
        }
        best
    }

    /// Smallest Korányi distance between two distinct atoms, if any.
    pub fn min_separation(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                let d = hgroup::raw_dist(p.z(), p.t(), q.z(), q.t());
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }

    /// `μ(Q)` for the half-open box `Q`.
    pub fn mass_in_cube(&self, q: &CubeId) -> f64 {
        if q.a.len() != 2 * self.n {
            return 0.0;
        }
        self.atoms()
            .filter(|(p, _)| q.contains_raw(p.z(), p.t()))
            .map(|(_, w)| w)
            .sum()
    }

    /// `μ(B(center, r))` for the closed Korányi ball.
    pub fn mass_in_ball(&self, center: &HPoint, r: f64) -> f64 {
        self.atoms()
            .filter(|(p, _)| hgroup::raw_dist(p.z(), p.t(), center.z(), center.t()) <= r)
            .map(|(_, w)| w)
            .sum()
    }

    /// Mass and atom count of every generation-`k` cube meeting the support,
    /// restricted to atoms inside `within` when given. Per-cube sums run in
    /// atom order.
    pub fn cube_masses(&self, k: i32, within: Option<&CubeId>) -> BTreeMap<CubeId, CubeMass> {
        let mut out: BTreeMap<CubeId, CubeMass> = BTreeMap::new();
        for (p, w) in self.atoms() {
            if let Some(q) = within {
                if !q.contains_raw(p.z(), p.t()) {
                    continue;
                }
            }
            let e = out.entry(cube_at_raw(k, p.z(), p.t())).or_default();
            e.mass += w;
            e.atoms += 1;
        }
        out
    }

    /// Writes the atom file: a `n=<int>` header, then one
    /// `x1,..,xn,y1,..,yn,t,weight` row per atom in sorted order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n={}", self.n)?;
        for (p, weight) in self.atoms() {
            for c in p.z() {
                write!(w, "{c},")?;
            }
            writeln!(w, "{},{}", p.t(), weight)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let io_err = |line: usize, e: std::io::Error| Error::AtomFormat {
            line,
            message: e.to_string(),
        };
        let (_, header) = lines.next().ok_or(Error::AtomFormat {
            line: 1,
            message: "missing header".into(),
        })?;
        let header = header.map_err(|e| io_err(1, e))?;
        let n: usize = header
            .trim()
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::AtomFormat {
                line: 1,
                message: format!("expected `n=<int>`, got `{header}`"),
            })?;
        if n == 0 {
            return Err(Error::AtomFormat {
                line: 1,
                message: "n must be at least 1".into(),
            });
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| io_err(lineno, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::AtomFormat {
                    line: lineno,
                    message: e.to_string(),
                })?;
            if values.len() != 2 * n + 2 {
                return Err(Error::AtomFormat {
                    line: lineno,
                    message: format!("expected {} fields, got {}", 2 * n + 2, values.len()),
                });
            }
            let p = HPoint::new(values[..2 * n].to_vec(), values[2 * n]).map_err(|e| {
                Error::AtomFormat {
                    line: lineno,
                    message: e.to_string(),
                }
            })?;
            points.push(p);
            weights.push(values[2 * n + 1]);
        }
        Self::from_atoms(n, points, weights)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CubeMass {
    pub mass: f64,
    pub atoms: usize,
}

/// `count` i.i.d. Lebesgue-uniform atoms in the box `q`, each of weight `total / count`.
pub fn uniform_on_cube(q: &CubeId, count: usize, total: f64, seed: u64) -> Result<AtomicMeasure> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    if !(total > 0.0) {
        return Err(Error::invalid(format!(
            "total mass must be positive, got {total}"
        )));
    }
    let n = q.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zs = q.sidelength();
    let ts = zs * zs;
    // Work in index units so the half-open upper face is never hit.
    let coord = |base: i64, u: f64, s: f64| {
        let v = base as f64 + u;
        if v >= (base + 1) as f64 {
            base as f64 * s
        } else {
            v * s
        }
    };
    let points = (0..count)
        .map(|_| {
            let z =
                q.a.iter()
                    .map(|&a| coord(a, rng.gen::<f64>(), zs))
                    .collect();
            let t = coord(q.b, rng.gen::<f64>(), ts);
            HPoint::from_parts_unchecked(z, t)
        })
        .collect();
    AtomicMeasure::from_atoms(n, points, vec![total / count as f64; count])
}

/// Length measure on `{z = 0, t ∈ [t0, t1]}` as `count` midpoint atoms of
/// weight `(t1 − t0) / count`.
pub fn axis_segment_measure(n: usize, t0: f64, t1: f64, count: usize) -> Result<AtomicMeasure> {
    if !(t0 < t1) {
        return Err(Error::invalid(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    let step = (t1 - t0) / count as f64;
    let points = (0..count)
        .map(|i| HPoint::from_parts_unchecked(vec![0.0; 2 * n], t0 + (i as f64 + 0.5) * step))
        .collect();
    AtomicMeasure::from_atoms(n, points, vec![step; count])
}

/// Scale sequence and depth of the vertical-plane Cantor construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorParams {
    eps: Vec<f64>,
    depth: usize,
}

impl CantorParams {
    pub fn new(eps: Vec<f64>, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("Cantor depth must be at least 1"));
        }
        if eps.len() < depth {
            return Err(Error::invalid(format!(
                "need {depth} scales, got {}",
                eps.len()
            )));
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
            return Err(Error::invalid(format!("scales must be positive, got {e}")));
        }
        for k in 1..depth {
            if eps[k] > eps[k - 1] / 4.0 {
                return Err(Error::invalid(format!(
                    "scale {} = {} exceeds a quarter of scale {} = {}",
                    k + 1,
                    eps[k],
                    k,
                    eps[k - 1]
                )));
            }
        }
        Ok(Self {
            eps: eps[..depth].to_vec(),
            depth,
        })
    }

    /// `ε_k = base^{−exponent·k}` for `k = 1..=depth`.
    pub fn power_rule(base: f64, exponent: f64, depth: usize) -> Result<Self> {
        let eps = (1..=depth)
            .map(|k| base.powf(-exponent * k as f64))
            .collect();
        Self::new(eps, depth)
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

/// Probability measure on the vertical-plane Cantor set in ℍ¹.
///
/// Rectangles live in `{x = 0}`. The first has width `ε₁²` (in `y`) and
/// height 1 (in `t`), centred at the origin; each level-`k` rectangle holds two
/// level-`(k+1)` rectangles of width `ε_{k+1}²` and height `ε_{k+1}`, flush in
/// its top-right and bottom-left corners. One atom of weight `2^{−(depth−1)}`
/// sits at the centre of each deepest rectangle.
pub fn cantor_tube_measure(params: &CantorParams) -> Result<AtomicMeasure> {
    // (y centre, t centre, width, height)
    let mut rects = vec![(0.0f64, 0.0f64, params.eps[0] * params.eps[0], 1.0f64)];
    for &e in &params.eps[1..] {
        let (w, h) = (e * e, e);
        rects = rects
            .iter()
            .flat_map(|&(y, t, pw, ph)| {
                let dy = (pw - w) / 2.0;
                let dt = (ph - h) / 2.0;
                [(y - dy, t - dt, w, h), (y + dy, t + dt, w, h)]
            })
            .collect();
    }
    let weight = 1.0 / rects.len() as f64;
    let points = rects
        .iter()
        .map(|&(y, t, _, _)| HPoint::from_parts_unchecked(vec![0.0, y], t))
        .collect();
    AtomicMeasure::from_atoms(1, points, vec![weight; rects.len()])
}
