use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{density_scale, select_n, GrowthParams};
use crate::error::{Error, Result};
use crate::hgroup::HPoint;
use crate::lattice::{cube_at_raw, CubeId, Tube};
use crate::measure::AtomicMeasure;

/// The high-density descendants `HD(Q₀)`: cubes `N` generations below `Q₀`
/// with `Θ(Q) > 2Θ(Q₀)`, where `N = ⌊A^{−2} log₂ Θ(Q₀)⌋`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HDSelection {
    pub q0: CubeId,
    #[serde(rename = "N")]
    pub depth: u32,
    pub hd_cubes: Vec<CubeId>,
    pub hd_masses: Vec<f64>,
    pub q0_mass: f64,
    pub retained_mass: f64,
    pub mass_fraction: f64,
    pub packing_sum: f64,
    pub theta0: f64,
    /// `A`, kept for the tube diagnostics.
    pub scale_gap: f64,
}

/// Selection restricted to the atoms listed in `atoms`, which must be exactly
/// the atoms of `mu` inside `q0`. Returns the selection and, for each HD cube,
/// its atom indices.
pub(crate) fn select_within(
    mu: &AtomicMeasure,
    q0: &CubeId,
    atoms: &[usize],
    params: &GrowthParams,
) -> Result<(HDSelection, Vec<Vec<usize>>)> {
    let q0_mass: f64 = atoms.iter().map(|&i| mu.weights()[i]).sum();
    let theta0 = q0_mass / density_scale(q0);
    if theta0 < params.threshold {
        return Err(Error::BelowThreshold {
            theta: theta0,
            threshold: params.threshold,
        });
    }
    let depth = select_n(theta0, params.scale_gap)?;
    if depth == 0 {
        return Err(Error::invalid(format!(
            "density {theta0} gives scale gap N = 0 for A = {}",
            params.scale_gap
        )));
    }
    let k = q0.k + depth as i32;
    let mut buckets: BTreeMap<CubeId, (f64, Vec<usize>)> = BTreeMap::new();
    for &i in atoms {
        let p = &mu.points()[i];
        let e = buckets.entry(cube_at_raw(k, p.z(), p.t())).or_default();
        e.0 += mu.weights()[i];
        e.1.push(i);
    }
    let scale = density_scale(&CubeId {
        k,
        a: q0.a.clone(),
        b: 0,
    });
    let mut hd_cubes = Vec::new();
    let mut hd_masses = Vec::new();
    let mut hd_atoms = Vec::new();
    for (cube, (mass, idx)) in buckets {
        if mass / scale > 2.0 * theta0 {
            hd_cubes.push(cube);
            hd_masses.push(mass);
            hd_atoms.push(idx);
        }
    }
    let retained_mass: f64 = hd_masses.iter().sum();
    let ell = (-(k as f64)).exp2();
    let sel = HDSelection {
        q0: q0.clone(),
        depth,
        packing_sum: hd_cubes.len() as f64 * ell * ell,
        hd_cubes,
        hd_masses,
        q0_mass,
        retained_mass,
        mass_fraction: retained_mass / q0_mass,
        theta0,
        scale_gap: params.scale_gap,
    };
    Ok((sel, hd_atoms))
}

pub(crate) fn atoms_in(mu: &AtomicMeasure, q: &CubeId) -> Vec<usize> {
    mu.points()
        .iter()
        .enumerate()
        .filter(|(_, p)| q.contains(p))
        .map(|(i, _)| i)
        .collect()
}

/// Computes `HD(Q₀)` together with its retained mass and packing sum `Σ ℓ(Q)²`.
pub fn hd_select(mu: &AtomicMeasure, q0: &CubeId, params: &GrowthParams) -> Result<HDSelection> {
    params.validate()?;
    if q0.n() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            found: q0.n(),
        });
    }
    select_within(mu, q0, &atoms_in(mu, q0), params).map(|(sel, _)| sel)
}

/// Membership in the tube `T_κ` of `Q₀` whose axis is the vertical line
/// through the horizontal centre of `Q₀`.
pub fn tube_membership(p: &HPoint, q0: &CubeId, depth: u32, kappa: f64) -> Result<bool> {
    let axis = q0.center().z().to_vec();
    Ok(Tube::new(q0.clone(), depth, kappa, axis)?.contains(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeReport {
    pub tube: Tube,
    /// The depth-`⌈A·N⌉` descendant of `Q₀` of largest mass; the tube axis
    /// passes through its centre.
    pub pigeonhole_cube: CubeId,
    pub all_in_tube: bool,
    pub all_inside_tube: bool,
    pub tube_mass_fraction: f64,
    /// Mass fraction of depth-`N` cubes meeting the tube that are not high density.
    pub low_density_mass_fraction: f64,
    /// Whether `μ(T_κ) ≥ (1 − Θ₀^{−1}) μ(Q₀)`.
    pub dense_tube_bound_holds: bool,
}

/// Checks that every HD cube meets the tube `T_κ` around the densest vertical
/// line of `Q₀` and reports how much of `μ(Q₀)` the tube carries.
pub fn hd_tube_check(sel: &HDSelection, mu: &AtomicMeasure, kappa: f64) -> Result<TubeReport> {
    let q0 = &sel.q0;
    let atoms = atoms_in(mu, q0);
    if atoms.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let pigeon_depth = (sel.scale_gap * sel.depth as f64).ceil() as i32;
    let mut buckets: BTreeMap<CubeId, f64> = BTreeMap::new();
    for &i in &atoms {
        let p = &mu.points()[i];
        *buckets
            .entry(cube_at_raw(q0.k + pigeon_depth, p.z(), p.t()))
            .or_default() += mu.weights()[i];
    }
    let mut pigeon: Option<(&CubeId, f64)> = None;
    for (c, &m) in &buckets {
        if pigeon.is_none_or(|(_, best)| m > best) {
            pigeon = Some((c, m));
        }
    }
    let pigeonhole_cube = pigeon.map(|(c, _)| c.clone()).ok_or(Error::EmptyMeasure)?;
    let tube = Tube::new(
        q0.clone(),
        sel.depth,
        kappa,
        pigeonhole_cube.center().z().to_vec(),
    )?;

    let all_in_tube = sel.hd_cubes.iter().all(|c| tube.closure_meets(c));
    let all_inside_tube = sel.hd_cubes.iter().all(|c| tube.contains_cube(c));
    let in_tube: f64 = atoms
        .iter()
        .filter(|&&i| tube.contains(&mu.points()[i]))
        .map(|&i| mu.weights()[i])
        .sum();
    let tube_mass_fraction = in_tube / sel.q0_mass;

    let k = q0.k + sel.depth as i32;
    let mut level: BTreeMap<CubeId, f64> = BTreeMap::new();
    for &i in &atoms {
        let p = &mu.points()[i];
        *level.entry(cube_at_raw(k, p.z(), p.t())).or_default() += mu.weights()[i];
    }
    let low: f64 = level
        .iter()
        .filter(|(c, _)| tube.closure_meets(c) && sel.hd_cubes.binary_search(c).is_err())
        .map(|(_, m)| m)
        .sum();

    Ok(TubeReport {
        pigeonhole_cube,
        all_in_tube,
        all_inside_tube,
        tube_mass_fraction,
        low_density_mass_fraction: low / sel.q0_mass,
        dense_tube_bound_holds: tube_mass_fraction >= 1.0 - 1.0 / sel.theta0,
        tube,
    })
}
