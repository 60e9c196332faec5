use serde::{Deserialize, Serialize};

use super::selection::{atoms_in, select_within};
use super::{density_scale, GrowthParams};
use crate::error::{Error, Result};
use crate::hgroup;
use crate::lattice::CubeId;
use crate::measure::AtomicMeasure;

/// Beyond this generation `4^k` no longer fits exactly in an `f64` mantissa.
const MAX_GENERATION: i32 = 26;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub cubes: Vec<CubeId>,
    pub cube_masses: Vec<f64>,
    pub mass: f64,
    pub packing_sum: f64,
    pub min_sidelength: f64,
    /// `∏_{i<j} (1 − 2^{−is} M^{−s}) μ(Q₀)`.
    pub mass_lower_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum StopReason {
    /// Ran all `j_max` levels.
    DepthCap,
    /// No cube at this level produced high-density descendants.
    EmptyFamily { level: usize },
    /// Every cube at this level had `Θ < M`.
    BelowThreshold { level: usize },
    /// The next level would exceed the finest representable generation.
    GenerationCap { level: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub q0: CubeId,
    pub params: GrowthParams,
    pub levels: Vec<Level>,
    pub stop: StopReason,
}

impl IterationState {
    pub fn q0_mass(&self) -> f64 {
        self.levels[0].mass
    }

    /// `μ(Z_j) / μ(Q₀)` at the deepest level reached.
    pub fn retained_fraction(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.mass) / self.q0_mass()
    }

    /// Whether every level meets its running product lower bound.
    pub fn mass_bound_holds(&self) -> bool {
        self.levels.iter().all(|l| l.mass >= l.mass_lower_bound)
    }
}

fn mass_lower_bound(params: &GrowthParams, level: usize, q0_mass: f64) -> f64 {
    let m_s = params.threshold.powf(-params.s);
    (0..level)
        .map(|i| 1.0 - (-(i as f64) * params.s).exp2() * m_s)
        .product::<f64>()
        * q0_mass
}

fn make_level(
    cubes: Vec<CubeId>,
    cube_masses: Vec<f64>,
    params: &GrowthParams,
    j: usize,
    q0_mass: f64,
) -> Level {
    let packing_sum = cubes.iter().map(|c| c.sidelength().powi(2)).sum();
    let min_sidelength = cubes
        .iter()
        .map(|c| c.sidelength())
        .fold(f64::INFINITY, f64::min);
    Level {
        mass: cube_masses.iter().sum(),
        packing_sum,
        min_sidelength,
        mass_lower_bound: mass_lower_bound(params, j, q0_mass),
        cubes,
        cube_masses,
    }
}

/// Builds `HD_0 = {Q₀}`, `HD_{j+1} = ∪_{Q ∈ HD_j} HD(Q)` for up to `j_max`
/// levels, stopping early (with the reason recorded) when a level is empty.
pub fn iterate(mu: &AtomicMeasure, q0: &CubeId, params: &GrowthParams) -> Result<IterationState> {
    params.validate()?;
    if q0.n() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            found: q0.n(),
        });
    }
    let root_atoms = atoms_in(mu, q0);
    let q0_mass: f64 = root_atoms.iter().map(|&i| mu.weights()[i]).sum();
    let theta0 = q0_mass / density_scale(q0);
    if theta0 < params.threshold {
        return Err(Error::BelowThreshold {
            theta: theta0,
            threshold: params.threshold,
        });
    }

    let mut levels = vec![make_level(
        vec![q0.clone()],
        vec![q0_mass],
        params,
        0,
        q0_mass,
    )];
    let mut frontier: Vec<(CubeId, Vec<usize>)> = vec![(q0.clone(), root_atoms)];
    let mut stop = StopReason::DepthCap;

    for j in 0..params.j_max {
        let mut children: Vec<(CubeId, f64, Vec<usize>)> = Vec::new();
        let mut expandable = 0usize;
        for (cube, atoms) in &frontier {
            match select_within(mu, cube, atoms, params) {
                Ok((sel, groups)) => {
                    expandable += 1;
                    if cube.k + sel.depth as i32 > MAX_GENERATION {
                        stop = StopReason::GenerationCap { level: j };
                        break;
                    }
                    children.extend(
                        sel.hd_cubes
                            .into_iter()
                            .zip(sel.hd_masses)
                            .zip(groups)
                            .map(|((c, m), idx)| (c, m, idx)),
                    );
                }
                Err(Error::BelowThreshold { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if matches!(stop, StopReason::GenerationCap { .. }) {
            break;
        }
        if expandable == 0 {
            stop = StopReason::BelowThreshold { level: j };
            break;
        }
        if children.is_empty() {
            stop = StopReason::EmptyFamily { level: j };
            break;
        }
        children.sort_by(|a, b| a.0.cmp(&b.0));
        let cubes: Vec<CubeId> = children.iter().map(|c| c.0.clone()).collect();
        let masses: Vec<f64> = children.iter().map(|c| c.1).collect();
        frontier = children.into_iter().map(|(c, _, idx)| (c, idx)).collect();
        levels.push(make_level(cubes, masses, params, j + 1, q0_mass));
    }

    Ok(IterationState {
        q0: q0.clone(),
        params: *params,
        levels,
        stop,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimensionVerdict {
    Decaying,
    Bounded,
    Growing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub exponent: f64,
    /// `S_j(e) = Σ_{Q ∈ HD_j} ℓ(Q)^e` for each level `j`.
    pub sums: Vec<f64>,
    pub verdict: DimensionVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionTable {
    pub rows: Vec<DimensionRow>,
    /// Smallest tested exponent whose cover sums do not grow.
    pub estimate: Option<f64>,
}

/// Cover sums of the iteration's cube families.
///
/// With `ρ = S_last / S_first`, an exponent is `decaying` when `ρ ≤ 1/2`,
/// `growing` when `ρ ≥ 2` and `bounded` otherwise.
pub fn cover_dimension_estimate(
    state: &IterationState,
    exponents: &[f64],
) -> Result<DimensionTable> {
    if state.levels.len() < 2 {
        return Err(Error::TooFewLevels {
            levels: state.levels.len(),
            required: 2,
        });
    }
    let d = hgroup::hom_dim(state.q0.n());
    if let Some(e) = exponents.iter().find(|&&e| !(e > 0.0 && e <= d)) {
        return Err(Error::invalid(format!(
            "exponents must lie in (0, {d}], got {e}"
        )));
    }
    let rows: Vec<DimensionRow> = exponents
        .iter()
        .map(|&e| {
            let sums: Vec<f64> = state
                .levels
                .iter()
                .map(|l| l.cubes.iter().map(|c| c.sidelength().powf(e)).sum())
                .collect();
            let ratio = sums[sums.len() - 1] / sums[0];
            let verdict = if ratio <= 0.5 {
                DimensionVerdict::Decaying
            } else if ratio >= 2.0 {
                DimensionVerdict::Growing
            } else {
                DimensionVerdict::Bounded
            };
            DimensionRow {
                exponent: e,
                sums,
                verdict,
            }
        })
        .collect();
    let estimate = rows
        .iter()
        .filter(|r| r.verdict != DimensionVerdict::Growing)
        .map(|r| r.exponent)
        .fold(None, |acc: Option<f64>, e| {
            Some(acc.map_or(e, |a| a.min(e)))
        });
    Ok(DimensionTable { rows, estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::axis_segment_measure;

    fn unit(n: usize) -> CubeId {
        CubeId {
            k: 0,
            a: vec![0; 2 * n],
            b: 0,
        }
    }

    fn axis(count: usize) -> AtomicMeasure {
        axis_segment_measure(1, 0.0, 1.0, count)
            .unwrap()
            .scaled(256.0)
            .unwrap()
    }

    #[test]
    fn zero_depth_is_just_the_root() {
        let mut params = GrowthParams::experimental(1);
        params.j_max = 0;
        let state = iterate(&axis(1024), &unit(1), &params).unwrap();
        assert_eq!(state.levels.len(), 1);
        assert_eq!(state.levels[0].cubes, vec![unit(1)]);
        assert_eq!(state.stop, StopReason::DepthCap);
        assert!(matches!(
            cover_dimension_estimate(&state, &[2.0]),
            Err(Error::TooFewLevels { levels: 1, .. })
        ));
    }

    #[test]
    fn axis_iteration_structure() {
        let params = GrowthParams::experimental(1);
        let mu = axis(1 << 16);
        let state = iterate(&mu, &unit(1), &params).unwrap();
        assert_eq!(state.levels.len(), 4);
        assert_eq!(state.stop, StopReason::DepthCap);
        let gens: Vec<i32> = state.levels.iter().map(|l| l.cubes[0].k).collect();
        assert_eq!(gens, vec![0, 2, 4, 7]);
        for (j, w) in state.levels.windows(2).enumerate() {
            assert!(w[1].mass <= w[0].mass);
            assert!(w[1].min_sidelength < w[0].min_sidelength);
            assert!(w[1].min_sidelength <= (-(j as f64 + 1.0)).exp2());
            for c in &w[1].cubes {
                assert!(w[0].cubes.iter().any(|p| c.is_within(p)));
            }
        }
        for l in &state.levels {
            assert_eq!(l.mass, l.cube_masses.iter().sum::<f64>());
            assert!(l.mass >= l.mass_lower_bound);
        }
        assert!(state.mass_bound_holds());

        let table = cover_dimension_estimate(&state, &[1.5, 2.0, 2.5, 4.0]).unwrap();
        let verdicts: Vec<_> = table.rows.iter().map(|r| r.verdict).collect();
        assert_eq!(
            verdicts,
            vec![
                DimensionVerdict::Growing,
                DimensionVerdict::Bounded,
                DimensionVerdict::Decaying,
                DimensionVerdict::Decaying
            ]
        );
        assert_eq!(table.estimate, Some(2.0));
        for s in &table.rows[3].sums {
            assert!(*s <= 1.0);
        }
        for j in 0..state.levels.len() {
            for w in table.rows.windows(2) {
                assert!(w[1].sums[j] <= w[0].sums[j]);
            }
        }
    }

    #[test]
    fn sparse_atoms_stop_the_iteration() {
        // 16 atoms: after a couple of levels the cubes hold single atoms whose
        // density keeps doubling, so the depth cap is what stops it
        let params = GrowthParams {
            j_max: 8,
            ..GrowthParams::experimental(1)
        };
        let state = iterate(&axis(16), &unit(1), &params).unwrap();
        assert!(matches!(
            state.stop,
            StopReason::DepthCap | StopReason::GenerationCap { .. }
        ));
        assert_eq!(state.retained_fraction(), 1.0);
    }
}
