use serde::{Deserialize, Serialize};

use super::iteration::{cover_dimension_estimate, iterate, DimensionTable, IterationState};
use super::selection::{hd_select, hd_tube_check, TubeReport};
use super::{density_scale, growth_constant, GrowthConstant, GrowthParams};
use crate::error::{Error, Result};
use crate::hgroup::{self, HPoint};
use crate::lattice::{sandwich_measure, CubeId, SandwichReport};
use crate::measure::AtomicMeasure;
use crate::riesz::{profile_sup, NormEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessOptions {
    /// Generations below the domain cube that are scanned for `Θ ≥ M`.
    pub scan_depth: u32,
    /// Cubes holding fewer atoms are below the measure's resolution and skipped.
    pub min_atoms: usize,
    /// Exponents for the cover-sum table.
    pub exponents: Vec<f64>,
    /// Cap on the number of atoms used as ball centres for the growth constant.
    pub max_centers: usize,
    /// Boundary samples for the sandwich measurement of `Q₀`.
    pub sandwich_samples: usize,
    pub seed: u64,
}

impl WitnessOptions {
    /// Exponent grid `0.25, 0.5, …, D`.
    pub fn default_exponents(n: usize) -> Vec<f64> {
        let steps = 4 * (2 * n + 2);
        (1..=steps).map(|i| i as f64 * 0.25).collect()
    }

    pub fn for_dimension(n: usize) -> Self {
        Self {
            scan_depth: 4,
            min_atoms: 16,
            exponents: Self::default_exponents(n),
            max_centers: 512,
            sandwich_samples: 512,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub params: GrowthParams,
    pub experimental_constants: bool,
    pub scanned_generations: Vec<i32>,
    /// Scanned generations with at least one cube above the resolution guard;
    /// their sidelengths are the radii of the growth-constant grid.
    pub resolved_generations: Vec<i32>,
    /// Largest `Θ(Q)` among scanned cubes above the resolution guard.
    pub max_density: f64,
    pub growth_constant: GrowthConstant,
    pub c2_threshold: f64,
    pub within_threshold: bool,
    pub verdict: String,
    pub norm_profile: Vec<NormEstimate>,
    pub norm_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub params: GrowthParams,
    pub experimental_constants: bool,
    pub q0: CubeId,
    pub theta0: f64,
    pub iteration: IterationState,
    pub retained_mass_fraction: f64,
    pub mass_bound_holds: bool,
    pub first_selection_mass_fraction: f64,
    pub first_selection_packing: f64,
    pub sandwich: SandwichReport,
    pub tube: TubeReport,
    pub dimension: Option<DimensionTable>,
    pub dimension_estimate: Option<f64>,
    pub norm_profile: Vec<NormEstimate>,
    pub norm_sup: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessOutcome {
    Certificate(GrowthCertificate),
    Witness(Box<WitnessReport>),
}

/// Scans the dyadic descendants of `domain` for a cube with `Θ ≥ M`.
///
/// Without one, the measure passes at these constants and the result is a
/// [`GrowthCertificate`] carrying the empirical growth constant. Otherwise the
/// densest cube of the coarsest qualifying generation becomes `Q₀` and the
/// high-density iteration runs from it, producing a [`WitnessReport`] with the
/// retained mass and the cover-sum dimension table.
pub fn growth_witness(
    mu: &AtomicMeasure,
    domain: &CubeId,
    params: &GrowthParams,
    norm_profile: &[NormEstimate],
    c2_threshold: f64,
    options: &WitnessOptions,
) -> Result<WitnessOutcome> {
    params.validate()?;
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if domain.n() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            found: domain.n(),
        });
    }
    if !(c2_threshold > 0.0) {
        return Err(Error::invalid(format!(
            "c2 threshold must be positive, got {c2_threshold}"
        )));
    }
    let n = mu.n();
    let experimental = params.is_experimental(n);

    let mut max_density = 0.0f64;
    let mut scanned = Vec::new();
    let mut resolved = Vec::new();
    let mut q0: Option<(CubeId, f64)> = None;
    for k in domain.k..=domain.k + options.scan_depth as i32 {
        scanned.push(k);
        for (cube, cm) in mu.cube_masses(k, Some(domain)) {
            if cm.atoms < options.min_atoms {
                continue;
            }
            if resolved.last() != Some(&k) {
                resolved.push(k);
            }
            let theta = cm.mass / density_scale(&cube);
            max_density = max_density.max(theta);
            if theta >= params.threshold && q0.as_ref().is_none_or(|(_, best)| theta > *best) {
                q0 = Some((cube, theta));
            }
        }
        if q0.is_some() {
            break;
        }
    }

    let norm_sup = profile_sup(norm_profile);
    let Some((q0, theta0)) = q0 else {
        let centers = sample_centers(mu, options.max_centers);
        // balls finer than the resolved generations see single atoms, not the measure
        let radii: Vec<f64> = if resolved.is_empty() {
            vec![domain.sidelength()]
        } else {
            resolved.iter().map(|&k| (-(k as f64)).exp2()).collect()
        };
        let growth = growth_constant(mu, &centers, &radii)?;
        let within = growth.value <= c2_threshold;
        return Ok(WitnessOutcome::Certificate(GrowthCertificate {
            params: *params,
            experimental_constants: experimental,
            scanned_generations: scanned,
            resolved_generations: resolved,
            max_density,
            within_threshold: within,
            verdict: if within {
                "growth bound holds at experimental threshold".into()
            } else {
                "growth bound violated at experimental threshold".into()
            },
            growth_constant: growth,
            c2_threshold,
            norm_profile: norm_profile.to_vec(),
            norm_sup,
        }));
    };

    let state = iterate(mu, &q0, params)?;
    let first = hd_select(mu, &q0, params)?;
    let window = q0.corners().iter().map(hgroup::knorm).fold(0.0, f64::max);
    let sandwich = sandwich_measure(&q0, window, options.sandwich_samples, options.seed)?;
    let tube = hd_tube_check(&first, mu, 2.0 * sandwich.big_lambda_eff)?;
    let dimension = if state.levels.len() >= 2 {
        Some(cover_dimension_estimate(&state, &options.exponents)?)
    } else {
        None
    };
    let dimension_estimate = dimension.as_ref().and_then(|d| d.estimate);
    let verdict = match dimension_estimate {
        Some(e) if e <= 2.0 => "positive-mass set with cover dimension at most 2".to_string(),
        Some(e) => format!("positive-mass set with cover dimension estimate {e}"),
        None => "iteration too shallow for a dimension estimate".to_string(),
    };
    Ok(WitnessOutcome::Witness(Box::new(WitnessReport {
        params: *params,
        experimental_constants: experimental,
        theta0,
        retained_mass_fraction: state.retained_fraction(),
        mass_bound_holds: state.mass_bound_holds(),
        first_selection_mass_fraction: first.mass_fraction,
        first_selection_packing: first.packing_sum / q0.sidelength().powi(2),
        q0,
        iteration: state,
        sandwich,
        tube,
        dimension,
        dimension_estimate,
        norm_profile: norm_profile.to_vec(),
        norm_sup,
        verdict,
    })))
}

/// Evenly strided subset of at most `max` atoms.
fn sample_centers(mu: &AtomicMeasure, max: usize) -> Vec<HPoint> {
    let stride = mu.len().div_ceil(max.max(1)).max(1);
    mu.points().iter().step_by(stride).cloned().collect()
}
