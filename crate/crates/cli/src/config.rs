use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hriesz::growth::{GrowthParams, WitnessOptions};
use hriesz::measure::{
    axis_segment_measure, cantor_tube_measure, uniform_on_cube, AtomicMeasure, CantorParams,
};
use hriesz::{CubeId, HPoint};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Experiment description, loaded from JSON. Optional sections are filled
/// with defaults by [`ExperimentConfig::load`], so the serialized form of a
/// loaded config is the fully resolved configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub measure: MeasureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<PointSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub norm: NormSettings,
    #[serde(default)]
    pub kernel_check: KernelCheckSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessSettings>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    AtomsFile {
        path: PathBuf,
    },
    UniformCube {
        k: i32,
        a: Vec<i64>,
        b: i64,
        count: usize,
        total: f64,
    },
    Axis {
        t0: f64,
        t1: f64,
        count: usize,
        /// Rescale to this total mass; defaults to `t1 − t0`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total: Option<f64>,
    },
    Cantor {
        eps_rule: EpsRule,
        depth: usize,
    },
}

/// Either a power rule such as `"4^-2k"` (`ε_k = 4^{−2k}`) or explicit scales.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsRule {
    Rule(String),
    Explicit(Vec<f64>),
}

impl EpsRule {
    pub fn params(&self, depth: usize) -> Result<CantorParams, CliError> {
        match self {
            EpsRule::Explicit(eps) => CantorParams::new(eps.clone(), depth),
            EpsRule::Rule(rule) => {
                let (base, exponent) = parse_power_rule(rule).ok_or_else(|| {
                    CliError::Config(format!(
                        "measure.eps_rule: cannot parse {rule:?}; expected e.g. \"4^-2k\""
                    ))
                })?;
                CantorParams::power_rule(base, exponent, depth)
            }
        }
        .map_err(|e| CliError::Config(format!("measure.eps_rule: {e}")))
    }
}

fn parse_power_rule(rule: &str) -> Option<(f64, f64)> {
    let compact: String = rule.chars().filter(|c| !c.is_whitespace()).collect();
    let (base, rest) = compact.split_once("^-")?;
    let coef = rest.strip_suffix('k')?;
    let base: f64 = base.parse().ok()?;
    let exponent: f64 = if coef.is_empty() {
        1.0
    } else {
        coef.parse().ok()?
    };
    (base > 1.0 && exponent > 0.0).then_some((base, exponent))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub z: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSettings {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_max_iters() -> usize {
    5000
}

impl Default for NormSettings {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iters: default_max_iters(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckSettings {
    #[serde(default = "default_gradient_points")]
    pub gradient_points: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_triples")]
    pub triples: usize,
}

fn default_gradient_points() -> usize {
    1000
}

fn default_samples() -> usize {
    100_000
}

fn default_triples() -> usize {
    10_000
}

impl Default for KernelCheckSettings {
    fn default() -> Self {
        Self {
            gradient_points: default_gradient_points(),
            samples: default_samples(),
            triples: default_triples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSettings {
    /// Dyadic cube scanned for high density; defaults to the unit cube at the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<CubeId>,
    #[serde(default = "default_c2")]
    pub c2_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_atoms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_centers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sandwich_samples: Option<usize>,
}

fn default_c2() -> f64 {
    10.0
}

impl WitnessSettings {
    fn empty() -> Self {
        Self {
            domain: None,
            c2_threshold: default_c2(),
            scan_depth: None,
            min_atoms: None,
            exponents: None,
            max_centers: None,
            sandwich_samples: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config file, applying the `--seed` and `--out`
    /// overrides and filling defaults. Relative paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Self, CliError> {
        let file =
            File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_reader(BufReader::new(file));
        let mut cfg: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            // serde_json's message already ends with the line and column
            CliError::Config(format!(
                "{}: field `{}`: {}",
                path.display(),
                e.path(),
                e.inner()
            ))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = out {
            cfg.output_dir = Some(o.to_path_buf());
        }
        if let MeasureSpec::AtomsFile { path } = &mut cfg.measure {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    fn resolve(&mut self) -> Result<(), CliError> {
        let n = self.n;
        if n == 0 {
            return Err(CliError::Config(
                "field `n`: dimension must be at least 1".into(),
            ));
        }
        let growth = self.growth.unwrap_or_else(|| GrowthParams::experimental(n));
        growth
            .validate()
            .map_err(|e| CliError::Config(format!("field `growth`: {e}")))?;
        self.growth = Some(growth);

        if let Some(deltas) = &self.deltas {
            if deltas.is_empty() {
                return Err(CliError::Config("field `deltas`: list is empty".into()));
            }
            if let Some(d) = deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
                return Err(CliError::Config(format!(
                    "field `deltas`: truncation radii must be positive, got {d}"
                )));
            }
        }
        if let Some(radii) = &self.radii {
            if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                return Err(CliError::Config(
                    "field `radii`: need a nonempty list of positive radii".into(),
                ));
            }
        }
        if let Some(centers) = &self.centers {
            for (i, c) in centers.iter().enumerate() {
                if c.z.len() != 2 * n {
                    return Err(CliError::Config(format!(
                        "field `centers[{i}].z`: expected {} coordinates",
                        2 * n
                    )));
                }
                c.point()
                    .map_err(|e| CliError::Config(format!("field `centers[{i}]`: {e}")))?;
            }
        }
        if !(self.norm.tol > 0.0) || self.norm.max_iters == 0 {
            return Err(CliError::Config(
                "field `norm`: tol must be positive and max_iters at least 1".into(),
            ));
        }

        match &self.measure {
            MeasureSpec::AtomsFile { path } => {
                if !path.is_file() {
                    return Err(CliError::Config(format!(
                        "field `measure.path`: {} does not exist",
                        path.display()
                    )));
                }
            }
            MeasureSpec::UniformCube {
                a, count, total, ..
            } => {
                if a.len() != 2 * n {
                    return Err(CliError::Config(format!(
                        "field `measure.a`: expected {} indices",
                        2 * n
                    )));
                }
                if *count == 0 || !(*total > 0.0) {
                    return Err(CliError::Config(
                        "field `measure`: count and total must be positive".into(),
                    ));
                }
            }
            MeasureSpec::Axis {
                t0,
                t1,
                count,
                total,
            } => {
                if !(t1 > t0) || *count == 0 {
                    return Err(CliError::Config(
                        "field `measure`: need t0 < t1 and a positive count".into(),
                    ));
                }
                if total.is_some_and(|m| !(m > 0.0)) {
                    return Err(CliError::Config(
                        "field `measure.total`: must be positive".into(),
                    ));
                }
            }
            MeasureSpec::Cantor { eps_rule, depth } => {
                if n != 1 {
                    return Err(CliError::Config(format!(
                        "field `n`: the Cantor construction lives in ℍ¹, got n = {n}"
                    )));
                }
                eps_rule.params(*depth)?;
            }
        }

        let witness = self.witness.get_or_insert_with(WitnessSettings::empty);
        if !(witness.c2_threshold > 0.0) {
            return Err(CliError::Config(
                "field `witness.c2_threshold`: must be positive".into(),
            ));
        }
        if witness.domain.as_ref().is_some_and(|d| d.n() != n) {
            return Err(CliError::Config(format!(
                "field `witness.domain`: expected {} horizontal indices",
                2 * n
            )));
        }
        let defaults = WitnessOptions::for_dimension(n);
        witness.domain.get_or_insert_with(|| CubeId {
            k: 0,
            a: vec![0; 2 * n],
            b: 0,
        });
        witness.scan_depth.get_or_insert(defaults.scan_depth);
        witness.min_atoms.get_or_insert(defaults.min_atoms);
        witness.exponents.get_or_insert(defaults.exponents);
        witness.max_centers.get_or_insert(defaults.max_centers);
        witness
            .sandwich_samples
            .get_or_insert(defaults.sandwich_samples);
        Ok(())
    }

    pub fn growth(&self) -> GrowthParams {
        self.growth.expect("resolved config")
    }

    pub fn witness(&self) -> &WitnessSettings {
        self.witness.as_ref().expect("resolved config")
    }

    pub fn witness_options(&self) -> WitnessOptions {
        let w = self.witness();
        WitnessOptions {
            scan_depth: w.scan_depth.unwrap_or(4),
            min_atoms: w.min_atoms.unwrap_or(16),
            exponents: w.exponents.clone().unwrap_or_default(),
            max_centers: w.max_centers.unwrap_or(512),
            sandwich_samples: w.sandwich_samples.unwrap_or(512),
            seed: self.seed,
        }
    }

    pub fn output_dir(&self) -> Result<&Path, CliError> {
        self.output_dir.as_deref().ok_or_else(|| {
            CliError::Config("no output directory: pass --out or set output_dir".into())
        })
    }

    /// Builds the configured measure.
    pub fn build_measure(&self) -> Result<AtomicMeasure, CliError> {
        let data = |e: hriesz::Error| CliError::Data(e.to_string());
        match &self.measure {
            MeasureSpec::AtomsFile { path } => {
                let file = File::open(path)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                let mu = AtomicMeasure::read_csv(BufReader::new(file))
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                if mu.n() != self.n {
                    return Err(CliError::Data(format!(
                        "{}: atoms live in ℍ^{} but the config has n = {}",
                        path.display(),
                        mu.n(),
                        self.n
                    )));
                }
                Ok(mu)
            }
            MeasureSpec::UniformCube {
                k,
                a,
                b,
                count,
                total,
            } => {
                let q = CubeId {
                    k: *k,
                    a: a.clone(),
                    b: *b,
                };
                uniform_on_cube(&q, *count, *total, self.seed).map_err(data)
            }
            MeasureSpec::Axis {
                t0,
                t1,
                count,
                total,
            } => {
                let mu = axis_segment_measure(self.n, *t0, *t1, *count).map_err(data)?;
                match total {
                    Some(m) => mu.scaled(m / mu.total_mass()).map_err(data),
                    None => Ok(mu),
                }
            }
            MeasureSpec::Cantor { eps_rule, depth } => {
                cantor_tube_measure(&eps_rule.params(*depth)?).map_err(data)
            }
        }
    }

    pub fn centers(&self) -> Option<Vec<HPoint>> {
        self.centers
            .as_ref()
            .map(|cs| cs.iter().map(|c| c.point().expect("validated")).collect())
    }
}

impl PointSpec {
    fn point(&self) -> hriesz::Result<HPoint> {
        HPoint::new(self.z.clone(), self.t)
    }
}
