use std::fs::File;
use std::io::BufWriter;

use hriesz::growth::{growth_constant, growth_witness, GrowthConstant, WitnessOutcome};
use hriesz::hgroup::{dilate, inv, knorm, HPoint};
use hriesz::kernel::{
    cone_bound, cone_bound_check, continuity_ratio, fundamental_solution, horizontal_gradient_fd,
    kernel_norm_closed_form, riesz_kernel,
};
use hriesz::measure::AtomicMeasure;
use hriesz::riesz::{operator_norm_profile, profile_sup, NormEstimate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, MeasureSpec};
use crate::error::CliError;
use crate::report::{ensure_dir, write_csv, write_json};

/// Whether a command found something the user should look at (exit status 1).
pub type Finding = bool;

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    /// Informational checks are reported but do not affect the exit status.
    informational: bool,
    samples: usize,
    value: f64,
    tolerance: f64,
    measures: &'static str,
}

#[derive(Serialize)]
struct KernelCheckReport {
    n: usize,
    all_passed: bool,
    checks: Vec<Check>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

fn point_with_gauge(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> HPoint {
    loop {
        let z: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = HPoint::new(z, rng.gen_range(-1.0..1.0)).expect("finite sample");
        let g = knorm(&p);
        if g > 1e-3 {
            return dilate(rng.gen_range(lo..=hi) / g, &p).expect("positive scale");
        }
    }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn negated(v: &[f64]) -> Vec<f64> {
    v.iter().map(|c| -c).collect()
}

pub fn kernel_check(cfg: &ExperimentConfig) -> Result<Finding, CliError> {
    let dir = cfg.output_dir()?;
    let n = cfg.n;
    let s = &cfg.kernel_check;
    let mut checks = Vec::new();

    let mut rng = stream(cfg.seed, 1);
    let points: Vec<HPoint> = (0..s.gradient_points)
        .map(|_| point_with_gauge(&mut rng, n, 0.5, 2.0))
        .collect();
    let hs = [1e-3, 1e-4, 1e-5];
    let mut errs = Vec::new();
    for &h in &hs {
        let mut worst = 0.0f64;
        for p in &points {
            let fd = horizontal_gradient_fd(|q| fundamental_solution(q).unwrap_or(f64::NAN), p, h)?;
            worst = worst.max(rel_diff(&fd, riesz_kernel(p)?.components()));
        }
        errs.push(worst);
    }
    checks.push(Check {
        name: "gradient_oracle",
        passed: errs[2] <= 1e-6,
        informational: false,
        samples: points.len(),
        value: errs[2],
        tolerance: 1e-6,
        measures: "max relative error of the central-difference horizontal gradient at h = 1e-5",
    });
    let slope = fit_slope(
        &hs.map(f64::ln),
        &errs.iter().map(|e| e.ln()).collect::<Vec<_>>(),
    );
    checks.push(Check {
        name: "gradient_convergence_order",
        passed: (slope - 2.0).abs() <= 0.3,
        informational: false,
        samples: points.len(),
        value: slope,
        tolerance: 0.3,
        measures: "log-error slope over h in {1e-3, 1e-4, 1e-5}; expected 2",
    });

    let mut rng = stream(cfg.seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..s.samples {
        let p = point_with_gauge(&mut rng, n, 0.05, 20.0);
        let k2 = riesz_kernel(&p)?.norm().powi(2);
        let c2 = kernel_norm_closed_form(&p)?.powi(2);
        worst = worst.max((k2 - c2).abs() / c2);
    }
    checks.push(Check {
        name: "closed_form_norm",
        passed: worst <= 1e-12,
        informational: false,
        samples: s.samples,
        value: worst,
        tolerance: 1e-12,
        measures: "max relative error of |K|^2 against the closed form",
    });

    let mut rng = stream(cfg.seed, 3);
    let mut nonzero = 0usize;
    for _ in 0..s.samples {
        let t = rng.gen_range(-10.0..10.0);
        let t = if t == 0.0 { 1.0 } else { t };
        if riesz_kernel(&HPoint::new(vec![0.0; 2 * n], t)?)?
            .components()
            .iter()
            .any(|c| *c != 0.0)
        {
            nonzero += 1;
        }
    }
    checks.push(Check {
        name: "vertical_axis_zero",
        passed: nonzero == 0,
        informational: false,
        samples: s.samples,
        value: nonzero as f64,
        tolerance: 0.0,
        measures: "number of points on the t-axis where K is not exactly zero",
    });

    let mut rng = stream(cfg.seed, 4);
    let (mut sampled, mut violations) = (0usize, 0usize);
    while sampled < s.samples {
        let t: f64 = rng.gen_range(-2.0..2.0);
        let dir: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dn = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if t == 0.0 || dn < 1e-6 {
            continue;
        }
        let radius = rng.gen_range(0.0..1.0) * 16.0 * t.abs().powi(n as i32 + 1);
        let check = cone_bound_check(&HPoint::new(
            dir.iter().map(|d| d * radius / dn).collect(),
            t,
        )?)?;
        if check.in_cone {
            sampled += 1;
            violations += usize::from(check.kernel_norm > check.bound);
        }
    }
    checks.push(Check {
        name: "cone_bound",
        passed: violations == 0,
        informational: false,
        samples: sampled,
        value: violations as f64,
        tolerance: 0.0,
        measures: "cone points where |K| exceeds 32n/4^(n+1)",
    });
    debug_assert_eq!(cone_bound(n), 32.0 * n as f64 / 4f64.powi(n as i32 + 1));

    let mut rng = stream(cfg.seed, 5);
    let (mut hom, mut odd, mut anti) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..s.samples {
        let p = point_with_gauge(&mut rng, n, 0.1, 10.0);
        let lam: f64 = rng.gen_range(0.1..10.0);
        let k = riesz_kernel(&p)?;
        let scaled: Vec<f64> = k
            .components()
            .iter()
            .map(|c| c * lam.powi(-(2 * n as i32 + 1)))
            .collect();
        hom = hom.max(rel_diff(
            riesz_kernel(&dilate(lam, &p)?)?.components(),
            &scaled,
        ));
        let reflected = HPoint::new(negated(p.z()), p.t())?;
        odd = odd.max(rel_diff(
            riesz_kernel(&reflected)?.components(),
            &negated(k.components()),
        ));
        anti = anti.max(rel_diff(
            riesz_kernel(&inv(&p))?.components(),
            &negated(k.components()),
        ));
    }
    checks.push(Check {
        name: "homogeneity",
        passed: hom <= 1e-12,
        informational: false,
        samples: s.samples,
        value: hom,
        tolerance: 1e-12,
        measures: "max relative error of K(dilate(l, p)) = l^-(2n+1) K(p)",
    });
    checks.push(Check {
        name: "horizontal_reflection_odd",
        passed: odd <= 1e-12,
        informational: false,
        samples: s.samples,
        value: odd,
        tolerance: 1e-12,
        measures: "max relative error of K(-z, t) = -K(z, t)",
    });
    checks.push(Check {
        name: "inversion_antisymmetry",
        passed: anti <= 1e-12,
        informational: true,
        samples: s.samples,
        value: anti,
        tolerance: 1e-12,
        measures: "max relative deviation of K(p^-1) from -K(p); the t-derivative term of K is even under inversion",
    });

    let mut rng = stream(cfg.seed, 6);
    let (mut max_ratio, mut drift) = (0.0f64, 0.0f64);
    for _ in 0..s.triples {
        let q1 = point_with_gauge(&mut rng, n, 0.0, 5.0);
        let sep = 0.1 * 50f64.powf(rng.gen_range(0.0..1.0));
        let q2 = hriesz::hgroup::mul(&q1, &point_with_gauge(&mut rng, n, sep, sep))?;
        let far = rng.gen_range(2.0 * sep..=10.0);
        let p = hriesz::hgroup::mul(&q1, &point_with_gauge(&mut rng, n, far, far))?;
        let ratio = continuity_ratio(&p, &q1, &q2)?;
        max_ratio = max_ratio.max(ratio);
        let lam: f64 = rng.gen_range(0.1..10.0);
        let scaled = continuity_ratio(&dilate(lam, &p)?, &dilate(lam, &q1)?, &dilate(lam, &q2)?)?;
        drift = drift.max((scaled - ratio).abs() / ratio);
    }
    checks.push(Check {
        name: "continuity_ratio_finite",
        passed: max_ratio.is_finite(),
        informational: false,
        samples: s.triples,
        value: max_ratio,
        tolerance: f64::MAX,
        measures: "max standard-kernel continuity ratio over admissible triples",
    });
    checks.push(Check {
        name: "continuity_ratio_dilation_invariant",
        passed: drift <= 1e-10,
        informational: false,
        samples: s.triples,
        value: drift,
        tolerance: 1e-10,
        measures: "max relative drift of the continuity ratio under dilation",
    });

    let all_passed = checks.iter().all(|c| c.passed || c.informational);
    ensure_dir(dir)?;
    write_json(
        dir,
        "kernel_check.json",
        "kernel-check",
        cfg,
        &KernelCheckReport {
            n,
            all_passed,
            checks,
        },
    )?;
    Ok(!all_passed)
}

fn build_nonempty(cfg: &ExperimentConfig) -> Result<AtomicMeasure, CliError> {
    let mu = cfg.build_measure()?;
    if mu.is_empty() {
        return Err(CliError::Data("the measure has no atoms".into()));
    }
    Ok(mu)
}

fn write_profile_csv(dir: &std::path::Path, profile: &[NormEstimate]) -> Result<(), CliError> {
    let header = ["delta", "value", "iterations", "residual"].map(String::from);
    let rows: Vec<Vec<String>> = profile
        .iter()
        .map(|e| {
            vec![
                e.delta.to_string(),
                e.value.to_string(),
                e.iterations.to_string(),
                e.residual.to_string(),
            ]
        })
        .collect();
    write_csv(dir, "norm_profile.csv", &header, &rows)
}

#[derive(Serialize)]
struct MeasureSummary {
    atoms: usize,
    total_mass: f64,
}

fn summarize(mu: &AtomicMeasure) -> MeasureSummary {
    MeasureSummary {
        atoms: mu.len(),
        total_mass: mu.total_mass(),
    }
}

#[derive(Serialize)]
struct NormProfileReport {
    measure: MeasureSummary,
    sup: f64,
    all_converged: bool,
    profile: Vec<NormEstimate>,
}

pub fn norm_profile(cfg: &ExperimentConfig) -> Result<Finding, CliError> {
    let dir = cfg.output_dir()?;
    let deltas = cfg
        .deltas
        .as_ref()
        .ok_or_else(|| CliError::Config("field `deltas`: required by norm-profile".into()))?;
    let mu = build_nonempty(cfg)?;
    let profile = operator_norm_profile(&mu, deltas, cfg.norm.tol, cfg.norm.max_iters, cfg.seed)?;
    ensure_dir(dir)?;
    write_profile_csv(dir, &profile)?;
    let report = NormProfileReport {
        measure: summarize(&mu),
        sup: profile_sup(&profile),
        all_converged: profile.iter().all(|e| e.converged),
        profile,
    };
    write_json(dir, "norm_profile.json", "norm-profile", cfg, &report)?;
    Ok(false)
}

#[derive(Serialize)]
struct WitnessFile {
    measure: MeasureSummary,
    outcome: WitnessOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_growth_constant: Option<GrowthConstant>,
}

pub fn growth_witness_cmd(cfg: &ExperimentConfig) -> Result<Finding, CliError> {
    let dir = cfg.output_dir()?;
    let mu = build_nonempty(cfg)?;
    let profile = match &cfg.deltas {
        Some(d) => operator_norm_profile(&mu, d, cfg.norm.tol, cfg.norm.max_iters, cfg.seed)?,
        None => Vec::new(),
    };
    let w = cfg.witness();
    let domain = w.domain.clone().expect("resolved config");
    let outcome = growth_witness(
        &mu,
        &domain,
        &cfg.growth(),
        &profile,
        w.c2_threshold,
        &cfg.witness_options(),
    )?;
    let grid_growth_constant = match (cfg.centers(), &cfg.radii) {
        (Some(centers), Some(radii)) => Some(growth_constant(&mu, &centers, radii)?),
        _ => None,
    };

    ensure_dir(dir)?;
    let finding = match &outcome {
        WitnessOutcome::Certificate(c) => !c.within_threshold,
        WitnessOutcome::Witness(report) => {
            let header = ["j", "mass", "packing_sum", "min_sidelength"].map(String::from);
            let rows: Vec<Vec<String>> = report
                .iteration
                .levels
                .iter()
                .enumerate()
                .map(|(j, l)| {
                    vec![
                        j.to_string(),
                        l.mass.to_string(),
                        l.packing_sum.to_string(),
                        l.min_sidelength.to_string(),
                    ]
                })
                .collect();
            write_csv(dir, "levels.csv", &header, &rows)?;
            if let Some(table) = &report.dimension {
                let levels = report.iteration.levels.len();
                let mut header = vec!["exponent".to_string()];
                header.extend((0..levels).map(|j| format!("S_{j}")));
                header.push("verdict".into());
                let rows: Vec<Vec<String>> = table
                    .rows
                    .iter()
                    .map(|r| {
                        let mut row = vec![r.exponent.to_string()];
                        row.extend(r.sums.iter().map(|s| s.to_string()));
                        row.push(format!("{:?}", r.verdict).to_lowercase());
                        row
                    })
                    .collect();
                write_csv(dir, "dimension.csv", &header, &rows)?;
            }
            false
        }
    };
    let file = WitnessFile {
        measure: summarize(&mu),
        outcome,
        grid_growth_constant,
    };
    write_json(dir, "witness.json", "growth-witness", cfg, &file)?;
    Ok(finding)
}

#[derive(Serialize)]
struct CoverCount {
    k: i32,
    cubes: usize,
}

#[derive(Serialize)]
struct CantorSummary {
    depth: usize,
    eps: Vec<f64>,
    measure: MeasureSummary,
    min_separation: Option<f64>,
    all_in_vertical_plane: bool,
    deltas: Vec<f64>,
    profile: Vec<NormEstimate>,
    sup_norm: f64,
    /// Occupied dyadic cubes per generation.
    cover_counts: Vec<CoverCount>,
    /// Slope of `log₂(count)` against `k` before the counts saturate at the atom count.
    cover_count_slope: Option<f64>,
}

/// Finest generation used for cover counts.
const CANTOR_MAX_GENERATION: i32 = 16;

pub fn cantor(cfg: &ExperimentConfig) -> Result<Finding, CliError> {
    let dir = cfg.output_dir()?;
    let MeasureSpec::Cantor { eps_rule, depth } = &cfg.measure else {
        return Err(CliError::Config(
            "field `measure`: the cantor command needs a cantor measure".into(),
        ));
    };
    let params = eps_rule.params(*depth)?;
    let mu = build_nonempty(cfg)?;
    let min_separation = mu.min_separation();
    let deltas = match &cfg.deltas {
        Some(d) => d.clone(),
        None => vec![min_separation.map_or(1.0, |s| s / 2.0)],
    };
    let profile = operator_norm_profile(&mu, &deltas, cfg.norm.tol, cfg.norm.max_iters, cfg.seed)?;

    let cover_counts: Vec<CoverCount> = (0..=CANTOR_MAX_GENERATION)
        .map(|k| CoverCount {
            k,
            cubes: mu.cube_masses(k, None).len(),
        })
        .collect();
    let unsaturated: Vec<&CoverCount> =
        cover_counts.iter().filter(|c| c.cubes < mu.len()).collect();
    let cover_count_slope = (unsaturated.len() >= 2).then(|| {
        let xs: Vec<f64> = unsaturated.iter().map(|c| c.k as f64).collect();
        let ys: Vec<f64> = unsaturated
            .iter()
            .map(|c| (c.cubes as f64).log2())
            .collect();
        fit_slope(&xs, &ys)
    });

    ensure_dir(dir)?;
    let atoms = File::create(dir.join("atoms.csv"))?;
    mu.write_csv(BufWriter::new(atoms))?;
    write_profile_csv(dir, &profile)?;
    let summary = CantorSummary {
        depth: params.depth(),
        eps: params.eps().to_vec(),
        all_in_vertical_plane: mu.points().iter().all(|p| p.x()[0] == 0.0),
        measure: summarize(&mu),
        min_separation,
        deltas,
        sup_norm: profile_sup(&profile),
        profile,
        cover_counts,
        cover_count_slope,
    };
    write_json(dir, "cantor_summary.json", "cantor", cfg, &summary)?;
    Ok(false)
}
