//! Truncated Riesz transforms of atomic measures and their `L²(μ)` operator norms.
//!
//! For an atomic measure `μ = Σ w_j δ_{q_j}` the truncated transform is
//! `R_{μ,δ} f(p) = Σ_{d(p, q_j) > δ} K(q_j⁻¹ · p) f(q_j) w_j`. Everything here is
//! matrix-free and `O(N²)`; rows are evaluated in parallel, each with a fixed
//! atom-index summation order, so results do not depend on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::{gauge, norm2, relative_position, HPoint};
use crate::kernel::kernel_into;
use crate::measure::AtomicMeasure;

/// Pairs with `d(p, q) ≤ delta` are excluded, the self-pair included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    delta: f64,
}

impl TruncationPolicy {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!(
                "truncation radius must be positive, got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub delta: f64,
    pub converged: bool,
}

/// Largest value in a norm profile, the empirical stand-in for the uniform bound.
pub fn profile_sup(profile: &[NormEstimate]) -> f64 {
    profile.iter().map(|e| e.value).fold(0.0, f64::max)
}

struct Atoms {
    dim: usize,
    z: Vec<f64>,
    t: Vec<f64>,
    w: Vec<f64>,
}

impl Atoms {
    fn new(mu: &AtomicMeasure) -> Self {
        let dim = 2 * mu.n();
        let mut z = Vec::with_capacity(dim * mu.len());
        for p in mu.points() {
            z.extend_from_slice(p.z());
        }
        Self {
            dim,
            z,
            t: mu.points().iter().map(|p| p.t()).collect(),
            w: mu.weights().to_vec(),
        }
    }

    fn len(&self) -> usize {
        self.t.len()
    }

    fn z(&self, j: usize) -> &[f64] {
        &self.z[j * self.dim..(j + 1) * self.dim]
    }
}

/// Accumulates `Σ_j coeff(j) K(q_j⁻¹ · p)` over admissible atoms into `out`.
#[inline]
fn accumulate_row(
    atoms: &Atoms,
    pz: &[f64],
    pt: f64,
    delta: f64,
    coeff: impl Fn(usize) -> f64,
    out: &mut [f64],
) {
    let mut rel = vec![0.0; atoms.dim];
    let mut k = vec![0.0; atoms.dim];
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..atoms.len() {
        let t = relative_position(pz, pt, atoms.z(j), atoms.t[j], &mut rel);
        if gauge(norm2(&rel), t) <= delta {
            continue;
        }
        kernel_into(&rel, t, &mut k);
        let c = coeff(j);
        for (o, kv) in out.iter_mut().zip(&k) {
            *o += kv * c;
        }
    }
}

fn check_len(mu: &AtomicMeasure, f: &[f64]) -> Result<()> {
    if f.len() != mu.len() {
        return Err(Error::invalid(format!(
            "function has {} values but the measure has {} atoms",
            f.len(),
            mu.len()
        )));
    }
    Ok(())
}

/// `R_{μ,δ} f(p)`.
pub fn truncated_riesz(
    mu: &AtomicMeasure,
    f: &[f64],
    p: &HPoint,
    policy: &TruncationPolicy,
) -> Result<Vec<f64>> {
    check_len(mu, f)?;
    if p.n() != mu.n() {
        return Err(Error::DimensionMismatch {
            expected: mu.n(),
            found: p.n(),
        });
    }
    let atoms = Atoms::new(mu);
    let mut out = vec![0.0; atoms.dim];
    accumulate_row(
        &atoms,
        p.z(),
        p.t(),
        policy.delta,
        |j| f[j] * atoms.w[j],
        &mut out,
    );
    Ok(out)
}

/// `R_{μ,δ} f` evaluated at every atom; row `i` belongs to atom `i`.
pub fn riesz_matvec(
    mu: &AtomicMeasure,
    f: &[f64],
    policy: &TruncationPolicy,
) -> Result<Vec<Vec<f64>>> {
    check_len(mu, f)?;
    let atoms = Atoms::new(mu);
    Ok((0..atoms.len())
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; atoms.dim];
            accumulate_row(
                &atoms,
                atoms.z(i),
                atoms.t[i],
                policy.delta,
                |j| f[j] * atoms.w[j],
                &mut row,
            );
            row
        })
        .collect())
}

/// Number of ordered atom pairs `(i, j)` with `d(p_i, q_j) > δ`.
pub fn admissible_pair_count(mu: &AtomicMeasure, policy: &TruncationPolicy) -> usize {
    let atoms = Atoms::new(mu);
    (0..atoms.len())
        .into_par_iter()
        .map(|i| {
            let mut rel = vec![0.0; atoms.dim];
            (0..atoms.len())
                .filter(|&j| {
                    let t =
                        relative_position(atoms.z(i), atoms.t[i], atoms.z(j), atoms.t[j], &mut rel);
                    gauge(norm2(&rel), t) > policy.delta
                })
                .count()
        })
        .sum()
}

/// The weighted block operator `M[(i, a), j] = √w_i K_a(q_j⁻¹ p_i) √w_j`.
struct WeightedOperator<'a> {
    atoms: &'a Atoms,
    sqrt_w: Vec<f64>,
    delta: f64,
}

impl WeightedOperator<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let atoms = self.atoms;
        let dim = atoms.dim;
        let mut out = vec![0.0; atoms.len() * dim];
        out.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
            accumulate_row(
                atoms,
                atoms.z(i),
                atoms.t[i],
                self.delta,
                |j| self.sqrt_w[j] * v[j],
                row,
            );
            row.iter_mut().for_each(|r| *r *= self.sqrt_w[i]);
        });
        out
    }

    fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let atoms = self.atoms;
        let dim = atoms.dim;
        (0..atoms.len())
            .into_par_iter()
            .map(|j| {
                let mut rel = vec![0.0; dim];
                let mut k = vec![0.0; dim];
                let mut acc = 0.0;
                for i in 0..atoms.len() {
                    let t =
                        relative_position(atoms.z(i), atoms.t[i], atoms.z(j), atoms.t[j], &mut rel);
                    if gauge(norm2(&rel), t) <= self.delta {
                        continue;
                    }
                    kernel_into(&rel, t, &mut k);
                    let dot: f64 = k
                        .iter()
                        .zip(&u[i * dim..(i + 1) * dim])
                        .map(|(a, b)| a * b)
                        .sum();
                    acc += self.sqrt_w[i] * dot;
                }
                self.sqrt_w[j] * acc
            })
            .collect()
    }
}

fn unit(v: &mut [f64]) -> f64 {
    let norm = norm2(v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|c| *c /= norm);
    }
    norm
}

/// Power iteration on `MᵀM` for the largest singular value of the weighted
/// truncated operator, i.e. `‖R_{μ,δ}‖_{L²(μ) → L²(μ; ℝ^{2n})}`.
///
/// Stops once the Rayleigh quotient changes by at most `tol` relative to its
/// value; otherwise returns the last iterate after `max_iters` with
/// `converged = false`.
pub fn operator_norm_estimate(
    mu: &AtomicMeasure,
    policy: &TruncationPolicy,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<NormEstimate> {
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    let atoms = Atoms::new(mu);
    let op = WeightedOperator {
        atoms: &atoms,
        sqrt_w: atoms.w.iter().map(|w| w.sqrt()).collect(),
        delta: policy.delta,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..atoms.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    unit(&mut v);

    let mut prev = f64::NAN;
    let mut estimate = NormEstimate {
        value: 0.0,
        iterations: 0,
        residual: f64::INFINITY,
        delta: policy.delta,
        converged: false,
    };
    for iter in 1..=max_iters {
        let mv = op.apply(&v);
        let rayleigh = norm2(&mv);
        estimate.iterations = iter;
        estimate.value = rayleigh.sqrt();
        if rayleigh == 0.0 {
            estimate.residual = 0.0;
            estimate.converged = true;
            break;
        }
        estimate.residual = ((rayleigh - prev) / rayleigh).abs();
        if estimate.residual <= tol {
            estimate.converged = true;
            break;
        }
        prev = rayleigh;
        v = op.apply_transpose(&mv);
        unit(&mut v);
    }
    Ok(estimate)
}

/// One operator-norm estimate per truncation radius.
pub fn operator_norm_profile(
    mu: &AtomicMeasure,
    deltas: &[f64],
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<Vec<NormEstimate>> {
    if deltas.is_empty() {
        return Err(Error::invalid("at least one truncation radius is required"));
    }
    deltas
        .iter()
        .map(|&d| operator_norm_estimate(mu, &TruncationPolicy::new(d)?, tol, max_iters, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgroup::{inv, mul};
    use crate::kernel::riesz_kernel;
    use crate::lattice::CubeId;
    use crate::measure::{axis_segment_measure, uniform_on_cube};

    fn cloud(count: usize, seed: u64) -> AtomicMeasure {
        uniform_on_cube(
            &CubeId {
                k: 0,
                a: vec![0, 0],
                b: 0,
            },
            count,
            1.0,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(0.0).is_err());
        assert!(TruncationPolicy::new(-1.0).is_err());
        assert!(TruncationPolicy::new(f64::NAN).is_err());
    }

    #[test]
    fn large_delta_kills_everything() {
        let mu = cloud(30, 1);
        let f = vec![1.0; 30];
        let p = HPoint::h1(0.5, 0.5, 0.5).unwrap();
        let policy = TruncationPolicy::new(10.0).unwrap();
        assert_eq!(
            truncated_riesz(&mu, &f, &p, &policy).unwrap(),
            vec![0.0, 0.0]
        );
        let est = operator_norm_estimate(&mu, &policy, 1e-8, 100, 0).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn single_term_sum() {
        let q = HPoint::h1(0.3, -0.2, 0.1).unwrap();
        let p = HPoint::h1(1.0, 0.5, -0.4).unwrap();
        let mu = AtomicMeasure::from_atoms(1, vec![q.clone()], vec![1.0]).unwrap();
        let got = truncated_riesz(&mu, &[1.0], &p, &TruncationPolicy::new(1e-3).unwrap()).unwrap();
        let want = riesz_kernel(&mul(&inv(&q), &p).unwrap()).unwrap();
        assert_eq!(got, want.0);
    }

    #[test]
    fn axis_support_gives_zero() {
        let mu = axis_segment_measure(2, -1.0, 1.0, 64).unwrap();
        let f: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        let policy = TruncationPolicy::new(1e-4).unwrap();
        let p = HPoint::new(vec![0.0; 4], 0.3).unwrap();
        assert!(truncated_riesz(&mu, &f, &p, &policy)
            .unwrap()
            .iter()
            .all(|&c| c == 0.0));
        let est = operator_norm_estimate(&mu, &policy, 1e-8, 100, 3).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn single_atom_rows() {
        let mu = AtomicMeasure::from_atoms(1, vec![HPoint::identity(1)], vec![2.0]).unwrap();
        let policy = TruncationPolicy::new(1e-9).unwrap();
        assert_eq!(
            riesz_matvec(&mu, &[1.0], &policy).unwrap(),
            vec![vec![0.0, 0.0]]
        );
        assert_eq!(
            operator_norm_estimate(&mu, &policy, 1e-8, 10, 0)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn matvec_is_linear() {
        let mu = cloud(80, 2);
        let policy = TruncationPolicy::new(0.05).unwrap();
        let f: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).cos()).collect();
        let g: Vec<f64> = (0..80).map(|i| (i as f64 * 1.1).sin()).collect();
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let rf = riesz_matvec(&mu, &f, &policy).unwrap();
        let rg = riesz_matvec(&mu, &g, &policy).unwrap();
        let rfg = riesz_matvec(&mu, &fg, &policy).unwrap();
        let scale = rfg.iter().flatten().map(|c| c.abs()).fold(0.0, f64::max);
        for ((a, b), c) in rf
            .iter()
            .flatten()
            .zip(rg.iter().flatten())
            .zip(rfg.iter().flatten())
        {
            assert!((a + b - c).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn admissible_pairs_shrink_with_delta() {
        let mu = cloud(60, 5);
        let mut prev = usize::MAX;
        for d in [1e-3, 1e-2, 0.1, 0.3, 1.0, 3.0] {
            let c = admissible_pair_count(&mu, &TruncationPolicy::new(d).unwrap());
            assert!(c <= prev);
            prev = c;
        }
        assert_eq!(prev, 0);
    }

    #[test]
    fn estimate_is_deterministic_and_errors_on_empty() {
        let mu = cloud(50, 8);
        let policy = TruncationPolicy::new(0.01).unwrap();
        let a = operator_norm_estimate(&mu, &policy, 1e-10, 1000, 4).unwrap();
        let b = operator_norm_estimate(&mu, &policy, 1e-10, 1000, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.converged && a.residual <= 1e-10);
        let empty = AtomicMeasure::empty(1).unwrap();
        assert_eq!(
            operator_norm_estimate(&empty, &policy, 1e-8, 10, 0),
            Err(Error::EmptyMeasure)
        );
        assert!(operator_norm_profile(&mu, &[], 1e-8, 10, 0).is_err());
    }
}
