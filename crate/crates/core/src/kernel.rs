//! The fundamental solution of the sub-Laplacian and the `(2n+1)`-dimensional
//! Riesz kernel `K = ∇_ℍ G`.
//!
//! The horizontal frame is `X_i = ∂_{x_i} − (y_i/2) ∂_t`, `Y_i = ∂_{y_i} + (x_i/2) ∂_t`,
//! and `G(p) = ‖p‖^{2−D}` (normalising constant 1). With these choices
//!
//! ```text
//! K_a(z, t)     = n (−2 x_a |z|² + 8 y_a t) / ‖p‖^{2n+4}
//! K_{n+a}(z, t) = n (−2 y_a |z|² − 8 x_a t) / ‖p‖^{2n+4}
//! |K(z, t)|²    = 4 n² |z|² / (|z|⁴ + 16 t²)^{n+1}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::{self, gauge, norm2, HPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelValue(pub Vec<f64>);

impl KernelValue {
    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0).sqrt()
    }
}

/// `G(p) = ‖p‖^{2−D}`.
pub fn fundamental_solution(p: &HPoint) -> Result<f64> {
    if p.is_identity() {
        return Err(Error::Singularity);
    }
    let d = hgroup::hom_dim(p.n());
    Ok(hgroup::knorm(p).powf(2.0 - d))
}

/// Evaluates `K` at the point with horizontal part `z` and vertical part `t`,
/// writing `2n` components into `out`. Returns `false` at the identity.
#[inline]
pub(crate) fn kernel_into(z: &[f64], t: f64, out: &mut [f64]) -> bool {
    let n = z.len() / 2;
    let z2 = norm2(z);
    if z2 == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return t != 0.0;
    }
    let g = gauge(z2, t);
    let scale = n as f64 / g.powi(2 * n as i32 + 4);
    let (x, y) = z.split_at(n);
    for a in 0..n {
        out[a] = scale * (-2.0 * x[a] * z2 + 8.0 * y[a] * t);
        out[n + a] = scale * (-2.0 * y[a] * z2 - 8.0 * x[a] * t);
    }
    true
}

pub fn riesz_kernel(p: &HPoint) -> Result<KernelValue> {
    let mut out = vec![0.0; p.z().len()];
    if !kernel_into(p.z(), p.t(), &mut out) {
        return Err(Error::Singularity);
    }
    Ok(KernelValue(out))
}

/// `|K(p)|` from the closed form `2n|z| / (|z|⁴ + 16t²)^{(n+1)/2}`.
pub fn kernel_norm_closed_form(p: &HPoint) -> Result<f64> {
    if p.is_identity() {
        return Err(Error::Singularity);
    }
    let n = p.n() as f64;
    let z2 = norm2(p.z());
    let s = z2 * z2 + 16.0 * p.t() * p.t();
    Ok((4.0 * n * n * z2 / s.powf(n + 1.0)).sqrt())
}

/// Central differences of `f` along the horizontal frame at `p`.
///
/// Component `i < n` differentiates along `e_{x_i} − (y_i/2) e_t`, component
/// `n + i` along `e_{y_i} + (x_i/2) e_t`.
pub fn horizontal_gradient_fd<F>(f: F, p: &HPoint, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&HPoint) -> f64,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    let n = p.n();
    let mut grad = Vec::with_capacity(2 * n);
    for i in 0..2 * n {
        let dt = if i < n {
            -p.y()[i] / 2.0
        } else {
            p.x()[i - n] / 2.0
        };
        let shifted = |sign: f64| {
            let mut z = p.z().to_vec();
            z[i] += sign * h;
            HPoint::from_parts_unchecked(z, p.t() + sign * h * dt)
        };
        let fp = f(&shifted(1.0));
        let fm = f(&shifted(-1.0));
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite);
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Supremum of `|K|` over the double cone `|z| ≤ 16 |t|^{n+1}`: `32n / 4^{n+1}`.
pub fn cone_bound(n: usize) -> f64 {
    32.0 * n as f64 / 4f64.powi(n as i32 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCheck {
    pub in_cone: bool,
    pub kernel_norm: f64,
    pub bound: f64,
}

pub fn cone_bound_check(p: &HPoint) -> Result<ConeCheck> {
    let k = riesz_kernel(p)?;
    let n = p.n();
    Ok(ConeCheck {
        in_cone: p.horizontal_norm() <= 16.0 * p.t().abs().powi(n as i32 + 1),
        kernel_norm: k.norm(),
        bound: cone_bound(n),
    })
}

/// `|K(q1⁻¹p) − K(q2⁻¹p)| / max(d(q1,q2)/d(p,q1)^D, d(q1,q2)/d(p,q2)^D)`.
pub fn continuity_ratio(p: &HPoint, q1: &HPoint, q2: &HPoint) -> Result<f64> {
    let d12 = hgroup::dist(q1, q2)?;
    let dp1 = hgroup::dist(p, q1)?;
    let dp2 = hgroup::dist(p, q2)?;
    if d12 == 0.0 || dp1 == 0.0 || dp2 == 0.0 {
        return Err(Error::invalid(
            "continuity ratio needs three distinct points",
        ));
    }
    let k1 = riesz_kernel(&hgroup::mul(&hgroup::inv(q1), p)?)?;
    let k2 = riesz_kernel(&hgroup::mul(&hgroup::inv(q2), p)?)?;
    let diff: f64 =
        k1.0.iter()
            .zip(&k2.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    let d = hgroup::hom_dim(p.n());
    let denom = (d12 / dp1.powf(d)).max(d12 / dp2.powf(d));
    Ok(diff / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgroup::{dilate, inv};
    use proptest::prelude::*;

    fn pt(x: f64, y: f64, t: f64) -> HPoint {
        HPoint::h1(x, y, t).unwrap()
    }

    fn arb_nonzero(n: usize) -> impl Strategy<Value = HPoint> {
        (prop::collection::vec(-3.0..3.0f64, 2 * n), -3.0..3.0f64)
            .prop_filter("away from identity", |(z, t)| {
                z.iter().map(|c| c * c).sum::<f64>() + t.abs() > 1e-3
            })
            .prop_map(|(z, t)| HPoint::new(z, t).unwrap())
    }

    #[test]
    fn fundamental_solution_values() {
        assert_eq!(fundamental_solution(&pt(1.0, 0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(
            fundamental_solution(&HPoint::identity(1)),
            Err(Error::Singularity)
        );
        let p = pt(0.3, 0.8, -0.2);
        let g = fundamental_solution(&p).unwrap();
        let gl = fundamental_solution(&dilate(2.5, &p).unwrap()).unwrap();
        assert!((gl - 2.5f64.powi(-2) * g).abs() <= 1e-12 * gl);
    }

    #[test]
    fn kernel_hand_values() {
        assert_eq!(riesz_kernel(&pt(1.0, 0.0, 0.0)).unwrap().0, vec![-2.0, 0.0]);
        assert_eq!(riesz_kernel(&pt(0.0, 0.0, 3.0)).unwrap().0, vec![0.0, 0.0]);
        assert_eq!(riesz_kernel(&HPoint::identity(2)), Err(Error::Singularity));
    }

    #[test]
    fn gradient_oracle_reproduces_kernel() {
        let p = pt(1.0, 0.0, 0.0);
        let fd = horizontal_gradient_fd(|q| fundamental_solution(q).unwrap_or(f64::NAN), &p, 1e-5)
            .unwrap();
        let k = riesz_kernel(&p).unwrap();
        for (a, b) in fd.iter().zip(&k.0) {
            assert!((a - b).abs() <= 1e-6 * k.norm());
        }
    }

    #[test]
    fn gradient_of_simple_fields() {
        let p = pt(0.4, 1.0, 0.3);
        let g = horizontal_gradient_fd(|_| 7.0, &p, 1e-3).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = horizontal_gradient_fd(|q| q.t(), &p, 1e-3).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-12);
        assert!((g[1] - 0.2).abs() < 1e-12);
        assert!(horizontal_gradient_fd(|_| f64::INFINITY, &p, 1e-3).is_err());
        assert!(horizontal_gradient_fd(|_| 1.0, &p, 0.0).is_err());
    }

    #[test]
    fn cone_examples() {
        let c = cone_bound_check(&pt(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(
            c,
            ConeCheck {
                in_cone: true,
                kernel_norm: 0.0,
                bound: 2.0
            }
        );
        let c = cone_bound_check(&pt(0.1, 0.0, 1.0)).unwrap();
        assert!(c.in_cone && c.kernel_norm <= 2.0);
        assert_eq!(cone_bound(2), 1.0);
    }

    #[test]
    fn continuity_rejects_coincident_points() {
        let p = pt(0.0, 0.0, 0.0);
        let q = pt(1.0, 0.0, 0.0);
        assert!(continuity_ratio(&p, &q, &q).is_err());
        assert!(continuity_ratio(&p, &p, &q).is_err());
    }

    #[test]
    fn inversion_flips_kernel_only_on_horizontal_slice() {
        // K(p⁻¹) = −K(p) holds when t = 0 (or z = 0); the 8 y t terms are even.
        let p = pt(0.7, -0.3, 0.0);
        let k = riesz_kernel(&p).unwrap().0;
        let ki = riesz_kernel(&inv(&p)).unwrap().0;
        assert_eq!(ki, k.iter().map(|c| -c).collect::<Vec<_>>());
        let p = pt(1.0, 1.0, 1.0);
        let k = riesz_kernel(&p).unwrap().0;
        let ki = riesz_kernel(&inv(&p)).unwrap().0;
        assert!((ki[0] + k[0]).abs() > 0.1);
    }

    proptest! {
        #[test]
        fn closed_form_norm(p in arb_nonzero(2)) {
            let k = riesz_kernel(&p).unwrap().norm();
            let c = kernel_norm_closed_form(&p).unwrap();
            prop_assert!((k - c).abs() <= 1e-12 * c.max(1e-300));
        }

        #[test]
        fn horizontal_reflection_is_odd(p in arb_nonzero(1)) {
            let r = HPoint::new(p.z().iter().map(|c| -c).collect(), p.t()).unwrap();
            let k = riesz_kernel(&p).unwrap().0;
            let kr = riesz_kernel(&r).unwrap().0;
            for (a, b) in k.iter().zip(&kr) {
                prop_assert_eq!(*a, -*b);
            }
        }

        #[test]
        fn homogeneity(p in arb_nonzero(2), lam in 0.2..5.0f64) {
            let k = riesz_kernel(&p).unwrap();
            let kl = riesz_kernel(&dilate(lam, &p).unwrap()).unwrap();
            let f = lam.powi(-5);
            for (a, b) in k.0.iter().zip(&kl.0) {
                prop_assert!((b - f * a).abs() <= 1e-12 * kl.norm().max(1e-300));
            }
        }

        #[test]
        fn cone_bound_holds(z in prop::collection::vec(-1.0..1.0f64, 2), t in 0.05..3.0f64, sign in prop::bool::ANY) {
            let t = if sign { t } else { -t };
            let p = HPoint::new(z, t).unwrap();
            let c = cone_bound_check(&p).unwrap();
            if c.in_cone {
                prop_assert!(c.kernel_norm <= c.bound * (1.0 + 1e-12));
            }
        }
    }
}
