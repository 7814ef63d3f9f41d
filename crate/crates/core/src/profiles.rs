//! Radial solutions of the Liouville equation `-z'' - z'/r = e^z` on the
//! plane: the regular profile
//!
//! ```text
//! z_0(r) = log(64 / (8 + r^2)^2),                          mass 4,
//! ```
//!
//! and the singular tower profiles, for `a in (0, 2]` and `b = (sqrt2/a)^a`,
//!
//! ```text
//! z(r) = log(2 a^2 b / (r^{2-a} (1 + b r^a)^2)),            mass 2a,
//! ```
//!
//! normalized so that `z(a/sqrt2) = 0` and `(a/sqrt2) z'(a/sqrt2) = -2`.
//! Mass means `int_0^inf e^z r dr`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{integrate, log_add_exp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BubbleProfile {
    Regular0,
    /// `b` is kept as `log b = a log(sqrt2/a)`.
    Tower { a: f64, log_b: f64 },
}

/// `(z, z', z'')` at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileValues {
    pub z: f64,
    pub z_prime: f64,
    pub z_second: f64,
}

impl BubbleProfile {
    pub fn tower(a: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 2.0) {
            return Err(Error::domain(format!("tower profile needs a in (0, 2], got {a}")));
        }
        Ok(BubbleProfile::Tower { a, log_b: a * (std::f64::consts::SQRT_2 / a).ln() })
    }

    pub fn b(&self) -> Option<f64> {
        match *self {
            BubbleProfile::Regular0 => None,
            BubbleProfile::Tower { log_b, .. } => Some(log_b.exp()),
        }
    }

    /// Analytic mass: 4, or `2a`.
    pub fn mass(&self) -> f64 {
        match *self {
            BubbleProfile::Regular0 => 4.0,
            BubbleProfile::Tower { a, .. } => 2.0 * a,
        }
    }

    /// `lim r^2 e^z` behaviour: `r^2 e^z` peaks at `(r_peak, value)`.
    pub fn peak(&self) -> (f64, f64) {
        match *self {
            BubbleProfile::Regular0 => (8f64.sqrt(), 2.0),
            BubbleProfile::Tower { a, .. } => (a / std::f64::consts::SQRT_2, 0.5 * a * a),
        }
    }

    /// `log(r^2 e^{z(r)})` as a function of `s = log r`, usable far outside
    /// the range where `r` itself is representable.
    pub fn log_r2_density(&self, s: f64) -> f64 {
        match *self {
            BubbleProfile::Regular0 => 64f64.ln() + 2.0 * s - 2.0 * log_add_exp(8f64.ln(), 2.0 * s),
            BubbleProfile::Tower { a, log_b } => {
                (2.0 * a * a).ln() + log_b + a * s - 2.0 * log_add_exp(0.0, log_b + a * s)
            }
        }
    }

    /// `z(r)` only; valid at `r = 0` where the profile is regular.
    pub fn z(&self, r: f64) -> Result<f64> {
        eval_profile(self, r).map(|v| v.z)
    }
}

pub fn eval_profile(profile: &BubbleProfile, r: f64) -> Result<ProfileValues> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("profile radius must be finite and >= 0, got {r}")));
    }
    match *profile {
        BubbleProfile::Regular0 => {
            let d = 8.0 + r * r;
            Ok(ProfileValues {
                z: 64f64.ln() - 2.0 * d.ln(),
                z_prime: -4.0 * r / d,
                z_second: -4.0 * (8.0 - r * r) / (d * d),
            })
        }
        BubbleProfile::Tower { a, log_b } => {
            if r == 0.0 {
                if a != 2.0 {
                    return Err(Error::domain(format!(
                        "tower profile with a = {a} < 2 is singular at r = 0"
                    )));
                }
                // b r^2 expansion at the origin
                let b = log_b.exp();
                return Ok(ProfileValues {
                    z: (8.0 * b).ln(),
                    z_prime: 0.0,
                    z_second: -4.0 * b,
                });
            }
            let lr = r.ln();
            let log_w = log_b + a * lr;
            let w = log_w.exp();
            // log(1 + w) without overflow for large w
            let log1p_w = if log_w > 30.0 { log_w + (-log_w).exp().ln_1p() } else { w.ln_1p() };
            // s = w/(1+w) and w/(1+w)^2 in overflow-free forms
            let s = 1.0 / (1.0 + (-log_w).exp());
            let s2 = s * (1.0 - s);
            Ok(ProfileValues {
                z: (2.0 * a * a).ln() + log_b - (2.0 - a) * lr - 2.0 * log1p_w,
                z_prime: ((a - 2.0) - 2.0 * a * s) / r,
                z_second: (-(a - 2.0) - 2.0 * a * (a * s2 - s)) / (r * r),
            })
        }
    }
}

/// Analytic mass and a quadrature of `int e^{z + 2s} ds` in `s = log r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassCheck {
    pub analytic: f64,
    pub quadrature: f64,
    pub relative_error: f64,
}

pub fn profile_mass(profile: &BubbleProfile) -> MassCheck {
    let analytic = profile.mass();
    // r^2 e^z decays like r^a at 0 and r^{-a} at infinity (a = 2 for z_0)
    let (center, decay) = match *profile {
        BubbleProfile::Regular0 => (8f64.sqrt().ln(), 2.0),
        BubbleProfile::Tower { a, .. } => ((a / std::f64::consts::SQRT_2).ln(), a),
    };
    let half = (40.0 + (1.0 / decay).ln().max(0.0)) / decay;
    let integrand = |s: f64| profile.log_r2_density(s).exp();
    // pieces about one decay length wide so no piece looks flat to the rule
    let pieces = (2.0 * half * decay).ceil() as usize;
    let width = 2.0 * half / pieces as f64;
    let quadrature: f64 = (0..pieces)
        .map(|i| {
            let lo = center - half + i as f64 * width;
            integrate(integrand, lo, lo + width, 0.0, 1e-13).0
        })
        .sum();
    MassCheck { analytic, quadrature, relative_error: (quadrature - analytic).abs() / analytic }
}

/// `max |(-z'' - z'/r - e^z)| / e^z` over the grid for an arbitrary radial
/// function given as `(z, z', z'')`.
pub fn ode_residual_of<F: Fn(f64) -> Result<ProfileValues>>(z: F, grid: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &r in grid {
        if !(r > 0.0) {
            return Err(Error::domain(format!("residual grid needs r > 0, got {r}")));
        }
        let v = z(r)?;
        let ez = v.z.exp();
        worst = worst.max((-v.z_second - v.z_prime / r - ez).abs() / ez);
    }
    Ok(worst)
}

pub fn ode_residual(profile: &BubbleProfile, grid: &[f64]) -> Result<f64> {
    ode_residual_of(|r| eval_profile(profile, r), grid)
}

/// `(r*, z(r*), r* z'(r*))` at `r* = a/sqrt2`; expected `(a/sqrt2, 0, -2)`.
pub fn normalization_data(profile: &BubbleProfile) -> Result<(f64, f64, f64)> {
    match *profile {
        BubbleProfile::Regular0 => Err(Error::domain(
            "normalization point is defined for tower profiles only",
        )),
        BubbleProfile::Tower { a, .. } => {
            let r = a / std::f64::consts::SQRT_2;
            let v = eval_profile(profile, r)?;
            Ok((r, v.z, r * v.z_prime))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::geomspace;

    #[test]
    fn regular_at_origin() {
        let v = eval_profile(&BubbleProfile::Regular0, 0.0).unwrap();
        assert_eq!((v.z, v.z_prime), (0.0, 0.0));
        assert!((v.z_second + 0.5).abs() < 1e-15);
    }

    #[test]
    fn tower_two_matches_closed_form() {
        let p = BubbleProfile::tower(2.0).unwrap();
        assert!((p.b().unwrap() - 0.5).abs() < 1e-15);
        for r in [0.0, 0.3, 2f64.sqrt(), 5.0] {
            let z = p.z(r).unwrap();
            let direct = (4.0 / (1.0 + r * r / 2.0).powi(2)).ln();
            assert!((z - direct).abs() < 1e-14, "{r}");
        }
        assert!(p.z(2f64.sqrt()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn singular_origin_rejected() {
        let p = BubbleProfile::tower(1.0).unwrap();
        assert!(matches!(eval_profile(&p, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_at_normalization_point() {
        let p = BubbleProfile::tower(1.0).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((r * eval_profile(&p, r).unwrap().z_prime + 2.0).abs() < 1e-14);
        for a in [2.0, 1.0, 0.1] {
            let (rs, z, rz) = normalization_data(&BubbleProfile::tower(a).unwrap()).unwrap();
            assert!((rs - a / 2f64.sqrt()).abs() < 1e-16);
            assert!(z.abs() < 1e-10 && (rz + 2.0).abs() < 1e-10);
        }
        assert!(normalization_data(&BubbleProfile::Regular0).is_err());
    }

    #[test]
    fn masses() {
        assert!(profile_mass(&BubbleProfile::Regular0).relative_error < 1e-8);
        for a in [2.0, 1.4641, 1.0, 0.5, 0.1, 1e-3] {
            let m = profile_mass(&BubbleProfile::tower(a).unwrap());
            assert!(m.relative_error < 1e-8, "{a}: {m:?}");
        }
    }

    #[test]
    fn ode_residuals_small() {
        let g = geomspace(1e-3, 1e3, 400);
        assert!(ode_residual(&BubbleProfile::Regular0, &g).unwrap() < 1e-9);
        let g = geomspace(1e-6, 1e6, 600);
        assert!(ode_residual(&BubbleProfile::tower(0.5).unwrap(), &g).unwrap() < 1e-9);
    }

    #[test]
    fn perturbed_profile_is_detected() {
        let p = BubbleProfile::tower(1.0).unwrap();
        let g = geomspace(1e-2, 1e2, 50);
        let res = ode_residual_of(
            |r| eval_profile(&p, r).map(|v| ProfileValues { z: v.z + 0.01, ..v }),
            &g,
        )
        .unwrap();
        assert!((res - (1.0 - (-0.01f64).exp())).abs() < 1e-9, "{res}");
    }

    #[test]
    fn tails_and_singularity() {
        for a in [0.5, 1.0, 1.5] {
            let p = BubbleProfile::tower(a).unwrap();
            let big = 1e8;
            let rz = big * eval_profile(&p, big).unwrap().z_prime;
            assert!((rz + 2.0 + a).abs() < 1e-4);
            let small = 1e-8;
            let bounded = p.z(small).unwrap() - (2.0 - a) * (1.0 / small).ln();
            assert!(bounded.abs() < 10.0);
        }
    }

    #[test]
    fn peak_of_scaled_density() {
        for a in [2.0, 1.0, 0.3] {
            let p = BubbleProfile::tower(a).unwrap();
            let (rp, val) = p.peak();
            let at = |r: f64| r * r * p.z(r).unwrap().exp();
            assert!((at(rp) - a * a / 2.0).abs() < 1e-14);
            assert!(at(rp * 1.01) < at(rp) && at(rp * 0.99) < at(rp));
            assert_eq!(val, a * a / 2.0);
        }
    }
}
