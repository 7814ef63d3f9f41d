//! Scaling function `phi = lambda r^2 h f'(u)` and energy function
//! `psi = g'(u) m` along a shot, bubble detection and the trend report.
//!
//! In `t` both are smooth with exact derivatives:
//!
//! ```text
//! d log phi / dt = psi (1 + g''/g'^2) - r h'/h - 2,
//! ```
//!
//! so peaks of `phi` are located as roots of this expression rather than by
//! sampling.

mod detect;
mod report;

pub use detect::{
    total_energy, total_scaled_mass,
    detect_bubbles, rescale_window, window_energies, ConcentrationEvent, DetectOptions, Rescaled,
    WindowEnergies, WindowRule,
};
pub use report::{asymptotics_report, AsymptoticsReport, EventRow, Metric, RunRow, Trend};

use serde::Serialize;

use crate::error::Result;
use crate::growth::GrowthModel;
use crate::solver::RadialSolution;

/// Per-sample `phi` (as `log phi`) and `psi` on the solution grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingDiagnostics {
    pub t: Vec<f64>,
    pub log_phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// `d log phi / dt` from the closed form.
    pub dlog_phi: Vec<f64>,
    /// `u >= t0` and `g' > 0`; the other entries are NaN.
    pub valid: Vec<bool>,
}

impl ScalingDiagnostics {
    pub fn phi(&self, i: usize) -> f64 {
        self.log_phi[i].exp()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// `(log phi, psi, d log phi/dt)` at one point; `None` below `t0` or where
/// `g'` vanishes.
pub(crate) fn point_values(
    sol: &RadialSolution,
    model: &GrowthModel,
    t: f64,
    u: f64,
    m: f64,
) -> Option<(f64, f64, f64)> {
    if u < model.t0() {
        return None;
    }
    let v = model.eval_ext(u).ok()?;
    if !(v.g_prime > 0.0) {
        return None;
    }
    let r = (-t).exp();
    let log_phi = sol.log_lambda - 2.0 * t + sol.weight.log_h(r) + v.g + v.g_prime.ln();
    let psi = v.g_prime * m;
    let d = psi + v.g_second * m / v.g_prime - sol.weight.log_slope(r) - 2.0;
    Some((log_phi, psi, d))
}

pub fn compute_diagnostics(sol: &RadialSolution, model: &GrowthModel) -> ScalingDiagnostics {
    let n = sol.len();
    let mut d = ScalingDiagnostics {
        t: sol.t.clone(),
        log_phi: Vec::with_capacity(n),
        psi: Vec::with_capacity(n),
        dlog_phi: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
    };
    for i in 0..n {
        match point_values(sol, model, sol.t[i], sol.u[i], sol.m[i]) {
            Some((lp, psi, dl)) => {
                d.log_phi.push(lp);
                d.psi.push(psi);
                d.dlog_phi.push(dl);
                d.valid.push(true);
            }
            None => {
                d.log_phi.push(f64::NAN);
                d.psi.push(f64::NAN);
                d.dlog_phi.push(f64::NAN);
                d.valid.push(false);
            }
        }
    }
    d
}

/// Worst deviations in the derivative identity for `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub samples: usize,
    /// `max |D_discrete - D_exact| / (1 + |D_exact|)` with `D = d log phi/dt`
    /// and a centered difference of the sampled `log phi`, over the samples
    /// where the `eps` bound is below 1 (elsewhere `log g'` is too curved
    /// for a three-point rule).
    pub discrete_error: f64,
    /// `max |eps| / (2 g''/g'^2 + |r h'/h| / psi)` where
    /// `r phi'/phi = 2 - psi (1 + eps)`; at most 1 when the bound holds.
    pub eps_ratio: f64,
}

pub fn derivative_check(diag: &ScalingDiagnostics, sol: &RadialSolution, model: &GrowthModel) -> Result<DerivativeCheck> {
    let mut out = DerivativeCheck { samples: 0, discrete_error: 0.0, eps_ratio: 0.0 };
    for i in 1..diag.len().saturating_sub(1) {
        if !(diag.valid[i - 1] && diag.valid[i] && diag.valid[i + 1]) || !(diag.psi[i] > 0.0) {
            continue;
        }
        let (ta, tb) = (diag.t[i - 1], diag.t[i + 1]);
        let (ha, hb) = (ta - diag.t[i], diag.t[i] - tb);
        // three-point derivative on a nonuniform grid
        let disc = (hb * hb * (diag.log_phi[i - 1] - diag.log_phi[i])
            + ha * ha * (diag.log_phi[i] - diag.log_phi[i + 1]))
            / (ha * hb * (ha + hb));
        let exact = diag.dlog_phi[i];
        let v = model.eval_ext(sol.u[i])?;
        let psi = diag.psi[i];
        let rho = sol.weight.log_slope(sol.r(i));
        // r phi'/phi = -D
        let eps = (2.0 + exact) / psi - 1.0;
        let bound = 2.0 * v.g_second / (v.g_prime * v.g_prime) + rho.abs() / psi;
        if bound < 1.0 {
            out.discrete_error = out.discrete_error.max((disc - exact).abs() / (1.0 + exact.abs()));
        }
        let ratio = if bound > 0.0 { eps.abs() / bound } else if eps.abs() < 1e-12 { 0.0 } else { f64::INFINITY };
        out.eps_ratio = out.eps_ratio.max(ratio);
        out.samples += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::{Family, Weight};
    use crate::solver::{shoot_general, shoot_unit_lambda, SolverConfig};

    #[test]
    fn gelfand_phi_closed_form() {
        let mu = 3.0;
        let sol = shoot_unit_lambda(&GrowthModel::gelfand(), Weight::default(), mu, &SolverConfig::default()).unwrap();
        let d = compute_diagnostics(&sol, &GrowthModel::gelfand());
        let alpha = (0.5 * mu).exp() - 1.0;
        for i in (0..sol.len()).step_by(17) {
            let r = sol.r(i);
            let x = alpha * r * r;
            let exact = 8.0 * x / (1.0 + x).powi(2);
            assert!((d.phi(i) - exact).abs() < 1e-8 * exact.max(1e-3), "{r}: {} vs {exact}", d.phi(i));
            assert!(d.valid[i] && d.psi[i] >= 0.0);
        }
        // phi -> 0 at the center
        assert!(d.phi(0) < 1e-5);
    }

    #[test]
    fn lemma_d1_identity() {
        let model = GrowthModel::new(Family::PowerExp { p: 3.0 }).unwrap();
        let sol = shoot_unit_lambda(&model, Weight::default(), 120f64.cbrt(), &SolverConfig::default()).unwrap();
        let d = compute_diagnostics(&sol, &model);
        let c = derivative_check(&d, &sol, &model).unwrap();
        assert!(c.samples > 100);
        assert!(c.discrete_error < 1e-3, "{c:?}");
        assert!(c.eps_ratio <= 1.0 + 1e-9, "{c:?}");

        let w = Weight::quadratic(1.0, 0.5).unwrap();
        let sol = shoot_general(&GrowthModel::gelfand(), w, 1.0, &SolverConfig::default(), (0.5, 1.9)).unwrap();
        let d = compute_diagnostics(&sol, &GrowthModel::gelfand());
        let c = derivative_check(&d, &sol, &GrowthModel::gelfand()).unwrap();
        assert!(c.eps_ratio <= 1.0 + 1e-9, "{c:?}");
    }

    #[test]
    fn below_t0_is_flagged() {
        let model = GrowthModel::new(Family::PowerExpLog { p: 2.0, l: 1.0 }).unwrap();
        let mu = model.inverse_g(150.0).unwrap();
        let sol = shoot_unit_lambda(&model, Weight::default(), mu, &SolverConfig::default()).unwrap();
        let d = compute_diagnostics(&sol, &model);
        let last = d.len() - 1;
        assert!(!d.valid[last] && d.log_phi[last].is_nan());
        assert!(d.valid[0]);
    }
}
