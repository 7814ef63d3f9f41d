//! Green and Pohozaev identities evaluated on a computed shot.
//!
//! All integrals run over the sample grid in `t` with the Hermite-corrected
//! trapezoid rule (`h/2 (f0 + f1) + h^2/12 (f0' - f1')`), which is fourth
//! order using the exact `t`-derivatives available from the ODE. The part
//! `t > t_center` is added in closed form from `w ~ e^{-2t}` there.

use serde::Serialize;

use super::RadialSolution;
use crate::error::{Error, Result};
use crate::growth::GrowthModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `|mu - u(1) - int_0^1 lambda h f(u) s log(1/s) ds| / mu`.
    pub id1: f64,
    /// Two-radius Green identity, relative to `|u(r) - u(s)|`.
    pub id2: f64,
    /// Pohozaev identity at `r = 1`, relative to `(r u')^2`.
    pub pohozaev: f64,
}

/// Integral over samples `lo..=hi` (indices into the decreasing grid) of a
/// function given with its `t`-derivative.
fn hermite_sum(t: &[f64], f: &[f64], df: &[f64], lo: usize, hi: usize) -> f64 {
    let mut s = 0.0;
    for i in lo..hi {
        let h = t[i] - t[i + 1];
        // interval [t[i+1], t[i]]: endpoints a = i+1, b = i
        s += 0.5 * h * (f[i + 1] + f[i]) + h * h / 12.0 * (df[i + 1] - df[i]);
    }
    s
}

/// `F(u)` scaled as `exp(extra + log F(u))`, with the linearization
/// `F(u) ~ f(0) u` for `u <= 0`.
fn scaled_f_integral(model: &GrowthModel, u: f64, extra: f64) -> Result<f64> {
    if u > 0.0 {
        Ok((extra + model.antiderivative_log(u)?).exp())
    } else {
        Ok(u * (extra + model.log_f(0.0)?).exp())
    }
}

pub fn identity_residuals(sol: &RadialSolution, model: &GrowthModel) -> Result<IdentityResiduals> {
    let n = sol.len();
    if n < 100 {
        return Err(Error::domain(format!("identity residuals need >= 100 samples, got {n}")));
    }
    let weight = sol.weight;
    let t = &sol.t;
    let last = n - 1;
    let t_c = t[0];

    let mut w = Vec::with_capacity(n);
    let mut dw = Vec::with_capacity(n);
    for i in 0..n {
        let wi = sol.w(i);
        let r = sol.r(i);
        let gp = model.eval_ext(sol.u[i])?.g_prime;
        w.push(wi);
        dw.push(wi * (gp * sol.m[i] - weight.log_slope(r) - 2.0));
    }

    // id1
    let wt: Vec<f64> = (0..n).map(|i| w[i] * t[i]).collect();
    let dwt: Vec<f64> = (0..n).map(|i| w[i] + t[i] * dw[i]).collect();
    let rhs1 = hermite_sum(t, &wt, &dwt, 0, last) + w[0] * (0.5 * t_c + 0.25);
    let id1 = ((sol.mu - sol.u[last]) - rhs1).abs() / sol.mu;

    // id2 between the samples nearest t_c * 2/3 (inner) and t_c / 3 (outer)
    let nearest = |target: f64| -> usize {
        (0..n)
            .min_by(|&a, &b| (t[a] - target).abs().total_cmp(&(t[b] - target).abs()))
            .expect("non-empty")
    };
    let (ir, is) = (nearest(t_c * 2.0 / 3.0), nearest(t_c / 3.0));
    let (tr, ts) = (t[ir], t[is]);
    let inner_mass = hermite_sum(t, &w, &dw, 0, ir) + 0.5 * w[0];
    let wts: Vec<f64> = (0..n).map(|i| w[i] * (t[i] - ts)).collect();
    let dwts: Vec<f64> = (0..n).map(|i| w[i] + (t[i] - ts) * dw[i]).collect();
    let rhs2 = (tr - ts) * inner_mass + hermite_sum(t, &wts, &dwts, ir, is);
    let lhs2 = sol.u[ir] - sol.u[is];
    let id2 = if lhs2 != 0.0 { (lhs2 - rhs2).abs() / lhs2.abs() } else { (lhs2 - rhs2).abs() };

    // Pohozaev: Q = lambda e^{-2t} F(u) k(r), k = h + r h'/2
    let mut q = Vec::with_capacity(n);
    let mut dq = Vec::with_capacity(n);
    for i in 0..n {
        let r = sol.r(i);
        let h = weight.h(r);
        let k = h + 0.5 * r * weight.h_prime(r);
        let dk = -r * (1.5 * weight.h_prime(r) + 0.5 * r * weight.h_second(r));
        let qi = scaled_f_integral(model, sol.u[i], sol.log_lambda - 2.0 * t[i] + k.ln())?;
        q.push(qi);
        dq.push(qi * (-2.0 + dk / k) + w[i] * sol.m[i] * k / h);
    }
    let integral = hermite_sum(t, &q, &dq, 0, last) + 0.5 * q[0];
    let boundary = 2.0 * scaled_f_integral(model, sol.u[last], sol.log_lambda + weight.h(1.0).ln())?;
    let m1 = sol.m[last];
    let pohozaev = (m1 * m1 - 4.0 * integral + boundary).abs() / (m1 * m1);

    Ok(IdentityResiduals { id1, id2, pohozaev })
}
