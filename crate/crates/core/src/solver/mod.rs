//! Shooting for `-u'' - u'/r = lambda h(r) f(u)`, `u(0) = mu`, `u(1) = 0`.
//!
//! Everything runs in `t = log(1/r)` with `m = -r u'`:
//!
//! ```text
//! u_t = m,    m_t = -w,    w = exp(log lambda + g(u) + log h(r) - 2t),
//! ```
//!
//! integrated from the center (`t` large) outward. `w` is the only quantity
//! ever exponentiated and it stays O(1) across every bubble, so the same
//! step-size regime covers all scales.

mod identities;
mod rk;

pub use identities::{identity_residuals, IdentityResiduals};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::{GrowthModel, Weight};
use crate::numeric::{illinois, two_sum};
use rk::{trial_step, Accumulator, Controller, State};

/// Arithmetic used for the state accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarMode {
    #[default]
    Binary64,
    /// Compensated (two-sum) accumulation of the state and of `t`. Doubles
    /// the admissible exponent budget.
    Compensated,
}

impl std::fmt::Display for ScalarMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScalarMode::Binary64 => "binary64",
            ScalarMode::Compensated => "compensated",
        })
    }
}

impl std::str::FromStr for ScalarMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary64" => Ok(ScalarMode::Binary64),
            "compensated" | "extended" => Ok(ScalarMode::Compensated),
            _ => Err(Error::domain(format!("unknown scalar mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// `r0 = start_factor * gamma0`.
    pub start_factor: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    pub exponent_cap: f64,
    /// Shooting gives up once `t < -t_padding` without a zero crossing.
    pub t_padding: f64,
    /// Largest step in `t`.
    pub max_step: f64,
    pub scalar_mode: ScalarMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            start_factor: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 1_000_000,
            exponent_cap: crate::growth::DEFAULT_EXPONENT_CAP,
            t_padding: 50.0,
            max_step: 0.05,
            scalar_mode: ScalarMode::Binary64,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.start_factor > 0.0
            && self.start_factor <= 0.1
            && self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_steps > 0
            && self.exponent_cap > 0.0
            && self.t_padding > 0.0
            && self.max_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid solver configuration {self:?}")))
        }
    }

    /// Largest admissible `g(mu) + log g'(mu)`.
    pub fn exponent_budget(&self) -> f64 {
        match self.scalar_mode {
            ScalarMode::Binary64 => self.exponent_cap,
            ScalarMode::Compensated => 2.0 * self.exponent_cap,
        }
    }
}

/// `exp(log_value)`, refusing exponents above `cap`. Underflow to zero is
/// allowed; see [`guarded_exp_flagged`] to detect it.
pub fn guarded_exp(log_value: f64, cap: f64) -> Result<f64> {
    guarded_exp_flagged(log_value, cap).map(|(v, _)| v)
}

/// As [`guarded_exp`], also reporting whether the result underflowed to 0.
pub fn guarded_exp_flagged(log_value: f64, cap: f64) -> Result<(f64, bool)> {
    if log_value > cap || log_value.is_nan() {
        return Err(Error::ExponentCap { log_value, cap });
    }
    let v = log_value.exp();
    Ok((v, v == 0.0 && log_value > f64::NEG_INFINITY))
}

/// One shot, sampled at every accepted step. Samples run from the center
/// (largest `t`) to the boundary `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSolution {
    pub mu: f64,
    pub log_lambda: f64,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub m: Vec<f64>,
    /// `log w = log(lambda h f(u) r^2)`.
    pub log_w: Vec<f64>,
    /// Zero-crossing radius of the unit-`lambda` shot (1 when `lambda` was
    /// found by an outer root search).
    pub r_zero_pre_rescale: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Smallest accepted step, ignoring the final one cut at the boundary.
    pub min_step: f64,
    pub scalar_mode: ScalarMode,
    pub weight: Weight,
}

impl RadialSolution {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }

    pub fn r(&self, i: usize) -> f64 {
        (-self.t[i]).exp()
    }

    /// `t` of the innermost sample.
    pub fn t_center(&self) -> f64 {
        self.t[0]
    }

    pub fn w(&self, i: usize) -> f64 {
        self.log_w[i].exp()
    }

    /// Index `i` with `t[i] >= t >= t[i+1]`.
    pub fn interval(&self, t: f64) -> Option<usize> {
        let n = self.t.len();
        if n < 2 || !(t <= self.t[0] && t >= self.t[n - 1]) {
            return None;
        }
        // t is decreasing
        let idx = self.t.partition_point(|&x| x > t);
        Some(idx.saturating_sub(1).min(n - 2))
    }

    /// `(u, m)` at `t` by cubic Hermite interpolation with `u_t = m`,
    /// `m_t = -w`.
    pub fn state_at(&self, t: f64) -> Option<(f64, f64)> {
        let i = self.interval(t)?;
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        if h == 0.0 {
            return Some((self.u[i], self.m[i]));
        }
        let s = (t - t0) / h;
        let u = hermite(s, h, self.u[i], self.m[i], self.u[i + 1], self.m[i + 1]);
        let m = hermite(s, h, self.m[i], -self.w(i), self.m[i + 1], -self.w(i + 1));
        Some((u, m))
    }
}

/// Cubic Hermite on `[0, 1]` with values `y0, y1` and slopes (per unit of
/// the original variable) `d0, d1` over a step `h`.
pub(crate) fn hermite(s: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

#[derive(Clone, Copy)]
enum Stop {
    /// Stop at the first zero of `u`; give up below `t_limit`.
    Zero { t_limit: f64 },
    /// Integrate up to `t = end` exactly.
    At(f64),
}

struct Trajectory {
    t: Vec<f64>,
    u: Vec<f64>,
    m: Vec<f64>,
    log_w: Vec<f64>,
    steps: usize,
    rejected: usize,
    min_step: f64,
}

struct Problem<'a> {
    model: &'a GrowthModel,
    weight: Weight,
    log_lambda: f64,
    cap: f64,
}

impl Problem<'_> {
    fn log_w(&self, t: f64, u: f64) -> Result<f64> {
        let r = (-t).exp();
        Ok(self.log_lambda + self.model.log_f(u)? + self.weight.log_h(r.min(1.0)) - 2.0 * t)
    }

    /// Right-hand side in `sigma = -t`: `(du, dm)/dsigma = (-m, w)`.
    fn rhs(&self, sigma: f64, y: State) -> Result<State> {
        let w = guarded_exp(self.log_w(-sigma, y[0])?, self.cap)?;
        Ok([-y[1], w])
    }
}

fn check_budget(model: &GrowthModel, mu: f64, cfg: &SolverConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    if !(mu > model.t0()) || !mu.is_finite() {
        return Err(Error::domain(format!("mu = {mu} must exceed t0 = {}", model.t0())));
    }
    let v = model.evaluate(mu)?;
    if !(v.g_prime > 0.0) {
        return Err(Error::domain(format!("g'(mu) = {} must be positive", v.g_prime)));
    }
    let budget = v.g + v.g_prime.ln();
    if !(budget < cfg.exponent_budget()) {
        return Err(Error::Precision(format!(
            "g(mu) + log g'(mu) = {budget:.6} exceeds the exponent budget {} of the {} scalar mode; \
             use a smaller mu or the compensated scalar mode",
            cfg.exponent_budget(),
            cfg.scalar_mode
        )));
    }
    Ok((v.g, v.g_prime))
}

fn integrate(problem: &Problem, mu: f64, cfg: &SolverConfig, stop: Stop) -> Result<Trajectory> {
    let (g_mu, gp_mu) = (problem.model.evaluate(mu)?.g, problem.model.evaluate(mu)?.g_prime);
    let w = problem.weight;
    // gamma0^2 lambda h(0) f'(mu) = 1
    let log_gamma0 = -0.5 * (problem.log_lambda + w.log_h(0.0) + g_mu + gp_mu.ln());
    let log_r0 = cfg.start_factor.ln() + log_gamma0;
    let t0 = -log_r0;
    if let Stop::At(end) = stop {
        if !(t0 > end) {
            return Err(Error::domain(format!(
                "start radius exp({log_r0}) lies outside the disc; lambda too small"
            )));
        }
    }
    // second-order center expansion; e2 = lambda h(0) f(mu) r0^2 g'(mu)
    let e2 = cfg.start_factor * cfg.start_factor;
    let r0sq = (2.0 * log_r0).exp();
    let curv = 0.5 * w.h_second(0.0) / w.h(0.0) * (e2 / gp_mu) * r0sq;
    let u0 = mu - 0.25 * e2 / gp_mu + e2 * e2 / (64.0 * gp_mu) - curv / 16.0;
    let m0 = 0.5 * e2 / gp_mu - e2 * e2 / (16.0 * gp_mu) + curv / 4.0;

    let compensated = cfg.scalar_mode == ScalarMode::Compensated;
    let mut acc = Accumulator::new([u0, m0], compensated);
    let (mut sigma, mut sigma_carry) = (-t0, 0.0);
    let mut rhs = |s: f64, y: State| problem.rhs(s, y);
    let mut k1 = rhs(sigma, acc.value)?;
    let mut h = cfg.max_step.min(1e-2);
    let mut ctl = Controller::new();
    let mut traj = Trajectory {
        t: vec![t0],
        u: vec![u0],
        m: vec![m0],
        log_w: vec![problem.log_w(t0, u0)?],
        steps: 0,
        rejected: 0,
        min_step: f64::INFINITY,
    };

    loop {
        if traj.steps + traj.rejected >= cfg.max_steps {
            return Err(Error::NonTermination { t_limit: -sigma, last_u: acc.value[0] });
        }
        let mut last = false;
        if let Stop::At(end) = stop {
            let remaining = -end - sigma;
            if h >= remaining {
                h = remaining;
                last = true;
            }
        }
        let y = acc.value;
        let trial = match trial_step(&mut rhs, sigma, y, k1, h, cfg.rel_tol, cfg.abs_tol) {
            Ok(tr) => tr,
            Err(Error::ExponentCap { .. }) | Err(Error::Overflow { .. }) if h > 1e-12 => {
                traj.rejected += 1;
                h *= 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        if !(trial.err <= 1.0) {
            traj.rejected += 1;
            h *= ctl.reject(trial.err);
            if h < 1e-14 {
                return Err(Error::internal(format!("step size underflow at t = {}", -sigma)));
            }
            continue;
        }
        let next = acc.add(trial.delta);
        let (mut sigma_next, mut carry_next) = (sigma + h, 0.0);
        if compensated {
            let (s, e) = two_sum(sigma, h + sigma_carry);
            sigma_next = s;
            carry_next = e;
        }
        if last {
            if let Stop::At(end) = stop {
                sigma_next = -end;
            }
        }
        if !(next.value[1] >= 0.0) {
            return Err(Error::internal(format!(
                "m = {} < 0 at t = {}: monotonicity violated",
                next.value[1], -sigma_next
            )));
        }
        traj.steps += 1;

        if let Stop::Zero { t_limit } = stop {
            if next.value[0] <= 0.0 {
                // secant (Illinois) on the step length from the last accepted point
                let u_at = |hh: f64| -> Result<f64> {
                    if hh == 0.0 {
                        return Ok(y[0]);
                    }
                    let tr = trial_step(&mut |s, yy| problem.rhs(s, yy), sigma, y, k1, hh, cfg.rel_tol, cfg.abs_tol)?;
                    Ok(acc.add(tr.delta).value[0])
                };
                let (hz, _) = illinois(u_at, 0.0, h, cfg.abs_tol, 0.0, 50)?;
                let tr = trial_step(&mut |s, yy| problem.rhs(s, yy), sigma, y, k1, hz, cfg.rel_tol, cfg.abs_tol)?;
                let fin = acc.add(tr.delta);
                let t_zero = -(sigma + hz) - sigma_carry;
                traj.t.push(t_zero);
                traj.u.push(0.0);
                traj.m.push(fin.value[1]);
                traj.log_w.push(problem.log_w(t_zero, 0.0)?);
                return Ok(traj);
            }
            if -sigma_next < t_limit {
                return Err(Error::NonTermination { t_limit, last_u: next.value[0] });
            }
        }

        if !last {
            traj.min_step = traj.min_step.min(h);
        }
        acc = next;
        sigma = sigma_next;
        sigma_carry = carry_next;
        let t_now = -sigma - sigma_carry;
        traj.t.push(t_now);
        traj.u.push(acc.value[0]);
        traj.m.push(acc.value[1]);
        traj.log_w.push(problem.log_w(t_now, acc.value[0])?);
        if last {
            return Ok(traj);
        }
        k1 = trial.k_last;
        h = (h * ctl.accept(trial.err)).min(cfg.max_step);
    }
}

/// Shoots with `lambda = 1` until `u` vanishes at some radius `R`, then
/// rescales `r -> r/R` so that `u(1) = 0` and `lambda = R^2`. Needs constant
/// `h`.
pub fn shoot_unit_lambda(
    model: &GrowthModel,
    weight: Weight,
    mu: f64,
    cfg: &SolverConfig,
) -> Result<RadialSolution> {
    if !weight.is_constant() {
        return Err(Error::domain("unit-lambda shooting needs a constant weight; use shoot_general"));
    }
    check_budget(model, mu, cfg)?;
    let problem = Problem { model, weight, log_lambda: 0.0, cap: cfg.exponent_cap };
    let traj = integrate(&problem, mu, cfg, Stop::Zero { t_limit: -cfg.t_padding })?;
    let t_zero = *traj.t.last().expect("non-empty");
    let t = traj.t.iter().map(|&x| x - t_zero).collect();
    Ok(RadialSolution {
        mu,
        log_lambda: -2.0 * t_zero,
        t,
        u: traj.u,
        m: traj.m,
        log_w: traj.log_w,
        r_zero_pre_rescale: (-t_zero).exp(),
        steps: traj.steps,
        rejected: traj.rejected,
        min_step: traj.min_step,
        scalar_mode: cfg.scalar_mode,
        weight,
    })
}

/// Finds `lambda` in `lambda_bracket` with `u(1) = 0` by Illinois iteration
/// on `log lambda`, integrating to the boundary for every trial.
pub fn shoot_general(
    model: &GrowthModel,
    weight: Weight,
    mu: f64,
    cfg: &SolverConfig,
    lambda_bracket: (f64, f64),
) -> Result<RadialSolution> {
    let (lo, hi) = lambda_bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Bracketing(format!(
            "lambda bracket [{lo}, {hi}] must satisfy 0 < lo < hi"
        )));
    }
    check_budget(model, mu, cfg)?;
    let shoot = |log_lambda: f64| -> Result<Trajectory> {
        let problem = Problem { model, weight, log_lambda, cap: cfg.exponent_cap };
        integrate(&problem, mu, cfg, Stop::At(0.0))
    };
    let boundary = |log_lambda: f64| -> Result<f64> {
        Ok(*shoot(log_lambda)?.u.last().expect("non-empty"))
    };
    let (log_lambda, _) = illinois(boundary, lo.ln(), hi.ln(), cfg.abs_tol, 1e-15, 200)?;
    let traj = shoot(log_lambda)?;
    Ok(RadialSolution {
        mu,
        log_lambda,
        t: traj.t,
        u: traj.u,
        m: traj.m,
        log_w: traj.log_w,
        r_zero_pre_rescale: 1.0,
        steps: traj.steps,
        rejected: traj.rejected,
        min_step: traj.min_step,
        scalar_mode: cfg.scalar_mode,
        weight,
    })
}

/// Unit-`lambda` shooting when `h` is constant. Otherwise [`shoot_general`]
/// on a bracket seeded by the `h = 1` shot, `lambda_1 / max h` to
/// `lambda_1 / min h`, widened until `u(1)` changes sign.
pub fn shoot(model: &GrowthModel, weight: Weight, mu: f64, cfg: &SolverConfig) -> Result<RadialSolution> {
    if weight.is_constant() {
        return shoot_unit_lambda(model, weight, mu, cfg);
    }
    let unit = shoot_unit_lambda(model, Weight::default(), mu, cfg)?;
    let (h0, h1) = (weight.h(0.0), weight.h(1.0));
    let (hmin, hmax) = (h0.min(h1), h0.max(h1));
    let mut lo = unit.lambda() / hmax * 0.9;
    let mut hi = unit.lambda() / hmin * 1.1;
    let mut last = None;
    for _ in 0..20 {
        match shoot_general(model, weight, mu, cfg, (lo, hi)) {
            Err(e @ (Error::Bracketing(_) | Error::Domain(_))) => {
                last = Some(e);
                lo *= 0.5;
                hi *= 2.0;
            }
            other => return other,
        }
    }
    Err(last.unwrap_or_else(|| Error::internal("bracket search did not run")))
}
