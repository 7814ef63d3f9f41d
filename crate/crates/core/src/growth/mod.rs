//! Generalized exponential nonlinearities `f = e^g`.
//!
//! Four families are provided:
//!
//! | tag             | `g(t)`                              | `(q, p)`            |
//! |-----------------|-------------------------------------|---------------------|
//! | `power-exp`     | `t^p`                               | `(p/(p-1), p)`      |
//! | `power-exp-log` | `t^p (log t)^l`                     | `(p/(p-1), p)`      |
//! | `multi-exp`     | `exp_{k-1}(t^m (log t)^l)`          | `(1, inf)`          |
//! | `pure-exp`      | `t` (Gelfand, validation only)      | `(inf, 1)`          |
//!
//! All derivatives are closed-form. Values that are fed to `exp` are checked
//! against an exponent cap instead of being allowed to overflow.
//!
//! Below the point where the closed form is defined (`floor`), `g` is extended
//! by its tangent line (or by a constant when the floor is the origin), so the
//! solver can evaluate `f(u)` on all of `[0, inf)` and slightly below.

mod antiderivative;
mod lemmas;
mod spec;
mod weight;

pub use lemmas::{
    check_h1, decreasing_with_slack, default_lemma_table, lemma_ladder, q_p_estimate, verify_growth_lemmas,
    NOISE_FLOOR, Clause, H1Report, LemmaRow, LemmaTable, QpRow,
    QpTable,
};
pub use spec::{parse_family, parse_pairs};
pub use weight::Weight;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};

/// Default cap on any exponent passed to `exp`.
pub const DEFAULT_EXPONENT_CAP: f64 = 700.0;

/// A growth exponent in `[1, inf]` (or `(1, inf]`), with `inf` as a tag.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    /// `1/x` with `1/inf = 0`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(x) => 1.0 / x,
            Exponent::Infinite => 0.0,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Exponent::Finite(x) => x,
            Exponent::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(x) => write!(f, "{x}"),
            Exponent::Infinite => f.write_str("inf"),
        }
    }
}

/// Named nonlinearity families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    PowerExp { p: f64 },
    PowerExpLog { p: f64, l: f64 },
    MultiExp { k: u32, m: f64, l: f64 },
    PureExp,
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::PowerExp { .. } => "power-exp",
            Family::PowerExpLog { .. } => "power-exp-log",
            Family::MultiExp { .. } => "multi-exp",
            Family::PureExp => "pure-exp",
        }
    }

    /// Nominal `(q, p)` pair.
    pub fn nominal(&self) -> (Exponent, Exponent) {
        match *self {
            Family::PowerExp { p } | Family::PowerExpLog { p, .. } => {
                (Exponent::Finite(p / (p - 1.0)), Exponent::Finite(p))
            }
            Family::MultiExp { .. } => (Exponent::Finite(1.0), Exponent::Infinite),
            Family::PureExp => (Exponent::Infinite, Exponent::Finite(1.0)),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("parameter {name} must be finite, got {v}")))
            }
        };
        match *self {
            Family::PowerExp { p } => {
                finite("p", p)?;
                if p <= 0.0 {
                    return Err(Error::domain(format!("power-exp needs p > 0, got {p}")));
                }
            }
            Family::PowerExpLog { p, l } => {
                finite("p", p)?;
                finite("l", l)?;
                if p <= 0.0 {
                    return Err(Error::domain(format!("power-exp-log needs p > 0, got {p}")));
                }
            }
            Family::MultiExp { k, m, l } => {
                finite("m", m)?;
                finite("l", l)?;
                if k < 2 {
                    return Err(Error::domain(format!("multi-exp needs k >= 2, got {k}")));
                }
                if m <= 0.0 {
                    return Err(Error::domain(format!("multi-exp needs m > 0, got {m}")));
                }
            }
            Family::PureExp => {}
        }
        Ok(())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::PowerExp { p } => write!(f, "power-exp:p={p}"),
            Family::PowerExpLog { p, l } => write!(f, "power-exp-log:p={p},l={l}"),
            Family::MultiExp { k, m, l } => write!(f, "multi-exp:k={k},m={m},l={l}"),
            Family::PureExp => f.write_str("pure-exp"),
        }
    }
}

/// `g`, `g'`, `g''` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GValues {
    pub g: f64,
    pub g_prime: f64,
    pub g_second: f64,
}

/// Stages of `exp_{k-1}(g0)`: `stages[0] = g0`, `stages[i] = exp(stages[i-1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    pub stages: Vec<f64>,
}

impl Tower {
    /// `log(stages[i])`, which is `stages[i-1]` by construction.
    pub fn log_of_stage(&self, i: usize) -> Option<f64> {
        if i == 0 || i >= self.stages.len() {
            None
        } else {
            Some(self.stages[i - 1])
        }
    }
}

/// A nonlinearity with its evaluation thresholds.
///
/// Cloning is cheap; clones share the antiderivative cache.
#[derive(Debug, Clone)]
pub struct GrowthModel {
    family: Family,
    t0: f64,
    floor: f64,
    floor_values: GValues,
    cap: f64,
    h1_exempt: bool,
    f_cache: Arc<RwLock<HashMap<u64, f64>>>,
}

/// `t^p (log t)^l` and its first two derivatives.
fn power_log(t: f64, p: f64, l: f64) -> GValues {
    if l == 0.0 {
        return GValues {
            g: t.powf(p),
            g_prime: if p == 0.0 { 0.0 } else { p * t.powf(p - 1.0) },
            // avoid 0 * inf at t = 0 for integer exponents
            g_second: if p == 0.0 || p == 1.0 { 0.0 } else { p * (p - 1.0) * t.powf(p - 2.0) },
        };
    }
    let lt = t.ln();
    let g = (p * lt + l * lt.ln()).exp();
    let g_prime = g * (p * lt + l) / (t * lt);
    let g_second =
        g / (t * t * lt * lt) * ((p - 1.0) * p * lt * lt + (2.0 * p - 1.0) * l * lt + l * (l - 1.0));
    GValues { g, g_prime, g_second }
}

/// Log of `(t+d)^p (log(t+d))^l / (t^p (log t)^l)`, accurate for small `d`.
fn power_log_log_ratio(t: f64, d: f64, p: f64, l: f64) -> f64 {
    let x = (d / t).ln_1p();
    if l == 0.0 {
        p * x
    } else {
        p * x + l * (x / t.ln()).ln_1p()
    }
}

impl GrowthModel {
    /// Builds a model and verifies the (H1) monotonicity, range and
    /// multi-exp clauses from `t0` to the overflow ceiling.
    pub fn new(family: Family) -> Result<Self> {
        if family == Family::PureExp {
            return Err(Error::domain(
                "pure-exp has g'' = 0 and violates (H1); use GrowthModel::gelfand()",
            ));
        }
        let model = Self::unchecked(family)?;
        let report = check_h1(&model, 0.05);
        let mut failures = Vec::new();
        if !report.monotonicity.ok {
            failures.push(format!(
                "g' > 0, g'' > 0 fails at t = {}",
                report.monotonicity.worst_t
            ));
        }
        if !report.range.ok {
            failures.push(format!("p = {} must exceed 1", model.nominal_p()));
        }
        if !report.clause_ii.ok {
            failures.push(format!(
                "multi-exp monotonicity clause fails at t = {}",
                report.clause_ii.worst_t
            ));
        }
        if failures.is_empty() {
            Ok(model)
        } else {
            Err(Error::domain(format!("{family}: {}", failures.join("; "))))
        }
    }

    /// Builds a model without the (H1) checks (parameters are still sanity
    /// checked). Used for diagnostics on families that fail (H1).
    pub fn unchecked(family: Family) -> Result<Self> {
        family.validate()?;
        let mut model = GrowthModel {
            family,
            t0: 0.0,
            floor: 0.0,
            floor_values: GValues { g: 0.0, g_prime: 0.0, g_second: 0.0 },
            cap: DEFAULT_EXPONENT_CAP,
            h1_exempt: matches!(family, Family::PureExp),
            f_cache: Arc::default(),
        };
        match family {
            Family::PowerExp { .. } => {}
            Family::PowerExpLog { l, .. } => {
                model.t0 = (1.0 + l.abs()).exp();
                model.floor = model.t0;
            }
            Family::MultiExp { l, .. } => {
                model.floor = if l == 0.0 { 0.0 } else { (1.0 + l.abs()).exp() };
                model.t0 = model.multi_exp_t0()?;
            }
            Family::PureExp => {
                model.floor = f64::NEG_INFINITY;
            }
        }
        if model.floor.is_finite() {
            let v = model.closed_form(model.floor)?;
            model.floor_values = if model.floor > 0.0 {
                GValues { g: v.g, g_prime: v.g_prime, g_second: 0.0 }
            } else {
                GValues { g: v.g, g_prime: 0.0, g_second: 0.0 }
            };
        }
        Ok(model)
    }

    /// `f(t) = e^t`: the Gelfand validation family, exempt from (H1).
    pub fn gelfand() -> Self {
        Self::unchecked(Family::PureExp).expect("pure-exp has no parameters")
    }

    /// Parses `family:key=value,...` and builds the model (`pure-exp` maps to
    /// [`GrowthModel::gelfand`]).
    pub fn from_spec(spec: &str) -> Result<Self> {
        match parse_family(spec)? {
            Family::PureExp => Ok(Self::gelfand()),
            family => Self::new(family),
        }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn cap(&self) -> f64 {
        self.cap
    }
    pub fn h1_exempt(&self) -> bool {
        self.h1_exempt
    }
    pub fn nominal_q(&self) -> Exponent {
        self.family.nominal().0
    }
    pub fn nominal_p(&self) -> Exponent {
        self.family.nominal().1
    }

    /// Lowest argument at which the closed form is used.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn multi_exp_t0(&self) -> Result<f64> {
        let mut t0 = if self.floor > 0.0 { self.floor } else { 1.0 };
        for _ in 0..40 {
            let mut trial = self.clone();
            trial.t0 = t0;
            let r = check_h1(&trial, 0.05);
            if r.monotonicity.ok && r.clause_ii.ok {
                return Ok(t0);
            }
            t0 *= 1.5;
        }
        Err(Error::domain(format!(
            "{}: no threshold t0 found where the (H1) clauses hold",
            self.family
        )))
    }

    /// Stages of the exponential tower (multi-exp only; other families return
    /// a single stage holding `g`).
    pub fn tower(&self, t: f64) -> Result<Tower> {
        match self.family {
            Family::MultiExp { k, m, l } => {
                let mut stages = vec![power_log(t, m, l).g];
                for i in 1..k as usize {
                    let prev = stages[i - 1];
                    if prev > self.cap {
                        return Err(Error::Overflow { stage: i, exponent: prev });
                    }
                    stages.push(prev.exp());
                }
                Ok(Tower { stages })
            }
            _ => Ok(Tower { stages: vec![self.closed_form(t)?.g] }),
        }
    }

    fn closed_form(&self, t: f64) -> Result<GValues> {
        match self.family {
            Family::PowerExp { p } => Ok(power_log(t, p, 0.0)),
            Family::PowerExpLog { p, l } => Ok(power_log(t, p, l)),
            Family::PureExp => Ok(GValues { g: t, g_prime: 1.0, g_second: 0.0 }),
            Family::MultiExp { k, m, l } => {
                let mut v = power_log(t, m, l);
                for stage in 1..k as usize {
                    if v.g > self.cap {
                        return Err(Error::Overflow { stage, exponent: v.g });
                    }
                    let s = v.g.exp();
                    v = GValues {
                        g: s,
                        g_prime: s * v.g_prime,
                        g_second: s * (v.g_prime * v.g_prime + v.g_second),
                    };
                    if !(v.g_prime.is_finite() && v.g_second.is_finite()) {
                        return Err(Error::Overflow { stage, exponent: v.g.ln() });
                    }
                }
                Ok(v)
            }
        }
    }

    /// Closed-form `(g, g', g'')` for `t >= t0`.
    pub fn evaluate(&self, t: f64) -> Result<GValues> {
        if !(t >= self.t0) {
            return Err(Error::domain(format!("t = {t} below threshold t0 = {}", self.t0)));
        }
        self.closed_form(t)
    }

    /// `(g, g', g'')` on the whole line, using the extension below the floor.
    pub fn eval_ext(&self, u: f64) -> Result<GValues> {
        if u >= self.floor {
            return self.closed_form(u);
        }
        let fv = self.floor_values;
        Ok(GValues {
            g: fv.g + fv.g_prime * (u - self.floor),
            g_prime: fv.g_prime,
            g_second: 0.0,
        })
    }

    /// `log f(u)` on the whole line.
    pub fn log_f(&self, u: f64) -> Result<f64> {
        Ok(self.eval_ext(u)?.g)
    }

    /// `g(t + d) - g(t)`, computed without cancellation when both points lie
    /// in the closed-form range.
    pub fn g_increment(&self, t: f64, d: f64) -> Result<f64> {
        if t.min(t + d) < self.floor || (t <= 0.0 && !matches!(self.family, Family::PureExp)) {
            return Ok(self.eval_ext(t + d)?.g - self.eval_ext(t)?.g);
        }
        match self.family {
            Family::PureExp => Ok(d),
            Family::PowerExp { p } => Ok(t.powf(p) * power_log_log_ratio(t, d, p, 0.0).exp_m1()),
            Family::PowerExpLog { p, l } => {
                Ok(power_log(t, p, l).g * power_log_log_ratio(t, d, p, l).exp_m1())
            }
            Family::MultiExp { k, m, l } => {
                let tower = self.tower(t)?;
                let mut inc = tower.stages[0] * power_log_log_ratio(t, d, m, l).exp_m1();
                for i in 1..k as usize {
                    if tower.stages[i - 1] + inc > self.cap {
                        return Err(Error::Overflow {
                            stage: i,
                            exponent: tower.stages[i - 1] + inc,
                        });
                    }
                    inc = tower.stages[i] * inc.exp_m1();
                }
                Ok(inc)
            }
        }
    }

    /// `Q(t) = g'^2 / (g g'')`.
    pub fn q_of(&self, t: f64) -> Result<f64> {
        let v = self.evaluate(t)?;
        Ok(v.g_prime * v.g_prime / (v.g * v.g_second))
    }

    /// `P(t) = t g' / g`.
    pub fn p_of(&self, t: f64) -> Result<f64> {
        let v = self.evaluate(t)?;
        Ok(t * v.g_prime / v.g)
    }

    /// The inner function `g0` of a multi-exp family with `g0'`.
    pub fn hat_g(&self, t: f64) -> Option<(f64, f64)> {
        match self.family {
            Family::MultiExp { m, l, .. } => {
                let v = power_log(t, m, l);
                Some((v.g, v.g_prime))
            }
            _ => None,
        }
    }

    /// Largest sample point at which the closed form stays finite and inside
    /// the exponent cap (capped at `1e12`).
    pub fn overflow_ceiling(&self) -> f64 {
        const HARD: f64 = 1e12;
        let ok = |t: f64| {
            self.closed_form(t)
                .map(|v| v.g.is_finite() && v.g_prime.is_finite() && v.g_second.is_finite())
                .unwrap_or(false)
        };
        let mut lo = self.t0.max(1.0);
        if !ok(lo) {
            return lo;
        }
        let mut hi = lo * 2.0;
        while ok(hi) {
            lo = hi;
            if hi >= HARD {
                return HARD;
            }
            hi *= 2.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Smallest `t >= t0` with `g(t) >= value` (bisection; closed form for the
    /// power families).
    pub fn inverse_g(&self, value: f64) -> Result<f64> {
        match self.family {
            Family::PowerExp { p } if value >= 0.0 => return Ok(value.powf(1.0 / p)),
            Family::PureExp => return Ok(value),
            _ => {}
        }
        let start = self.t0.max(1e-12);
        if self.evaluate(start)?.g >= value {
            return Ok(start);
        }
        let mut hi = start.max(1.0) * 2.0;
        while self.evaluate(hi)?.g < value {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::domain(format!("g never reaches {value}")));
            }
        }
        let (lo, hi) = crate::numeric::bisect(
            |t| self.evaluate(t).map(|v| v.g - value).unwrap_or(f64::NAN),
            start,
            hi,
            0.0,
        )?;
        Ok(0.5 * (lo + hi))
    }
}

/// The families used by the verification suite and the acceptance tests.
pub fn shipped_families() -> Vec<Family> {
    vec![
        Family::PowerExp { p: 3.0 },
        Family::PowerExp { p: 1.5 },
        Family::PowerExpLog { p: 3.0, l: 1.0 },
        Family::PowerExpLog { p: 2.0, l: 1.0 },
        Family::MultiExp { k: 2, m: 1.0, l: 0.0 },
        Family::MultiExp { k: 2, m: 1.0, l: 1.0 },
    ]
}
