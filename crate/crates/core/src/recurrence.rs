//! Energy recurrences for the bubble masses `2 a_k`, heights `delta_k` and
//! positions `eta_k`.
//!
//! For `q in (1, 2)` (`p = q/(q-1) > 2`) each step solves
//!
//! ```text
//! (2p/(2+a_k)) (1 - x) - 1 + x^p = 0,   x = delta_{k+1}/delta_k in (0, 1),
//! a_{k+1} = 2 - x^{p-1} (2 + a_k),
//! ```
//!
//! and for `q = 1` (`p = inf`)
//!
//! ```text
//! (2/(2+a_k)) log(1/y) - 1 + y = 0,   y = eta_{k+1}/eta_k in (0, 1),
//! a_{k+1} = 2 - y (2 + a_k).
//! ```
//!
//! `x = 1` (resp. `y = 1`) is always a root and is excluded. Both equations
//! are solved in `eps = 1 - x` so the residual near the double root keeps its
//! relative precision.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::Exponent;

/// Points of the uniform scan that must show exactly one sign change.
const SCAN_POINTS: usize = 1000;
const X_LO: f64 = 1e-15;
const X_HI: f64 = 1.0 - 1e-12;

/// Solves `phi(eps) = 0` for `eps = 1 - x`, after checking that the scan over
/// `x in (X_LO, X_HI)` has exactly one sign change. Returns `eps`.
fn solve_ratio<F: Fn(f64) -> f64>(phi: F, what: &str) -> Result<f64> {
    let xs: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| X_LO + (X_HI - X_LO) * i as f64 / (SCAN_POINTS - 1) as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| phi(1.0 - x)).collect();
    let mut changes = Vec::new();
    for i in 1..vals.len() {
        if vals[i - 1].is_nan() || vals[i].is_nan() {
            return Err(Error::internal(format!("{what}: NaN during bracket scan")));
        }
        if (vals[i - 1] > 0.0) != (vals[i] > 0.0) {
            changes.push(i);
        }
    }
    if changes.len() != 1 {
        return Err(Error::internal(format!(
            "{what}: expected one sign change on the scan, found {}",
            changes.len()
        )));
    }
    let i = changes[0];
    // bisect in x to machine resolution
    let (mut lo, mut hi) = (xs[i - 1], xs[i]);
    let mut flo = vals[i - 1];
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = phi(1.0 - mid);
        if fm == 0.0 {
            return Ok(1.0 - mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let (eps_lo, eps_hi) = (1.0 - lo, 1.0 - hi);
    if phi(eps_lo).abs() <= phi(eps_hi).abs() {
        Ok(eps_lo)
    } else {
        Ok(eps_hi)
    }
}

/// Left-hand side of the supercritical equation in `eps = 1 - x`.
fn supercritical_lhs(a: f64, p: f64, eps: f64) -> f64 {
    2.0 * p / (2.0 + a) * eps + (p * (-eps).ln_1p()).exp_m1()
}

/// Left-hand side of the limit equation in `eps = 1 - y`.
fn limit_lhs(a: f64, eps: f64) -> f64 {
    -2.0 / (2.0 + a) * (-eps).ln_1p() - eps
}

/// One step of the supercritical recurrence: returns `(x, a_next)`.
pub fn step_supercritical(a: f64, p: f64) -> Result<(f64, f64)> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::domain(format!("supercritical step needs finite p > 2, got {p}")));
    }
    if !(a > 0.0 && a <= 2.0) {
        return Err(Error::domain(format!("a_k must lie in (0, 2], got {a}")));
    }
    let eps = solve_ratio(|e| supercritical_lhs(a, p, e), "supercritical step")?;
    let x = 1.0 - eps;
    // 2 - (2+a) x^{p-1} without cancelling the leading 2
    let a_next = -a - (2.0 + a) * ((p - 1.0) * (-eps).ln_1p()).exp_m1();
    check_step(a, x, a_next)?;
    Ok((x, a_next))
}

/// One step of the `q = 1` recurrence: returns `(y, a_next)`.
pub fn step_limit(a: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a <= 2.0) {
        return Err(Error::domain(format!("a_k must lie in (0, 2], got {a}")));
    }
    let eps = solve_ratio(|e| limit_lhs(a, e), "limit step")?;
    let y = 1.0 - eps;
    let a_next = eps * (2.0 + a) - a;
    check_step(a, y, a_next)?;
    Ok((y, a_next))
}

fn check_step(a: f64, ratio: f64, a_next: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 && a_next > 0.0 && a_next < a {
        Ok(())
    } else {
        Err(Error::internal(format!(
            "recurrence step from a = {a} gave ratio {ratio}, a_next = {a_next}"
        )))
    }
}

/// Residual of the supercritical equation in its original form.
pub fn supercritical_residual(a: f64, p: f64, x: f64) -> f64 {
    2.0 * p / (2.0 + a) * (1.0 - x) - 1.0 + x.powf(p)
}

/// Residual of the limit equation in its original form.
pub fn limit_residual(a: f64, y: f64) -> f64 {
    2.0 / (2.0 + a) * (1.0 / y).ln() - 1.0 + y
}

/// The sequences `a_k`, `delta_k`, `eta_k`, `eta~_k = eta_k^{1/q}` for
/// `k = 1..=k_max` (stored 0-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceTable {
    pub q: f64,
    pub p: Exponent,
    pub a: Vec<f64>,
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_tilde: Vec<f64>,
    /// `log delta_k` and `log eta_k`, exact sums of the step logs.
    pub log_delta: Vec<f64>,
    pub log_eta: Vec<f64>,
}

impl RecurrenceTable {
    pub fn k_max(&self) -> usize {
        self.a.len()
    }

    pub fn log_eta_tilde(&self, i: usize) -> f64 {
        self.log_eta[i] / self.q
    }

    /// `a_k` for 1-based `k`.
    pub fn a_k(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.a.get(i).copied())
    }

    /// `sum_{i<=k} 2 a_i`.
    pub fn mass_sum(&self, k: usize) -> f64 {
        self.a.iter().take(k).map(|a| 2.0 * a).sum()
    }
}

/// `p = q/(q-1)` with `q = 1` mapped to the infinite tag.
pub fn conjugate(q: f64) -> Exponent {
    if q == 1.0 {
        Exponent::Infinite
    } else {
        Exponent::Finite(q / (q - 1.0))
    }
}

pub fn build_table(q: f64, k_max: usize) -> Result<RecurrenceTable> {
    if !(1.0..2.0).contains(&q) {
        return Err(Error::domain(format!("q must lie in [1, 2), got {q}")));
    }
    if k_max == 0 {
        return Err(Error::domain("k_max must be at least 1"));
    }
    let p = conjugate(q);
    let mut a = vec![2.0];
    let mut log_delta = vec![0.0];
    let mut log_eta = vec![0.0];
    for _ in 1..k_max {
        let ak = *a.last().expect("non-empty");
        match p {
            Exponent::Finite(pv) => {
                let (x, next) = step_supercritical(ak, pv)?;
                let ld = log_delta.last().expect("non-empty") + x.ln();
                log_delta.push(ld);
                log_eta.push(pv * ld);
                a.push(next);
            }
            Exponent::Infinite => {
                let (y, next) = step_limit(ak)?;
                log_delta.push(0.0);
                log_eta.push(log_eta.last().expect("non-empty") + y.ln());
                a.push(next);
            }
        }
    }
    let delta = log_delta.iter().map(|v| v.exp()).collect();
    let eta = log_eta.iter().map(|v| v.exp()).collect();
    let eta_tilde = log_eta.iter().map(|v| (v / q).exp()).collect();
    Ok(RecurrenceTable { q, p, a, delta, eta, eta_tilde, log_delta, log_eta })
}

/// `max_k |eta~_k sum_{i<=k} 2 a_i / eta~_i - (2 + a_k)|`, evaluated with the
/// stored logs so deep rows do not underflow.
pub fn check_lemma_b3(table: &RecurrenceTable) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..table.k_max() {
        let lk = table.log_eta_tilde(k);
        let s: f64 = (0..=k)
            .map(|i| 2.0 * table.a[i] * (lk - table.log_eta_tilde(i)).exp())
            .sum();
        worst = worst.max((s - (2.0 + table.a[k])).abs());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub q: f64,
    pub a_k: f64,
    pub delta_k: f64,
    pub eta_k: f64,
    pub gap_a: f64,
    pub gap_eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub k: usize,
    pub a_k_limit: f64,
    pub eta_k_limit: f64,
    pub rows: Vec<ContinuityRow>,
    pub gaps_decreasing: bool,
}

/// Compares the `q > 1` tables along `q_list` (decreasing toward 1) with the
/// `q = 1` table at index `k` (1-based).
pub fn limit_continuity(q_list: &[f64], k: usize) -> Result<ContinuityReport> {
    if k == 0 {
        return Err(Error::domain("k is 1-based"));
    }
    let reference = build_table(1.0, k)?;
    let (a_lim, eta_lim) = (reference.a[k - 1], reference.eta[k - 1]);
    let mut rows = Vec::with_capacity(q_list.len());
    for &q in q_list {
        if !(q > 1.0 && q < 2.0) {
            return Err(Error::domain(format!("continuity needs q in (1, 2), got {q}")));
        }
        let t = build_table(q, k)?;
        rows.push(ContinuityRow {
            q,
            a_k: t.a[k - 1],
            delta_k: t.delta[k - 1],
            eta_k: t.eta[k - 1],
            gap_a: (t.a[k - 1] - a_lim).abs(),
            gap_eta: (t.eta[k - 1] - eta_lim).abs(),
        });
    }
    let gaps_decreasing = rows.windows(2).all(|w| {
        (w[1].gap_a < w[0].gap_a || w[1].gap_a == 0.0)
            && (w[1].gap_eta < w[0].gap_eta || w[1].gap_eta == 0.0)
    });
    Ok(ContinuityReport { k, a_k_limit: a_lim, eta_k_limit: eta_lim, rows, gaps_decreasing })
}

/// `sum_{k<=k_max} a_k`: grows without bound, so exceeding a threshold is
/// a proxy for the divergence of the total mass.
pub fn partial_sum(q: f64, k_max: usize) -> Result<f64> {
    Ok(build_table(q, k_max)?.a.iter().sum())
}
