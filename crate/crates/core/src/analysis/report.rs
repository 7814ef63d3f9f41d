//! Trend report over a ladder of increasing `mu`.

use serde::Serialize;

use super::detect::{total_energy, ConcentrationEvent};
use crate::error::{Error, Result};
use crate::growth::{Exponent, GrowthModel};
use crate::recurrence::RecurrenceTable;
use crate::solver::RadialSolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metric {
    pub measured: f64,
    pub target: f64,
    pub gap: f64,
}

impl Metric {
    fn new(measured: f64, target: f64) -> Self {
        Metric { measured, target, gap: (measured - target).abs() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRow {
    pub k: usize,
    /// Target `a_k^2/2`.
    pub phi_peak: Metric,
    /// Target 2.
    pub psi: Metric,
    /// `height_log` against `log(1/eta_k)` when `q = 1`, else `height_ratio`
    /// against `delta_k`.
    pub height: Metric,
    /// Target `eta_k / 2`.
    pub position: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub mu: f64,
    pub g_mu: f64,
    pub log_lambda: f64,
    /// `log(1/lambda)/g(mu)`.
    pub lambda_ratio: Metric,
    /// Target `2 a_1 = 4`.
    pub first_window_energy: Option<Metric>,
    pub total_energy: f64,
    /// `sum_{i<=n} 2 a_i` over the detected events.
    pub sum_2a_target: Option<f64>,
    pub events: Vec<EventRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trend {
    pub name: String,
    pub gaps: Vec<f64>,
    /// The metric is present in every run.
    pub complete: bool,
    pub weakly_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub rows: Vec<RunRow>,
    pub trends: Vec<Trend>,
}

impl AsymptoticsReport {
    pub fn trend(&self, name: &str) -> Option<&Trend> {
        self.trends.iter().find(|t| t.name == name)
    }
}

/// `(a_k, delta_k, eta_k)`; row 1 is `(2, 1, 1)` with or without a table.
fn targets(table: Option<&RecurrenceTable>, k: usize) -> Option<(f64, f64, f64)> {
    if k == 1 {
        return Some((2.0, 1.0, 1.0));
    }
    let tb = table?;
    let i = k - 1;
    (i < tb.k_max()).then(|| (tb.a[i], tb.delta[i], tb.eta[i]))
}

pub fn asymptotics_report(
    runs: &[(RadialSolution, Vec<ConcentrationEvent>)],
    model: &GrowthModel,
    table: Option<&RecurrenceTable>,
) -> Result<AsymptoticsReport> {
    if runs.len() < 3 {
        return Err(Error::domain(format!("trend report needs >= 3 runs, got {}", runs.len())));
    }
    if runs.windows(2).any(|w| !(w[1].0.mu > w[0].0.mu)) {
        return Err(Error::domain("runs must be ordered by increasing mu"));
    }
    let q1 = model.nominal_p().is_infinite();
    let lambda_target = match (model.nominal_q(), model.nominal_p()) {
        (Exponent::Finite(q), Exponent::Finite(p)) if q > 2.0 => 0.5 * (2.0 - p),
        _ => 0.0,
    };

    let mut rows = Vec::with_capacity(runs.len());
    for (sol, events) in runs {
        let g_mu = model.evaluate(sol.mu)?.g;
        let mut ev_rows = Vec::new();
        for e in events {
            let Some((a, delta, eta)) = targets(table, e.k) else { continue };
            let height = if q1 {
                Metric::new(e.height_log, -eta.ln())
            } else {
                Metric::new(e.height_ratio, delta)
            };
            ev_rows.push(EventRow {
                k: e.k,
                phi_peak: Metric::new(e.phi_peak, 0.5 * a * a),
                psi: Metric::new(e.psi_at_peak, 2.0),
                height,
                position: Metric::new(e.position_ratio, 0.5 * eta),
            });
        }
        let n = events.len();
        let sum_2a_target =
            (0..n).map(|i| targets(table, i + 1).map(|t| 2.0 * t.0)).sum::<Option<f64>>();
        rows.push(RunRow {
            mu: sol.mu,
            g_mu,
            log_lambda: sol.log_lambda,
            lambda_ratio: Metric::new(-sol.log_lambda / g_mu, lambda_target),
            first_window_energy: events.first().map(|e| Metric::new(e.energy_fprime, 4.0)),
            total_energy: total_energy(sol, model)?,
            sum_2a_target,
            events: ev_rows,
        });
    }

    let mut trends = Vec::new();
    let mut push = |name: String, gaps: Vec<Option<f64>>| {
        let complete = gaps.iter().all(Option::is_some);
        let gaps: Vec<f64> = gaps.into_iter().flatten().collect();
        let weakly_decreasing = complete && gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        trends.push(Trend { name, gaps, complete, weakly_decreasing });
    };
    push("lambda_ratio".into(), rows.iter().map(|r| Some(r.lambda_ratio.gap)).collect());
    push(
        "first_window_energy".into(),
        rows.iter().map(|r| r.first_window_energy.map(|m| m.gap)).collect(),
    );
    let k_max = rows.iter().flat_map(|r| r.events.iter().map(|e| e.k)).max().unwrap_or(0);
    for k in 1..=k_max {
        let field = |f: fn(&EventRow) -> Metric| -> Vec<Option<f64>> {
            rows.iter()
                .map(|r| r.events.iter().find(|e| e.k == k).map(|e| f(e).gap))
                .collect()
        };
        let cols = [
            ("phi_peak", field(|e| e.phi_peak)),
            ("psi", field(|e| e.psi)),
            ("height", field(|e| e.height)),
            ("position", field(|e| e.position)),
        ];
        for (name, gaps) in cols {
            push(format!("event{k}.{name}"), gaps);
        }
    }
    Ok(AsymptoticsReport { rows, trends })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{compute_diagnostics, detect_bubbles, DetectOptions};
    use crate::growth::{Family, Weight};
    use crate::solver::{shoot_unit_lambda, SolverConfig};

    #[test]
    fn needs_three_runs() {
        let model = GrowthModel::gelfand();
        let sol = shoot_unit_lambda(&model, Weight::default(), 1.0, &SolverConfig::default()).unwrap();
        let runs = vec![(sol.clone(), vec![]), (sol, vec![])];
        assert!(matches!(asymptotics_report(&runs, &model, None), Err(Error::Domain(_))));
    }

    #[test]
    fn subcritical_lambda_ratio_improves() {
        let model = GrowthModel::new(Family::PowerExp { p: 1.5 }).unwrap();
        let runs: Vec<_> = [50.0f64, 100.0, 200.0]
            .iter()
            .map(|g| {
                let mu = g.powf(1.0 / 1.5);
                let sol = shoot_unit_lambda(&model, Weight::default(), mu, &SolverConfig::default()).unwrap();
                let d = compute_diagnostics(&sol, &model);
                let ev = detect_bubbles(&d, &sol, &model, None, &DetectOptions::default()).unwrap();
                (sol, ev)
            })
            .collect();
        let rep = asymptotics_report(&runs, &model, None).unwrap();
        assert_eq!(rep.rows[0].lambda_ratio.target, 0.25);
        let tr = rep.trend("lambda_ratio").unwrap();
        assert!(tr.complete && tr.weakly_decreasing, "{tr:?}");
    }
}
