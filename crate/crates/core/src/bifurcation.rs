//! `lambda(mu)` branches traced as graphs over `mu`, their turning points,
//! and the large-`mu` checks for subcritical growth.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{compute_diagnostics, detect_bubbles, total_energy, total_scaled_mass, DetectOptions};
use crate::error::{Error, Result};
use crate::growth::{Exponent, GrowthModel, Weight};
use crate::numeric::golden_section;
use crate::solver::{identity_residuals, shoot, IdentityResiduals, RadialSolution, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub mu: f64,
    pub log_lambda: f64,
    pub lambda: f64,
    /// `int_0^1 lambda h f'(u) r dr`.
    pub total_energy: f64,
    pub bubble_count: usize,
    pub residuals: Option<IdentityResiduals>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurnKind {
    Maximum,
    Minimum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurningPoint {
    pub mu: f64,
    pub lambda: f64,
    pub kind: TurnKind,
    /// Index of the grid point where the discrete slope changes sign.
    pub grid_index: usize,
    /// `mu` bracket holding the extremum.
    pub bracket: [f64; 2],
    /// Discrete slopes of `log lambda` on either side.
    pub slopes: [f64; 2],
    /// Refined by fresh shots (false for the raw grid estimate).
    pub refined: bool,
    /// The two flanking slopes have opposite signs.
    pub certified: bool,
    pub shots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub turning_points: Vec<TurningPoint>,
}

fn with_mu(e: Error, mu: f64) -> Error {
    match e {
        Error::Domain(m) => Error::Domain(format!("mu = {mu}: {m}")),
        Error::Precision(m) => Error::Precision(format!("mu = {mu}: {m}")),
        Error::Bracketing(m) => Error::Bracketing(format!("mu = {mu}: {m}")),
        Error::Internal(m) => Error::Internal(format!("mu = {mu}: {m}")),
        e @ (Error::Overflow { .. } | Error::ExponentCap { .. }) => Error::Precision(format!("mu = {mu}: {e}")),
        other => other,
    }
}

fn branch_point(model: &GrowthModel, weight: Weight, mu: f64, cfg: &SolverConfig) -> Result<BranchPoint> {
    let sol = shoot(model, weight, mu, cfg)?;
    let diag = compute_diagnostics(&sol, model);
    let events = detect_bubbles(&diag, &sol, model, None, &DetectOptions::default())?;
    Ok(BranchPoint {
        mu,
        log_lambda: sol.log_lambda,
        lambda: sol.lambda(),
        total_energy: total_energy(&sol, model)?,
        bubble_count: events.len(),
        residuals: identity_residuals(&sol, model).ok(),
    })
}

/// Coarse turning points: sign changes of the discrete slope of `log lambda`.
fn grid_turning_points(points: &[BranchPoint]) -> Vec<TurningPoint> {
    let mut out = Vec::new();
    for i in 1..points.len().saturating_sub(1) {
        let left = points[i].log_lambda - points[i - 1].log_lambda;
        let right = points[i + 1].log_lambda - points[i].log_lambda;
        let kind = if left > 0.0 && right < 0.0 {
            TurnKind::Maximum
        } else if left < 0.0 && right > 0.0 {
            TurnKind::Minimum
        } else {
            continue;
        };
        out.push(TurningPoint {
            mu: points[i].mu,
            lambda: points[i].lambda,
            kind,
            grid_index: i,
            bracket: [points[i - 1].mu, points[i + 1].mu],
            slopes: [left, right],
            refined: false,
            certified: true,
            shots: 0,
        });
    }
    out
}

/// One shot per `mu` (in parallel), with the grid turning points attached.
pub fn sweep(model: &GrowthModel, weight: Weight, mu_grid: &[f64], cfg: &SolverConfig) -> Result<Branch> {
    if mu_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("mu grid must be strictly increasing"));
    }
    let points = mu_grid
        .par_iter()
        .map(|&mu| branch_point(model, weight, mu, cfg).map_err(|e| with_mu(e, mu)))
        .collect::<Result<Vec<_>>>()?;
    let turning_points = grid_turning_points(&points);
    Ok(Branch { points, turning_points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineOptions {
    /// Stop once the `mu` bracket is narrower than this.
    pub width: f64,
    /// Shots per turning point, certificate included.
    pub max_shots: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { width: 1e-6, max_shots: 40 }
    }
}

fn refine(
    model: &GrowthModel,
    weight: Weight,
    cfg: &SolverConfig,
    tp: &TurningPoint,
    opts: &RefineOptions,
) -> Result<TurningPoint> {
    let log_lambda = |mu: f64| -> Result<f64> { Ok(shoot(model, weight, mu, cfg)?.log_lambda) };
    let maximize = tp.kind == TurnKind::Maximum;
    let budget = opts.max_shots.saturating_sub(2).max(2);
    let [a, b] = tp.bracket;
    let mut used = 0usize;
    let [left, best, right] = golden_section(
        |mu| {
            used += 1;
            log_lambda(mu)
        },
        a,
        b,
        maximize,
        opts.width,
        budget,
    )?;
    let (mu, ll) = best;
    // certificate: fresh shots one bracket width either side
    let delta = (right.0 - left.0).abs().max(opts.width).max(1e-9 * mu.abs());
    let lo = log_lambda(mu - delta)?;
    let hi = log_lambda(mu + delta)?;
    used += 2;
    let slopes = [ll - lo, hi - ll];
    let certified = match tp.kind {
        TurnKind::Maximum => slopes[0] > 0.0 && slopes[1] < 0.0,
        TurnKind::Minimum => slopes[0] < 0.0 && slopes[1] > 0.0,
    };
    Ok(TurningPoint {
        mu,
        lambda: ll.exp(),
        kind: tp.kind,
        grid_index: tp.grid_index,
        bracket: [mu - delta, mu + delta],
        slopes,
        refined: true,
        certified,
        shots: used,
    })
}

/// Refines every grid turning point by golden-section search in `mu`.
pub fn turning_points(
    model: &GrowthModel,
    weight: Weight,
    cfg: &SolverConfig,
    branch: &Branch,
    opts: &RefineOptions,
) -> Result<Vec<TurningPoint>> {
    branch
        .turning_points
        .par_iter()
        .map(|tp| refine(model, weight, cfg, tp, opts).map_err(|e| with_mu(e, tp.mu)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenSample {
    pub r: f64,
    /// `g'(mu) u(r) / (4 log(1/r))`, target 1.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubcriticalRow {
    pub mu: f64,
    pub g_mu: f64,
    /// `g'(mu) int_0^1 lambda h f(u) r dr`, target 4.
    pub scaled_mass: f64,
    /// `int_0^1 lambda h f'(u) r dr`, target 4.
    pub energy: f64,
    pub green: Vec<GreenSample>,
    /// `log(1/lambda)/g(mu)`, target `(2 - p)/2`.
    pub lambda_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubcriticalReport {
    pub lambda_target: f64,
    pub rows: Vec<SubcriticalRow>,
    pub lambda_gaps: Vec<f64>,
    pub mass_gaps: Vec<f64>,
    pub energy_gaps: Vec<f64>,
    /// Worst `|ratio - 1|` over the sample radii, per row.
    pub green_gaps: Vec<f64>,
    pub lambda_strictly_decreasing: bool,
    pub mass_decreasing: bool,
    pub energy_decreasing: bool,
    pub green_decreasing: bool,
}

fn weakly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

fn subcritical_row(
    model: &GrowthModel,
    weight: Weight,
    mu: f64,
    radii: &[f64],
    cfg: &SolverConfig,
) -> Result<SubcriticalRow> {
    let sol: RadialSolution = shoot(model, weight, mu, cfg)?;
    let v = model.evaluate(mu)?;
    let green = radii
        .iter()
        .map(|&r| {
            let t = -r.ln();
            let (u, _) = sol
                .state_at(t)
                .ok_or_else(|| Error::domain(format!("sample radius {r} outside the solution grid")))?;
            Ok(GreenSample { r, ratio: v.g_prime * u / (4.0 * t) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubcriticalRow {
        mu,
        g_mu: v.g,
        scaled_mass: total_scaled_mass(&sol, model)?,
        energy: total_energy(&sol, model)?,
        green,
        lambda_ratio: -sol.log_lambda / v.g,
    })
}

pub fn subcritical_check(
    model: &GrowthModel,
    weight: Weight,
    mu_ladder: &[f64],
    sample_radii: &[f64],
    cfg: &SolverConfig,
) -> Result<SubcriticalReport> {
    let (q, p) = (model.nominal_q(), model.nominal_p());
    let lambda_target = match (q, p) {
        (Exponent::Finite(q), Exponent::Finite(p)) if q > 2.0 => 0.5 * (2.0 - p),
        (Exponent::Infinite, Exponent::Finite(p)) => 0.5 * (2.0 - p),
        _ => return Err(Error::domain(format!("subcritical check needs q > 2, got q = {q}"))),
    };
    if mu_ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("mu ladder must be strictly increasing"));
    }
    if let Some(r) = sample_radii.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::domain(format!("sample radius {r} must lie in (0, 1)")));
    }
    let rows = mu_ladder
        .par_iter()
        .map(|&mu| subcritical_row(model, weight, mu, sample_radii, cfg).map_err(|e| with_mu(e, mu)))
        .collect::<Result<Vec<_>>>()?;
    let lambda_gaps: Vec<f64> = rows.iter().map(|r| (r.lambda_ratio - lambda_target).abs()).collect();
    let mass_gaps: Vec<f64> = rows.iter().map(|r| (r.scaled_mass - 4.0).abs()).collect();
    let energy_gaps: Vec<f64> = rows.iter().map(|r| (r.energy - 4.0).abs()).collect();
    let green_gaps: Vec<f64> = rows
        .iter()
        .map(|r| r.green.iter().map(|s| (s.ratio - 1.0).abs()).fold(0.0, f64::max))
        .collect();
    Ok(SubcriticalReport {
        lambda_target,
        lambda_strictly_decreasing: lambda_gaps.windows(2).all(|w| w[1] < w[0]),
        mass_decreasing: weakly_decreasing(&mass_gaps),
        energy_decreasing: weakly_decreasing(&energy_gaps),
        green_decreasing: weakly_decreasing(&green_gaps),
        rows,
        lambda_gaps,
        mass_gaps,
        energy_gaps,
        green_gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::Family;
    use crate::numeric::linspace;

    fn gelfand_lambda(mu: f64) -> f64 {
        let alpha = (0.5 * mu).exp() - 1.0;
        8.0 * alpha / (1.0 + alpha).powi(2)
    }

    #[test]
    fn gelfand_branch_matches_closed_form() {
        let grid = linspace(0.1, 6.0, 60);
        let b = sweep(&GrowthModel::gelfand(), Weight::default(), &grid, &SolverConfig::default()).unwrap();
        assert_eq!(b.points.len(), 60);
        for p in &b.points {
            let exact = gelfand_lambda(p.mu);
            assert!((p.lambda - exact).abs() < 1e-8 * exact, "{p:?}");
            assert_eq!(p.bubble_count, 1);
        }
        // small-mu slope: lambda ~ 4 mu
        let small = sweep(&GrowthModel::gelfand(), Weight::default(), &[1e-3], &SolverConfig::default()).unwrap();
        assert!((small.points[0].lambda / 1e-3 - 4.0).abs() < 4e-3, "{:?}", small.points[0]);
        assert_eq!(b.turning_points.len(), 1);
    }

    #[test]
    fn gelfand_turning_point() {
        let grid = linspace(0.1, 6.0, 30);
        let model = GrowthModel::gelfand();
        let cfg = SolverConfig::default();
        let b = sweep(&model, Weight::default(), &grid, &cfg).unwrap();
        let tps = turning_points(&model, Weight::default(), &cfg, &b, &RefineOptions::default()).unwrap();
        assert_eq!(tps.len(), 1);
        let tp = &tps[0];
        assert!((tp.mu - 2.0 * 2f64.ln()).abs() < 1e-4, "{tp:?}");
        assert!((tp.lambda - 2.0).abs() < 1e-6, "{tp:?}");
        assert!(tp.certified && tp.shots <= 40 && tp.kind == TurnKind::Maximum);
    }

    #[test]
    fn empty_grid_and_order() {
        let b = sweep(&GrowthModel::gelfand(), Weight::default(), &[], &SolverConfig::default()).unwrap();
        assert!(b.points.is_empty() && b.turning_points.is_empty());
        assert!(sweep(&GrowthModel::gelfand(), Weight::default(), &[2.0, 1.0], &SolverConfig::default()).is_err());
    }

    #[test]
    fn sweep_errors_name_mu() {
        let model = GrowthModel::new(Family::PowerExp { p: 3.0 }).unwrap();
        let e = sweep(&model, Weight::default(), &[2.0, 9.5], &SolverConfig::default()).unwrap_err();
        assert_eq!(e.kind(), "precision");
        assert!(e.to_string().contains("mu = 9.5"), "{e}");
    }

    #[test]
    fn subcritical_power_three_halves() {
        let model = GrowthModel::new(Family::PowerExp { p: 1.5 }).unwrap();
        let ladder: Vec<f64> = [50.0f64, 100.0, 200.0, 400.0].iter().map(|g| g.powf(1.0 / 1.5)).collect();
        let rep = subcritical_check(&model, Weight::default(), &ladder, &[0.5], &SolverConfig::default()).unwrap();
        assert_eq!(rep.lambda_target, 0.25);
        assert!(rep.lambda_strictly_decreasing && rep.lambda_gaps[3] < 0.05, "{rep:?}");
        assert!(rep.mass_gaps[3] < 0.3 && rep.energy_gaps[3] < 0.3, "{rep:?}");
        assert!(rep.green_gaps[3] < rep.green_gaps[0], "{rep:?}");
    }

    #[test]
    fn subcritical_rejects_supercritical() {
        let model = GrowthModel::new(Family::PowerExp { p: 3.0 }).unwrap();
        assert!(subcritical_check(&model, Weight::default(), &[2.0, 3.0], &[0.5], &SolverConfig::default()).is_err());
    }
}
