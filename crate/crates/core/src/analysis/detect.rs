//! Concentration events: local maxima of `phi`, their windows, energies and
//! the comparison with the tower profiles.

use serde::Serialize;

use super::{point_values, ScalingDiagnostics};
use crate::error::{Error, Result};
use crate::growth::GrowthModel;
use crate::numeric::illinois;
use crate::profiles::BubbleProfile;
use crate::recurrence::RecurrenceTable;
use crate::solver::RadialSolution;

/// How adjacent windows are separated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WindowRule {
    /// Both windows end at the minimum of `phi` between the peaks.
    PhiMinimum,
    /// Like `PhiMinimum` when `phi` stays above the floor between the peaks;
    /// otherwise each window ends where `phi` drops below the floor, leaving
    /// a gap between them.
    #[default]
    Hybrid,
}

impl std::str::FromStr for WindowRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi-minimum" => Ok(WindowRule::PhiMinimum),
            "hybrid" => Ok(WindowRule::Hybrid),
            _ => Err(Error::domain(format!("unknown window rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectOptions {
    pub peak_floor: f64,
    pub window_rule: WindowRule,
    /// The profile comparison uses the samples with
    /// `rho^2 e^{z_k(rho)} >= e^{-core_depth} a_k^2/2`.
    pub core_depth: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions { peak_floor: 1e-3, window_rule: WindowRule::default(), core_depth: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationEvent {
    pub k: usize,
    pub t_center: f64,
    pub r_center: f64,
    pub u_center: f64,
    pub phi_peak: f64,
    pub psi_at_peak: f64,
    /// `lambda h f'(u(r_k)) gamma^2 = 1`.
    pub gamma: f64,
    /// The maximum sits at `r = 1` with `phi` still increasing there.
    pub boundary: bool,
    /// `[rho_bar, rho]`.
    pub window: [f64; 2],
    /// The same window in `t`: `[t(rho), t(rho_bar)]`, `inf` for `rho_bar = 0`.
    #[serde(skip)]
    pub window_t: [f64; 2],
    pub energy_fprime: f64,
    pub energy_f_scaled: f64,
    /// `g'(mu) int lambda h f(u) r dr` between this window and the next.
    pub gap_energy: Option<f64>,
    pub height_ratio: f64,
    pub height_log: f64,
    pub position_ratio: f64,
    pub profile_mismatch: Option<f64>,
    pub phi_shape_mismatch: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowEnergies {
    pub energy_fprime: f64,
    pub energy_f_scaled: f64,
    pub gap_energy: Option<f64>,
}

/// `z_{k,n}` sampled on a window in scaled coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rescaled {
    pub log_rho: Vec<f64>,
    pub z: Vec<f64>,
    /// Samples entering the two sup-norms.
    pub core_samples: usize,
    pub mismatch: Option<f64>,
    pub phi_shape: Option<f64>,
}

#[derive(Clone, Copy)]
enum Density {
    /// `w = lambda h f(u) r^2`
    W,
    /// `phi = w g'(u)`
    Phi,
}

/// Value and `t`-derivative of the density at one point.
fn density(sol: &RadialSolution, model: &GrowthModel, kind: Density, t: f64, u: f64, m: f64) -> Result<(f64, f64)> {
    let r = (-t).exp();
    let w = (sol.log_lambda - 2.0 * t + sol.weight.log_h(r) + model.log_f(u)?).exp();
    let v = model.eval_ext(u)?;
    let dlog_w = v.g_prime * m - sol.weight.log_slope(r) - 2.0;
    Ok(match kind {
        Density::W => (w, w * dlog_w),
        Density::Phi => (w * v.g_prime, w * (v.g_prime * dlog_w + v.g_second * m)),
    })
}

/// `int density dt` over `[t_lo, t_hi]`; `t_hi = inf` adds the closed-form
/// center tail.
fn quad(sol: &RadialSolution, model: &GrowthModel, kind: Density, t_lo: f64, t_hi: f64) -> Result<f64> {
    let tc = sol.t_center();
    let top = t_hi.min(tc);
    let lo = t_lo.max(*sol.t.last().expect("non-empty"));
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    let at = |t: f64| -> Result<(f64, f64, f64)> {
        let (u, m) = sol.state_at(t).ok_or_else(|| Error::internal(format!("t = {t} outside the grid")))?;
        let (f, df) = density(sol, model, kind, t, u, m)?;
        Ok((t, f, df))
    };
    let mut total = 0.0;
    if top > lo {
        pts.push(at(top)?);
        for i in 0..sol.len() {
            let t = sol.t[i];
            if t < top && t > lo {
                let (f, df) = density(sol, model, kind, t, sol.u[i], sol.m[i])?;
                pts.push((t, f, df));
            }
        }
        pts.push(at(lo)?);
        for p in pts.windows(2) {
            let (b, a) = (p[0], p[1]);
            let h = b.0 - a.0;
            total += 0.5 * h * (a.1 + b.1);
            // g'' blows up at u = 0 for p < 2; fall back to the plain rule there
            if a.2.is_finite() && b.2.is_finite() {
                total += h * h / 12.0 * (a.2 - b.2);
            }
        }
    }
    if t_hi.is_infinite() {
        let (f, _) = density(sol, model, kind, tc, sol.u[0], sol.m[0])?;
        total += 0.5 * f;
    }
    Ok(total)
}

/// `int_0^1 lambda h f'(u) r dr`.
pub fn total_energy(sol: &RadialSolution, model: &GrowthModel) -> Result<f64> {
    quad(sol, model, Density::Phi, 0.0, f64::INFINITY)
}

/// `g'(mu) int_0^1 lambda h f(u) r dr`.
pub fn total_scaled_mass(sol: &RadialSolution, model: &GrowthModel) -> Result<f64> {
    Ok(model.evaluate(sol.mu)?.g_prime * quad(sol, model, Density::W, 0.0, f64::INFINITY)?)
}

/// `d log phi/dt` at an interpolated point.
fn dlog_phi_at(sol: &RadialSolution, model: &GrowthModel, t: f64) -> Result<f64> {
    let (u, m) = sol.state_at(t).ok_or_else(|| Error::internal(format!("t = {t} outside the grid")))?;
    point_values(sol, model, t, u, m)
        .map(|v| v.2)
        .ok_or_else(|| Error::domain(format!("phi undefined at t = {t}")))
}

/// Root of `d log phi/dt` between samples `i` and `i + 1`.
fn refine_critical(sol: &RadialSolution, model: &GrowthModel, i: usize) -> Result<f64> {
    let (ta, tb) = (sol.t[i + 1], sol.t[i]);
    let (t, _) = illinois(|t| dlog_phi_at(sol, model, t), ta, tb, 0.0, 1e-13 * (1.0 + tb.abs()), 100)?;
    Ok(t)
}

/// First `t` outward (`step = 1`) or inward (`step = -1`) from sample `from`
/// where `phi` falls below the floor, linear in `log phi`.
fn floor_crossing(diag: &ScalingDiagnostics, from: usize, step: isize, stop: usize, log_floor: f64) -> Option<f64> {
    let below = |j: usize| !diag.valid[j] || diag.log_phi[j] < log_floor;
    let mut j = from;
    while j != stop {
        let next = (j as isize + step) as usize;
        if below(next) {
            if !diag.valid[next] || !diag.valid[j] {
                return Some(diag.t[next]);
            }
            let (a, b) = (diag.log_phi[j], diag.log_phi[next]);
            let s = (a - log_floor) / (a - b);
            return Some(diag.t[j] + s * (diag.t[next] - diag.t[j]));
        }
        j = next;
    }
    None
}

struct Peak {
    t: f64,
    /// Sample index with `t[idx] >= t`.
    idx: usize,
    boundary: bool,
}

pub fn detect_bubbles(
    diag: &ScalingDiagnostics,
    sol: &RadialSolution,
    model: &GrowthModel,
    table: Option<&RecurrenceTable>,
    opts: &DetectOptions,
) -> Result<Vec<ConcentrationEvent>> {
    let n = diag.len();
    if n < 2 || n != sol.len() {
        return Err(Error::domain("diagnostics do not match the solution"));
    }
    let log_floor = opts.peak_floor.ln();
    let mut peaks = Vec::new();
    for i in 0..n - 1 {
        if diag.valid[i] && diag.valid[i + 1] && diag.dlog_phi[i] < 0.0 && diag.dlog_phi[i + 1] >= 0.0 {
            let t = refine_critical(sol, model, i)?;
            peaks.push(Peak { t, idx: i, boundary: false });
        }
    }
    if diag.valid[n - 1] && diag.dlog_phi[n - 1] < 0.0 {
        peaks.push(Peak { t: diag.t[n - 1], idx: n - 1, boundary: true });
    }

    let g_mu = model.evaluate(sol.mu)?;
    let mut events = Vec::new();
    let mut kept = Vec::new();
    for p in peaks {
        let (u, m) = sol.state_at(p.t).ok_or_else(|| Error::internal("peak outside the grid"))?;
        let Some((log_phi, psi, _)) = point_values(sol, model, p.t, u, m) else { continue };
        if log_phi <= log_floor {
            continue;
        }
        let log_r = -p.t;
        let log_gamma = log_r - 0.5 * log_phi;
        events.push(ConcentrationEvent {
            k: events.len() + 1,
            t_center: p.t,
            r_center: log_r.exp(),
            u_center: u,
            phi_peak: log_phi.exp(),
            psi_at_peak: psi,
            gamma: log_gamma.exp(),
            boundary: p.boundary,
            window: [0.0, 1.0],
            window_t: [0.0, f64::INFINITY],
            energy_fprime: 0.0,
            energy_f_scaled: 0.0,
            gap_energy: None,
            height_ratio: u / sol.mu,
            height_log: (sol.mu - u) * g_mu.g_prime / g_mu.g,
            position_ratio: p.t / g_mu.g,
            profile_mismatch: None,
            phi_shape_mismatch: None,
        });
        kept.push(p);
    }

    // windows
    for k in 0..events.len() {
        if k + 1 < events.len() {
            let (a, b) = (kept[k].idx, kept[k + 1].idx);
            let jmin = (a + 1..=b)
                .filter(|&j| diag.valid[j])
                .min_by(|&x, &y| diag.log_phi[x].total_cmp(&diag.log_phi[y]));
            let dips_below = (a + 1..=b).any(|j| !diag.valid[j] || diag.log_phi[j] < log_floor);
            if opts.window_rule == WindowRule::Hybrid && dips_below {
                let out = floor_crossing(diag, a, 1, b, log_floor).unwrap_or(diag.t[b]);
                let inn = floor_crossing(diag, b, -1, a, log_floor).unwrap_or(out);
                events[k].window_t[0] = out;
                events[k + 1].window_t[1] = inn.min(out);
            } else {
                let j = jmin.ok_or_else(|| Error::internal("no valid sample between peaks"))?;
                let mut t = diag.t[j];
                // refine where d log phi/dt changes from + (inner) to - (outer)
                for i in [j.saturating_sub(1), j] {
                    if i + 1 < n && diag.valid[i] && diag.valid[i + 1] && diag.dlog_phi[i] > 0.0 && diag.dlog_phi[i + 1] <= 0.0 {
                        t = refine_critical(sol, model, i)?;
                    }
                }
                events[k].window_t[0] = t;
                events[k + 1].window_t[1] = t;
            }
        } else {
            let last = kept[k].idx;
            events[k].window_t[0] = if kept[k].boundary {
                0.0
            } else {
                floor_crossing(diag, last, 1, n - 1, log_floor).unwrap_or(diag.t[n - 1])
            };
        }
    }
    for e in events.iter_mut() {
        e.window = [(-e.window_t[1]).exp(), (-e.window_t[0]).exp()];
    }

    for k in 0..events.len() {
        let en = window_energies(sol, model, &events[k], events.get(k + 1))?;
        let e = &mut events[k];
        e.energy_fprime = en.energy_fprime;
        e.energy_f_scaled = en.energy_f_scaled;
        e.gap_energy = en.gap_energy;
        let a_k = table.and_then(|tb| tb.a_k(e.k));
        if let Ok(rs) = rescale_window(sol, e, model, a_k, opts.core_depth) {
            e.profile_mismatch = rs.mismatch;
            e.phi_shape_mismatch = rs.phi_shape;
        }
    }
    Ok(events)
}

/// Energies over the window of `event` and over the gap to `next`.
pub fn window_energies(
    sol: &RadialSolution,
    model: &GrowthModel,
    event: &ConcentrationEvent,
    next: Option<&ConcentrationEvent>,
) -> Result<WindowEnergies> {
    let [t_lo, t_hi] = event.window_t;
    let energy_fprime = quad(sol, model, Density::Phi, t_lo, t_hi)?;
    let gp = model.eval_ext(event.u_center)?.g_prime;
    let energy_f_scaled = gp * quad(sol, model, Density::W, t_lo, t_hi)?;
    let gap_energy = match next {
        Some(nx) => {
            let gp_mu = model.evaluate(sol.mu)?.g_prime;
            Some(gp_mu * quad(sol, model, Density::W, nx.window_t[1], t_lo)?)
        }
        None => None,
    };
    Ok(WindowEnergies { energy_fprime, energy_f_scaled, gap_energy })
}

/// Samples `z_{k,n}(rho) = g'(u_k)(u(gamma rho) - u_k)` over the window and
/// compares with the tower profile `a_k` on its core.
pub fn rescale_window(
    sol: &RadialSolution,
    event: &ConcentrationEvent,
    model: &GrowthModel,
    a_k: Option<f64>,
    core_depth: f64,
) -> Result<Rescaled> {
    let [t_lo, t_hi] = event.window_t;
    let idx: Vec<usize> = (0..sol.len()).filter(|&i| sol.t[i] >= t_lo && sol.t[i] <= t_hi).collect();
    if idx.len() < 10 {
        return Err(Error::domain(format!("window of event {} holds {} samples (< 10)", event.k, idx.len())));
    }
    let gp = model.eval_ext(event.u_center)?.g_prime;
    let log_gamma = event.gamma.ln();
    let profile = a_k.map(BubbleProfile::tower).transpose()?;
    let mut out = Rescaled { log_rho: Vec::new(), z: Vec::new(), core_samples: 0, mismatch: None, phi_shape: None };
    let (mut mis, mut shape): (f64, f64) = (0.0, 0.0);
    for &i in &idx {
        let log_rho = -sol.t[i] - log_gamma;
        let z = gp * (sol.u[i] - event.u_center);
        out.log_rho.push(log_rho);
        out.z.push(z);
        if let Some(p) = profile {
            let dens = p.log_r2_density(log_rho);
            let zk = dens - 2.0 * log_rho;
            if dens >= (0.5 * p.peak().1).ln() - core_depth {
                out.core_samples += 1;
                mis = mis.max((z - zk).abs());
                if let Some((log_phi, _, _)) = point_values(sol, model, sol.t[i], sol.u[i], sol.m[i]) {
                    shape = shape.max((log_phi - dens).exp_m1().abs());
                }
            }
        }
    }
    if profile.is_some() && out.core_samples > 0 {
        out.mismatch = Some(mis);
        out.phi_shape = Some(shape);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::compute_diagnostics;
    use crate::growth::{Family, Weight};
    use crate::recurrence::build_table;
    use crate::solver::{shoot_unit_lambda, SolverConfig};

    fn gelfand_events(mu: f64) -> (RadialSolution, Vec<ConcentrationEvent>) {
        let model = GrowthModel::gelfand();
        let sol = shoot_unit_lambda(&model, Weight::default(), mu, &SolverConfig::default()).unwrap();
        let d = compute_diagnostics(&sol, &model);
        let table = build_table(1.5, 5).unwrap();
        let ev = detect_bubbles(&d, &sol, &model, Some(&table), &DetectOptions::default()).unwrap();
        (sol, ev)
    }

    #[test]
    fn gelfand_single_event() {
        for mu in [0.2, 1.0, 2.0 * 2f64.ln(), 3.0, 6.0] {
            let (_, ev) = gelfand_events(mu);
            assert_eq!(ev.len(), 1, "mu = {mu}");
            let alpha = (0.5 * mu).exp() - 1.0;
            let e = &ev[0];
            if alpha > 1.0 {
                assert!(!e.boundary);
                assert!((e.r_center - alpha.powf(-0.5)).abs() < 1e-9, "{e:?}");
                assert!((e.phi_peak - 2.0).abs() < 1e-7, "{e:?}");
            } else {
                assert!(e.boundary && e.r_center == 1.0);
            }
            assert!((e.phi_peak - (e.r_center / e.gamma).powi(2)).abs() < 1e-12 * e.phi_peak);
        }
    }

    #[test]
    fn gelfand_exact_bubble() {
        // alpha = 1: u = 2 log(2/(1+r^2)), an exact a = 2 bubble with peak at r = 1
        let (sol, ev) = gelfand_events(2.0 * 2f64.ln());
        let e = &ev[0];
        assert!(e.profile_mismatch.unwrap() < 1e-6, "{e:?}");
        assert!(e.phi_shape_mismatch.unwrap() < 1e-6, "{e:?}");
        let rs = rescale_window(&sol, e, &GrowthModel::gelfand(), Some(2.0), 1e9).unwrap();
        assert!(rs.mismatch.unwrap() < 1e-6);
        // mass 8 alpha r^2/(1+alpha r^2)^2 integrates to 4 over the disc
        assert!((e.energy_fprime - 4.0 * 0.5).abs() < 1e-8, "{}", e.energy_fprime);
    }

    #[test]
    fn gelfand_energy_closed_form() {
        let mu = 5.0;
        let (_, ev) = gelfand_events(mu);
        let alpha: f64 = (0.5 * mu).exp() - 1.0;
        let e = &ev[0];
        // int phi dt over [r_a, r_b] = 4 [x/(1+x)] with x = alpha r^2
        let cum = |r: f64| {
            let x = alpha * r * r;
            4.0 * x / (1.0 + x)
        };
        let exact = cum(e.window[1]) - cum(e.window[0]);
        assert!((e.energy_fprime - exact).abs() < 1e-8, "{} vs {exact}", e.energy_fprime);
        // f' = f for Gelfand, so both energies agree
        assert!((e.energy_fprime - e.energy_f_scaled).abs() < 1e-10);
    }

    #[test]
    fn supercritical_two_events() {
        let model = GrowthModel::new(Family::PowerExp { p: 3.0 }).unwrap();
        let sol = shoot_unit_lambda(&model, Weight::default(), 200f64.cbrt(), &SolverConfig::default()).unwrap();
        let d = compute_diagnostics(&sol, &model);
        let table = build_table(1.5, 10).unwrap();
        let ev = detect_bubbles(&d, &sol, &model, Some(&table), &DetectOptions::default()).unwrap();
        assert!(ev.len() >= 2, "{ev:#?}");
        assert!((ev[0].phi_peak - 2.0).abs() < 0.3 && (ev[0].psi_at_peak - 2.0).abs() < 0.3, "{:?}", ev[0]);
        assert!((ev[1].height_ratio - 0.3660).abs() < 0.07, "{:?}", ev[1]);
        assert!((ev[0].energy_fprime - 4.0).abs() < 0.6 && (ev[0].energy_f_scaled - 4.0).abs() < 0.6, "{:?}", ev[0]);
        assert!(ev[0].gap_energy.unwrap() <= 0.2, "{:?}", ev[0]);
        for w in ev.windows(2) {
            assert!(w[0].u_center > w[1].u_center && w[0].t_center > w[1].t_center);
            assert!(w[0].window[1] <= w[1].window[0]);
        }
        for e in &ev {
            assert!(e.window[0] < e.r_center && e.r_center <= e.window[1]);
            assert!(e.energy_fprime >= 0.0 && e.energy_f_scaled >= 0.0);
        }
    }

    #[test]
    fn phi_minimum_windows_touch() {
        let model = GrowthModel::new(Family::PowerExp { p: 3.0 }).unwrap();
        let sol = shoot_unit_lambda(&model, Weight::default(), 200f64.cbrt(), &SolverConfig::default()).unwrap();
        let d = compute_diagnostics(&sol, &model);
        let opts = DetectOptions { window_rule: WindowRule::PhiMinimum, ..Default::default() };
        let ev = detect_bubbles(&d, &sol, &model, None, &opts).unwrap();
        assert!(ev.len() >= 2);
        assert_eq!(ev[0].window[1], ev[1].window[0]);
        assert_eq!(ev[0].gap_energy, Some(0.0));
        assert!(ev[0].profile_mismatch.is_none());
        // windows are additive: energies sum to the total over the covered range
        let total = total_energy(&sol, &model).unwrap();
        let sum: f64 = ev.iter().map(|e| e.energy_fprime).sum();
        assert!(sum <= total + 1e-9);
    }
}
