use bubbles::analysis::{compute_diagnostics, derivative_check, detect_bubbles, total_energy, window_energies, DetectOptions, WindowRule};
use bubbles::solver::{shoot, RadialSolution, SolverConfig};
use bubbles::{Family, GrowthModel, Weight};
use proptest::prelude::*;

fn power(p: f64) -> GrowthModel {
    GrowthModel::new(Family::PowerExp { p }).unwrap()
}

fn shot(model: &GrowthModel, g: f64) -> RadialSolution {
    let mu = model.inverse_g(g).unwrap();
    shoot(model, Weight::default(), mu, &SolverConfig::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solution_is_monotone_with_sane_steps(p in 2.2f64..3.5, g in 20.0f64..200.0) {
        let model = power(p);
        let sol = shot(&model, g);
        prop_assert!(sol.m.iter().all(|&m| m >= 0.0));
        prop_assert!(sol.u.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(sol.min_step >= 1e-4, "min step {}", sol.min_step);
        prop_assert_eq!(*sol.t.last().unwrap(), 0.0);
        prop_assert!(sol.u.last().unwrap().abs() < 1e-9);
    }

    #[test]
    fn events_are_consistent(p in 2.2f64..3.5, g in 20.0f64..200.0, rule in prop_oneof![Just(WindowRule::Hybrid), Just(WindowRule::PhiMinimum)]) {
        let model = power(p);
        let sol = shot(&model, g);
        let diag = compute_diagnostics(&sol, &model);
        let opts = DetectOptions { window_rule: rule, ..DetectOptions::default() };
        let events = detect_bubbles(&diag, &sol, &model, None, &opts).unwrap();
        prop_assert!(!events.is_empty());
        let total = total_energy(&sol, &model).unwrap();
        let mut sum = 0.0;
        for (i, e) in events.iter().enumerate() {
            prop_assert_eq!(e.k, i + 1);
            let rel = (e.phi_peak - (e.r_center / e.gamma).powi(2)).abs() / e.phi_peak;
            prop_assert!(rel < 1e-12, "phi_peak vs (r/gamma)^2: {}", rel);
            prop_assert!(e.window[0] <= e.r_center && e.r_center <= e.window[1]);
            prop_assert!(e.energy_fprime >= 0.0 && e.energy_f_scaled >= 0.0);
            prop_assert!(e.gap_energy.is_none_or(|g| g >= 0.0));
            if let Some(next) = events.get(i + 1) {
                // k grows outward: lower centers, disjoint windows
                prop_assert!(next.u_center < e.u_center);
                prop_assert!(e.window[1] <= next.window[0] * (1.0 + 1e-12));
                if rule == WindowRule::PhiMinimum {
                    prop_assert_eq!(e.window[1], next.window[0]);
                }
            }
            sum += e.energy_fprime;
        }
        prop_assert!(sum <= total * (1.0 + 1e-9), "windows {} > total {}", sum, total);
    }

    #[test]
    fn derivative_identity_bound(p in 2.2f64..3.5, g in 20.0f64..200.0) {
        let model = power(p);
        let sol = shot(&model, g);
        let diag = compute_diagnostics(&sol, &model);
        let c = derivative_check(&diag, &sol, &model).unwrap();
        prop_assert!(c.eps_ratio <= 1.0 + 1e-9, "{:?}", c);
    }
}

#[test]
fn window_energies_are_additive() {
    let model = power(3.0);
    let sol = shot(&model, 200.0);
    let diag = compute_diagnostics(&sol, &model);
    let opts = DetectOptions { window_rule: WindowRule::PhiMinimum, ..DetectOptions::default() };
    let events = detect_bubbles(&diag, &sol, &model, None, &opts).unwrap();
    assert!(events.len() >= 2);
    let first = window_energies(&sol, &model, &events[0], Some(&events[1])).unwrap();
    let second = window_energies(&sol, &model, &events[1], events.get(2)).unwrap();
    assert!((first.energy_fprime - events[0].energy_fprime).abs() < 1e-12);
    // the two windows touch, so their union is one window
    let mut merged = events[0].clone();
    merged.window_t = [events[1].window_t[0], events[0].window_t[1]];
    let union = window_energies(&sol, &model, &merged, events.get(2)).unwrap();
    let rel = (union.energy_fprime - first.energy_fprime - second.energy_fprime).abs() / union.energy_fprime;
    assert!(rel < 1e-9, "{rel}");
}

#[test]
fn shots_are_bitwise_deterministic() {
    let model = power(3.0);
    let a = shot(&model, 150.0);
    let b = shot(&model, 150.0);
    assert_eq!(a, b);
}

#[test]
fn halving_tolerance_barely_moves_gelfand() {
    let model = GrowthModel::gelfand();
    let cfg = SolverConfig::default();
    let fine = SolverConfig { rel_tol: 0.5 * cfg.rel_tol, ..cfg };
    let a = shoot(&model, Weight::default(), 1.0, &cfg).unwrap();
    let b = shoot(&model, Weight::default(), 1.0, &fine).unwrap();
    assert!((a.lambda() - b.lambda()).abs() / a.lambda() < 10.0 * cfg.rel_tol);
}
