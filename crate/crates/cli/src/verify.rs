use bubbles::growth::{check_h1, default_lemma_table, shipped_families, Exponent};
use bubbles::numeric::geomspace;
use bubbles::profiles::{normalization_data, ode_residual, profile_mass, BubbleProfile};
use bubbles::recurrence::{build_table, check_lemma_b3, limit_continuity};
use bubbles::solver::{identity_residuals, shoot, SolverConfig};
use bubbles::{GrowthModel, Weight};
use serde::Serialize;

use crate::args::{Suite, VerifyArgs};
use crate::output::write_json;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.0.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    /// A check whose computation itself failed.
    fn error(&mut self, name: impl Into<String>, e: bubbles::Error) {
        self.push(name, false, e.to_string());
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn growth(c: &mut Checks) {
    for fam in shipped_families() {
        let model = match GrowthModel::new(fam) {
            Ok(m) => m,
            Err(e) => {
                c.error(format!("{fam} construct"), e);
                continue;
            }
        };
        let h1 = check_h1(&model, 0.05);
        let flag = |ok: bool| if ok { "ok" } else { "violated" };
        c.push(
            format!("{fam} h1"),
            h1.all_ok(),
            format!(
                "monotonicity {}, range {}, limits {}, clause ii {}",
                flag(h1.monotonicity.ok),
                flag(h1.range.ok),
                flag(h1.limits.ok),
                flag(h1.clause_ii.ok)
            ),
        );
        let tab = match default_lemma_table(&model) {
            Ok(t) => t,
            Err(e) => {
                c.error(format!("{fam} lemmas"), e);
                continue;
            }
        };
        let g1: Vec<f64> = tab.rows.iter().map(|r| r.g1).collect();
        c.push(format!("{fam} g1 decreasing"), tab.g1_decreasing && tab.rows.len() >= 2, sci(&g1));
        if model.nominal_q() == Exponent::Finite(1.0) {
            let g4: Vec<f64> = tab.rows.iter().filter_map(|r| r.g4).collect();
            c.push(format!("{fam} g4 decreasing"), tab.g4_decreasing && g4.len() >= 2, sci(&g4));
        } else {
            let g3: Vec<f64> = tab.rows.iter().filter_map(|r| r.g3).collect();
            c.push(format!("{fam} g3 decreasing"), tab.g3_decreasing && g3.len() >= 2, sci(&g3));
        }
        c.push(
            format!("{fam} ku bound"),
            tab.ku_gap_at_top < 0.02,
            format!("|D - 1/p| = {:.3e} at t = {:.3e}", tab.ku_gap_at_top, tab.rows.last().map_or(f64::NAN, |r| r.t)),
        );
    }
}

fn profiles(c: &mut Checks) {
    let grid = geomspace(1e-3, 1e3, 241);
    let mut list = vec![("z_0".to_string(), BubbleProfile::Regular0)];
    for a in [2.0, 1.4641, 1.0, 0.5, 0.1] {
        match BubbleProfile::tower(a) {
            Ok(p) => list.push((format!("a = {a}"), p)),
            Err(e) => c.error(format!("a = {a}"), e),
        }
    }
    for (name, prof) in &list {
        let m = profile_mass(prof);
        c.push(
            format!("{name} mass"),
            m.relative_error < 1e-8,
            format!("{:.12} vs {} (rel {:.2e})", m.quadrature, m.analytic, m.relative_error),
        );
        match ode_residual(prof, &grid) {
            Ok(r) => c.push(format!("{name} ode residual"), r < 1e-9, format!("{r:.2e}")),
            Err(e) => c.error(format!("{name} ode residual"), e),
        }
        if let BubbleProfile::Tower { .. } = prof {
            match normalization_data(prof) {
                Ok((_, z, rz)) => c.push(
                    format!("{name} normalization"),
                    z.abs() < 1e-10 && (rz + 2.0).abs() < 1e-10,
                    format!("z = {z:.2e}, r z' = {rz:.15}"),
                ),
                Err(e) => c.error(format!("{name} normalization"), e),
            }
        }
    }
}

fn identities(c: &mut Checks) {
    let cfg = SolverConfig::default();
    let gelfand = GrowthModel::gelfand();
    for mu in [0.2, 1.0, 2.0 * std::f64::consts::LN_2, 3.0, 5.0] {
        let name = format!("gelfand mu = {mu:.6}");
        let sol = match shoot(&gelfand, Weight::default(), mu, &cfg) {
            Ok(s) => s,
            Err(e) => {
                c.error(name, e);
                continue;
            }
        };
        let alpha = (0.5 * mu).exp_m1();
        let exact = 8.0 * alpha / (1.0 + alpha).powi(2);
        let rel = (sol.lambda() - exact).abs() / exact;
        c.push(format!("{name} lambda"), rel < 1e-8, format!("{:.15} vs {exact:.15} (rel {rel:.2e})", sol.lambda()));
        residual_check(c, &name, identity_residuals(&sol, &gelfand));
    }
    for (spec, g_target) in [("power-exp:p=3", 120.0), ("multi-exp:k=2,m=1,l=0", 300.0)] {
        let res = GrowthModel::from_spec(spec).and_then(|m| {
            let mu = m.inverse_g(g_target)?;
            let sol = shoot(&m, Weight::default(), mu, &cfg)?;
            identity_residuals(&sol, &m)
        });
        residual_check(c, &format!("{spec} g(mu) = {g_target}"), res);
    }
    let res = GrowthModel::from_spec("power-exp:p=2").and_then(|m| {
        let w = Weight::quadratic(1.0, 0.5)?;
        let sol = shoot(&m, w, 3.0, &cfg)?;
        identity_residuals(&sol, &m)
    });
    residual_check(c, "power-exp:p=2 h = 1 + r^2/2", res);
}

fn residual_check(c: &mut Checks, name: &str, res: bubbles::Result<bubbles::solver::IdentityResiduals>) {
    match res {
        Ok(r) => c.push(
            format!("{name} identities"),
            r.id1 < 1e-6 && r.id2 < 1e-6 && r.pohozaev < 1e-6,
            format!("id1 {:.2e} id2 {:.2e} pohozaev {:.2e}", r.id1, r.id2, r.pohozaev),
        ),
        Err(e) => c.error(format!("{name} identities"), e),
    }
}

fn recurrence(c: &mut Checks) {
    match build_table(1.5, 2) {
        Ok(t) => {
            let s3 = 3f64.sqrt();
            let (d, a) = (t.delta[1] / t.delta[0], t.a[1]);
            c.push(
                "q = 1.5 second row",
                (d - 0.5 * (s3 - 1.0)).abs() < 1e-12 && (a - (2.0 * s3 - 2.0)).abs() < 1e-12,
                format!("delta_2/delta_1 = {d:.16}, a_2 = {a:.16}"),
            );
        }
        Err(e) => c.error("q = 1.5 second row", e),
    }
    for q in [1.0, 1.1, 1.5, 1.9] {
        match build_table(q, 50) {
            Ok(t) => {
                let r = check_lemma_b3(&t);
                c.push(format!("q = {q} mass identity"), r < 1e-10, format!("max residual {r:.2e} over k <= 50"));
                let dec = t.a.windows(2).all(|w| w[1] < w[0]) && t.eta.windows(2).all(|w| w[1] < w[0]);
                c.push(format!("q = {q} monotone"), dec, "a_k and eta_k strictly decreasing");
            }
            Err(e) => c.error(format!("q = {q} table"), e),
        }
    }
    let qs: Vec<f64> = (1..=6).map(|j| 1.0 + 10f64.powi(-j)).collect();
    match limit_continuity(&qs, 2) {
        Ok(rep) => {
            let gaps: Vec<f64> = rep.rows.iter().map(|r| r.gap_a).collect();
            let dec = gaps.windows(2).all(|w| w[1] < w[0]);
            let last = gaps.last().copied().unwrap_or(f64::NAN);
            c.push("q -> 1 continuity of a_2", dec && last < 1e-3, sci(&gaps));
        }
        Err(e) => c.error("q -> 1 continuity of a_2", e),
    }
}

pub fn run_suite(suite: Suite) -> Vec<Check> {
    let mut c = Checks::default();
    match suite {
        Suite::Growth => growth(&mut c),
        Suite::Profiles => profiles(&mut c),
        Suite::Identities => identities(&mut c),
        Suite::Recurrence => recurrence(&mut c),
    }
    c.0
}

pub fn run(a: &VerifyArgs) -> Result<(), CliError> {
    let checks = run_suite(a.suite);
    for ch in &checks {
        println!("{} {}: {}", if ch.pass { "PASS" } else { "FAIL" }, ch.name, ch.detail);
    }
    if let Some(path) = &a.report {
        write_json(path, &serde_json::json!({ "checks": checks, "config": a }))?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failed(failed))
    }
}
