use std::path::{Path, PathBuf};

use bubbles::analysis::{compute_diagnostics, detect_bubbles, total_energy, ConcentrationEvent, DetectOptions};
use bubbles::bifurcation::{sweep, turning_points, RefineOptions, TurnKind, TurningPoint};
use bubbles::numeric::{geomspace, linspace};
use bubbles::profiles::{eval_profile, BubbleProfile};
use bubbles::recurrence::{build_table, RecurrenceTable};
use bubbles::solver::{identity_residuals, shoot, IdentityResiduals, RadialSolution, ScalarMode, SolverConfig};
use bubbles::{GrowthModel, Weight};
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command, DetectArgs, GridSpec, ProfileArgs, ProfileChoice, RecurrenceArgs, SolveArgs, SolverArgs, SweepArgs};
use crate::output::{num, opt_num, write_csv, write_json};
use crate::{verify, CliError};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Recurrence(a) => recurrence(a),
        Command::Profile(a) => profile(a),
        Command::Solve(a) => solve(a),
        Command::Detect(a) => detect(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Verify(a) => verify::run(a),
    }
}

fn recurrence(a: &RecurrenceArgs) -> Result<(), CliError> {
    let t = build_table(a.q, a.k)?;
    let rows = (0..t.k_max()).map(|i| {
        vec![(i + 1).to_string(), num(t.a[i]), num(t.delta[i]), num(t.eta[i]), num(t.eta_tilde[i])]
    });
    write_csv(&a.out, &["k", "a_k", "delta_k", "eta_k", "eta_tilde_k"], rows)
}

fn profile(a: &ProfileArgs) -> Result<(), CliError> {
    let prof = match a.a {
        ProfileChoice::Regular => BubbleProfile::Regular0,
        ProfileChoice::Tower(v) => BubbleProfile::tower(v)?,
    };
    let grid = match a.grid {
        GridSpec::Lin { lo, hi, n } => linspace(lo, hi, n),
        GridSpec::Geom { lo, hi, n } => geomspace(lo, hi, n),
    };
    let mut rows = Vec::with_capacity(grid.len());
    for r in grid {
        let v = eval_profile(&prof, r)?;
        let r2_ez = if r > 0.0 { prof.log_r2_density(r.ln()).exp() } else { 0.0 };
        rows.push(vec![num(r), num(v.z), num(v.z_prime), num(r2_ez)]);
    }
    write_csv(&a.out, &["r", "z", "z_prime", "r2_ez"], rows)
}

fn solver_config(s: &SolverArgs) -> SolverConfig {
    SolverConfig {
        rel_tol: s.rel_tol,
        abs_tol: s.abs_tol,
        max_step: s.max_step,
        scalar_mode: s.scalar_mode,
        ..SolverConfig::default()
    }
}

fn model_of(spec: &str) -> Result<GrowthModel, CliError> {
    Ok(GrowthModel::from_spec(spec)?)
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

#[derive(Serialize)]
struct SolveSidecar<'a> {
    mu: f64,
    log_lambda: f64,
    r_zero_pre_rescale: f64,
    residuals: Option<IdentityResiduals>,
    steps: usize,
    rejected: usize,
    samples: usize,
    scalar_mode: ScalarMode,
    config: &'a SolveArgs,
}

/// The part of the sidecar `detect` needs back.
#[derive(Deserialize)]
struct SidecarIn {
    mu: f64,
    log_lambda: f64,
    r_zero_pre_rescale: f64,
    steps: usize,
    rejected: usize,
    scalar_mode: String,
    config: SidecarConfig,
}

#[derive(Deserialize)]
struct SidecarConfig {
    h: String,
    model: String,
}

const SOLUTION_HEADER: [&str; 7] = ["t", "r", "u", "m", "log_rhs", "phi", "psi"];

fn solve(a: &SolveArgs) -> Result<(), CliError> {
    let model = model_of(&a.model)?;
    let weight = Weight::from_spec(&a.h)?;
    let cfg = solver_config(&a.solver);
    cfg.validate()?;
    let sol = shoot(&model, weight, a.mu, &cfg)?;
    let diag = compute_diagnostics(&sol, &model);
    let rows = (0..sol.len()).map(|i| {
        let (phi, psi) = if diag.valid[i] { (Some(diag.phi(i)), Some(diag.psi[i])) } else { (None, None) };
        vec![
            num(sol.t[i]),
            num(sol.r(i)),
            num(sol.u[i]),
            num(sol.m[i]),
            num(sol.log_w[i]),
            opt_num(phi),
            opt_num(psi),
        ]
    });
    write_csv(&a.out, &SOLUTION_HEADER, rows)?;
    let side = SolveSidecar {
        mu: sol.mu,
        log_lambda: sol.log_lambda,
        r_zero_pre_rescale: sol.r_zero_pre_rescale,
        residuals: identity_residuals(&sol, &model).ok(),
        steps: sol.steps,
        rejected: sol.rejected,
        samples: sol.len(),
        scalar_mode: sol.scalar_mode,
        config: a,
    };
    write_json(&sidecar_path(&a.out), &side)
}

fn parse_cell(path: &Path, line: usize, col: &str, s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Io(format!("{}:{line}: column {col}: {s:?} is not a number", path.display())))
}

fn read_solution(path: &Path, model_spec: &str) -> Result<RadialSolution, CliError> {
    let side_path = sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| CliError::io(&side_path, e))?;
    let side: SidecarIn =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", side_path.display())))?;
    if side.config.model != model_spec {
        eprintln!(
            "warning: solution was computed with --model {}, analysing with {model_spec}",
            side.config.model
        );
    }
    let weight = Weight::from_spec(&side.config.h)?;
    let scalar_mode: ScalarMode = side.scalar_mode.parse()?;

    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let header = rdr.headers().map_err(|e| CliError::csv(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Io(format!("{}: missing column {name:?}", path.display())))
    };
    let (ct, cu, cm, cw) = (col("t")?, col("u")?, col("m")?, col("log_rhs")?);
    let (mut t, mut u, mut m, mut log_w) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let line = i + 2;
        let cell = |c: usize, name: &str| parse_cell(path, line, name, rec.get(c).unwrap_or(""));
        t.push(cell(ct, "t")?);
        u.push(cell(cu, "u")?);
        m.push(cell(cm, "m")?);
        log_w.push(cell(cw, "log_rhs")?);
    }
    if t.len() < 2 || t.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(CliError::Io(format!("{}: t must be strictly decreasing over >= 2 rows", path.display())));
    }
    let min_step = t.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    Ok(RadialSolution {
        mu: side.mu,
        log_lambda: side.log_lambda,
        t,
        u,
        m,
        log_w,
        r_zero_pre_rescale: side.r_zero_pre_rescale,
        steps: side.steps,
        rejected: side.rejected,
        min_step,
        scalar_mode,
        weight,
    })
}

#[derive(Serialize)]
struct EventOut {
    k: usize,
    t_center: f64,
    r_center: f64,
    u_center: f64,
    phi_peak: f64,
    psi: f64,
    gamma: f64,
    boundary: bool,
    window: [f64; 2],
    energy_fprime: f64,
    energy_f_scaled: f64,
    gap_energy: Option<f64>,
    height_ratio: f64,
    height_log: f64,
    position_ratio: f64,
    profile_mismatch: Option<f64>,
    phi_shape_mismatch: Option<f64>,
}

impl From<&ConcentrationEvent> for EventOut {
    fn from(e: &ConcentrationEvent) -> Self {
        EventOut {
            k: e.k,
            t_center: e.t_center,
            r_center: e.r_center,
            u_center: e.u_center,
            phi_peak: e.phi_peak,
            psi: e.psi_at_peak,
            gamma: e.gamma,
            boundary: e.boundary,
            window: e.window,
            energy_fprime: e.energy_fprime,
            energy_f_scaled: e.energy_f_scaled,
            gap_energy: e.gap_energy,
            height_ratio: e.height_ratio,
            height_log: e.height_log,
            position_ratio: e.position_ratio,
            profile_mismatch: e.profile_mismatch,
            phi_shape_mismatch: e.phi_shape_mismatch,
        }
    }
}

#[derive(Serialize)]
struct Totals {
    energy: f64,
    sum_2a_target: Option<f64>,
}

#[derive(Serialize)]
struct DetectReport<'a> {
    mu: f64,
    log_lambda: f64,
    events: Vec<EventOut>,
    totals: Totals,
    config: &'a DetectArgs,
}

/// `sum 2 a_k` over `n` events; the first row `a_1 = 2` needs no table.
fn sum_2a(table: Option<&RecurrenceTable>, n: usize) -> Option<f64> {
    match (n, table) {
        (0, _) => Some(0.0),
        (1, _) => Some(4.0),
        (_, Some(t)) => (n <= t.k_max()).then(|| t.mass_sum(n)),
        (_, None) => None,
    }
}

fn detect(a: &DetectArgs) -> Result<(), CliError> {
    let model = model_of(&a.model)?;
    let sol = read_solution(&a.solution, &a.model)?;
    let diag = compute_diagnostics(&sol, &model);
    let opts = DetectOptions { peak_floor: a.peak_floor, window_rule: a.window_rule, ..DetectOptions::default() };
    // generous depth; rows beyond the detected events are never read
    let table = if a.q < 2.0 { Some(build_table(a.q, 32)?) } else { None };
    let events = detect_bubbles(&diag, &sol, &model, table.as_ref(), &opts)?;
    let report = DetectReport {
        mu: sol.mu,
        log_lambda: sol.log_lambda,
        totals: Totals { energy: total_energy(&sol, &model)?, sum_2a_target: sum_2a(table.as_ref(), events.len()) },
        events: events.iter().map(EventOut::from).collect(),
        config: a,
    };
    write_json(&a.report, &report)
}

#[derive(Serialize)]
struct SweepSidecar<'a> {
    points: usize,
    grid_turning_points: &'a [TurningPoint],
    turning_points: Vec<TurningPoint>,
    config: &'a SweepArgs,
}

fn run_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let model = model_of(&a.model)?;
    let weight = Weight::from_spec(&a.h)?;
    let cfg = solver_config(&a.solver);
    cfg.validate()?;
    let grid = linspace(a.mu_min, a.mu_max, a.points);
    let branch = sweep(&model, weight, &grid, &cfg)?;
    let refined =
        if a.no_refine { Vec::new() } else { turning_points(&model, weight, &cfg, &branch, &RefineOptions::default())? };
    let flag = |i: usize| {
        match branch.turning_points.iter().find(|tp| tp.grid_index == i).map(|tp| tp.kind) {
            Some(TurnKind::Maximum) => "1",
            Some(TurnKind::Minimum) => "-1",
            None => "0",
        }
    };
    let rows = branch.points.iter().enumerate().map(|(i, p)| {
        vec![
            num(p.mu),
            num(p.log_lambda),
            num(p.lambda),
            num(p.total_energy),
            p.bubble_count.to_string(),
            flag(i).to_string(),
        ]
    });
    write_csv(&a.out, &["mu", "log_lambda", "lambda", "total_energy", "bubble_count", "turning_flag"], rows)?;
    let side = SweepSidecar {
        points: branch.points.len(),
        grid_turning_points: &branch.turning_points,
        turning_points: refined,
        config: a,
    };
    write_json(&sidecar_path(&a.out), &side)
}
