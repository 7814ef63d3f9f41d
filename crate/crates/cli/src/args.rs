use std::ffi::OsString;
use std::path::PathBuf;

use bubbles::analysis::WindowRule;
use bubbles::solver::ScalarMode;
use bubbles::{Error, GrowthModel, Weight};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Radial blow-up solutions, energy recurrences and bubble detection.
#[derive(Debug, Parser, Serialize)]
#[command(name = "bubbles", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Tabulate (a_k, delta_k, eta_k, eta~_k).
    Recurrence(RecurrenceArgs),
    /// Sample a Liouville profile.
    Profile(ProfileArgs),
    /// Shoot one solution and write its samples.
    Solve(SolveArgs),
    /// Detect concentration events on a solution written by `solve`.
    Detect(DetectArgs),
    /// Trace lambda(mu) over a grid and refine its turning points.
    Sweep(SweepArgs),
    /// Run an invariant suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RecurrenceArgs {
    #[arg(long, value_parser = parse_q)]
    pub q: f64,
    #[arg(long, value_parser = parse_count)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileChoice {
    Regular,
    Tower(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpec {
    Lin { lo: f64, hi: f64, n: usize },
    Geom { lo: f64, hi: f64, n: usize },
}

#[derive(Debug, Args, Serialize)]
pub struct ProfileArgs {
    /// Tower exponent in (0, 2], or `regular` for z_0.
    #[arg(long, value_parser = parse_profile)]
    pub a: ProfileChoice,
    /// `geom:lo,hi,n` or `lin:lo,hi,n`.
    #[arg(long, value_parser = parse_grid)]
    pub grid: GridSpec,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value = "binary64", value_parser = parse_scalar_mode)]
    pub scalar_mode: ScalarMode,
    #[arg(long, default_value_t = 1e-10, value_parser = parse_positive)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-12, value_parser = parse_positive)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = 0.05, value_parser = parse_positive)]
    pub max_step: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: String,
    #[arg(long, value_parser = parse_positive)]
    pub mu: f64,
    /// `const`, `const:c=<v>` or `quad:a=<v>,b=<v>`.
    #[arg(long, default_value = "const", value_parser = parse_weight)]
    pub h: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectArgs {
    /// CSV written by `solve`; its `.json` sidecar supplies mu and h.
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, value_parser = parse_model)]
    pub model: String,
    /// Growth exponent selecting the recurrence table (none for q >= 2).
    #[arg(long, value_parser = parse_q_any)]
    pub q: f64,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 1e-3, value_parser = parse_positive)]
    pub peak_floor: f64,
    #[arg(long, default_value = "hybrid", value_parser = parse_window_rule)]
    pub window_rule: WindowRule,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: String,
    #[arg(long, value_parser = parse_positive)]
    pub mu_min: f64,
    #[arg(long, value_parser = parse_positive)]
    pub mu_max: f64,
    #[arg(long, value_parser = parse_points)]
    pub points: usize,
    #[arg(long, default_value = "const", value_parser = parse_weight)]
    pub h: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Skip the golden-section refinement of turning points.
    #[arg(long)]
    pub no_refine: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Growth,
    Profiles,
    Identities,
    Recurrence,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Optional JSON report of the individual checks.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    if let Command::Sweep(s) = &cli.command {
        if !(s.mu_max > s.mu_min) {
            return Err(clap::Error::raw(
                clap::error::ErrorKind::ValueValidation,
                format!("--mu-max ({}) must exceed --mu-min ({})\n", s.mu_max, s.mu_min),
            ));
        }
    }
    Ok(cli)
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn parse_q(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (1.0..2.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("q = {v} must lie in [1, 2)"))
    }
}

fn parse_q_any(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("q = {v} must be at least 1"))
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if (1..=1_000_000).contains(&n) => Ok(n),
        Ok(n) => Err(format!("{n} must lie in [1, 1000000]")),
        Err(_) => Err(format!("{s:?} is not a positive integer")),
    }
}

fn parse_points(s: &str) -> Result<usize, String> {
    let n = parse_count(s)?;
    if n >= 2 {
        Ok(n)
    } else {
        Err("a sweep needs at least 2 points".into())
    }
}

fn parse_model(s: &str) -> Result<String, String> {
    GrowthModel::from_spec(s).map_err(|e| e.to_string())?;
    Ok(s.to_string())
}

fn parse_weight(s: &str) -> Result<String, String> {
    Weight::from_spec(s).map_err(|e| e.to_string())?;
    Ok(s.to_string())
}

fn parse_scalar_mode(s: &str) -> Result<ScalarMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_window_rule(s: &str) -> Result<WindowRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_profile(s: &str) -> Result<ProfileChoice, String> {
    if s == "regular" {
        return Ok(ProfileChoice::Regular);
    }
    let a = parse_f64(s)?;
    if a > 0.0 && a <= 2.0 {
        Ok(ProfileChoice::Tower(a))
    } else {
        Err(format!("a = {a} must lie in (0, 2]"))
    }
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| format!("{s:?}: expected geom:lo,hi,n or lin:lo,hi,n"))?;
    let parts: Vec<&str> = rest.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("{rest:?}: expected three comma-separated values"));
    }
    let (lo, hi) = (parse_f64(parts[0])?, parse_f64(parts[1])?);
    let n = parse_count(parts[2])?;
    if !(hi > lo) || n < 2 {
        return Err(format!("{s:?}: need lo < hi and n >= 2"));
    }
    match kind {
        "lin" if lo >= 0.0 => Ok(GridSpec::Lin { lo, hi, n }),
        "geom" if lo > 0.0 => Ok(GridSpec::Geom { lo, hi, n }),
        "lin" | "geom" => Err(format!("{s:?}: radii must be nonnegative (positive for geom)")),
        other => Err(format!("unknown grid kind {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_command() {
        let cli = parse_args(["bubbles", "recurrence", "--q", "1.5", "--k", "10", "--out", "t.csv"]).unwrap();
        match cli.command {
            Command::Recurrence(r) => {
                assert_eq!((r.q, r.k), (1.5, 10));
                assert_eq!(r.out, PathBuf::from("t.csv"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn solve_command() {
        let cli = parse_args(["bubbles", "solve", "--model", "power-exp:p=3", "--mu", "6.0", "--out", "s.csv"]).unwrap();
        match cli.command {
            Command::Solve(s) => {
                assert_eq!(s.mu, 6.0);
                assert_eq!(s.h, "const");
                assert_eq!(s.solver.scalar_mode, ScalarMode::Binary64);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_model_names_fragment() {
        let e = parse_args(["bubbles", "solve", "--model", "power-exp:p=two", "--mu", "6", "--out", "s.csv"]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("p=two") && msg.contains("column 11"), "{msg}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_args(["bubbles", "recurrence", "--q", "2.5", "--k", "3", "--out", "t.csv"]).is_err());
        assert!(parse_args(["bubbles", "recurrence", "--q", "1.5", "--k", "0", "--out", "t.csv"]).is_err());
        assert!(parse_args(["bubbles", "recurrence", "--q", "1.5", "--k", "3", "--out", "t.csv", "--bogus"]).is_err());
        assert!(parse_args(["bubbles", "profile", "--a", "3", "--grid", "geom:1,2,3", "--out", "p.csv"]).is_err());
        assert!(parse_args(["bubbles", "profile", "--a", "1", "--grid", "geom:0,2,3", "--out", "p.csv"]).is_err());
        assert!(parse_args(["bubbles", "sweep", "--model", "pure-exp", "--mu-min", "2", "--mu-max", "1", "--points", "5", "--out", "b.csv"]).is_err());
        assert!(parse_args(["bubbles", "verify", "--suite", "nothing"]).is_err());
    }

    #[test]
    fn grid_and_profile_forms() {
        assert_eq!(parse_grid("lin:0,1,11").unwrap(), GridSpec::Lin { lo: 0.0, hi: 1.0, n: 11 });
        assert_eq!(parse_profile("regular").unwrap(), ProfileChoice::Regular);
        assert_eq!(parse_profile("1.5").unwrap(), ProfileChoice::Tower(1.5));
    }

    #[test]
    fn out_of_range_parameters_are_usage_errors() {
        assert!(parse_model("power-exp:p=1").is_err());
        assert!(parse_model("power-exp:p=-2").is_err());
        assert!(parse_model("multi-exp:k=2,m=1,l=0").is_ok());
    }
}
