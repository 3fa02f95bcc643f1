//! Command-line front end: argument parsing, CSV emission, and the
//! convergence study over the built-in problems.

use clap::error::ErrorKind;
use clap::Parser;
use daeo::integrator::{simulate, IntegratorConfig, SimulationError, Trajectory};
use daeo::problem::{problem_by_name, BuiltinProblem, DaeoProblem, PROBLEM_NAMES};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    /// Malformed invocation; exits 2.
    Usage(String),
    /// `--help`/`--version` text; exits 0.
    Help(String),
    /// Runtime failure; exits 3.
    Simulation(SimulationError),
    Io(std::io::Error),
    /// The problem has no analytic reference to measure errors against.
    MissingReference(String),
    /// All measured errors were zero (or negative input), so a log-log fit
    /// is meaningless.
    DegenerateFit,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Help(m) => write!(f, "{m}"),
            CliError::Simulation(e) => write!(f, "simulation failed: {e}"),
            CliError::Io(e) => write!(f, "output failed: {e}"),
            CliError::MissingReference(p) => {
                write!(f, "problem `{p}` has no analytic reference trajectory")
            }
            CliError::DegenerateFit => {
                write!(f, "errors are identically zero; log-log slope is undefined")
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        CliError::Simulation(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}

const DEFAULT_CONVERGE_DTS: &str = "0.04,0.02,0.01,0.005,0.0025,0.00125";

#[derive(Parser, Debug)]
#[command(name = "daeo", about = "Simulate differential equations with embedded global optimization")]
struct Args {
    /// Problem name (ex1, ex2)
    #[arg(long)]
    problem: String,
    /// Integration step
    #[arg(long, default_value_t = 0.02)]
    dt: f64,
    /// Override the problem's end time
    #[arg(long)]
    t_end: Option<f64>,
    /// Locate optimizer exchanges and split steps there (on), or lock the
    /// active branch through each full step (off)
    #[arg(long, default_value = "on", value_parser = ["on", "off"])]
    events: String,
    /// Trajectory CSV path; events go to the sibling `<stem>.events.csv`.
    /// In convergence mode, the study table.
    #[arg(long, default_value = "daeo_out.csv")]
    output: PathBuf,
    /// Run the convergence study over a comma-separated list of steps
    /// (at least three; bare flag uses the default list)
    #[arg(long, num_args = 0..=1, default_missing_value = DEFAULT_CONVERGE_DTS)]
    converge: Option<String>,
    /// Newton tolerance for the coupled step solve and optimum refinement
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Mode {
    Simulate,
    Converge(Vec<f64>),
}

/// A fully validated invocation.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub problem_name: String,
    pub cfg: IntegratorConfig,
    pub output: PathBuf,
    pub mode: Mode,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;
    let problem = problem_by_name(&args.problem).ok_or_else(|| {
        usage(format!(
            "unknown problem `{}`; known problems: {}",
            args.problem,
            PROBLEM_NAMES.join(", ")
        ))
    })?;
    if !(args.dt.is_finite() && args.dt > 0.0) {
        return Err(usage(format!("--dt must be positive, got {}", args.dt)));
    }
    let mut cfg = IntegratorConfig {
        dt: args.dt,
        t_end: args.t_end,
        events_enabled: args.events == "on",
        ..IntegratorConfig::default()
    };
    if let Some(tol) = args.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(usage(format!("--tol must be positive, got {tol}")));
        }
        cfg.newton_tol = tol;
        cfg.search.newton_tol = tol;
    }
    if let Some(t_end) = args.t_end {
        let (t0, _) = problem.time_span();
        if !(t_end.is_finite() && t_end > t0) {
            return Err(usage(format!("--t-end must exceed the start time {t0}, got {t_end}")));
        }
    }
    let mode = match &args.converge {
        None => Mode::Simulate,
        Some(list) => {
            let dts = list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite() && *v > 0.0)
                        .ok_or_else(|| usage(format!("bad step `{s}` in --converge list")))
                })
                .collect::<Result<Vec<f64>, CliError>>()?;
            if dts.len() < 3 {
                return Err(usage(format!(
                    "--converge needs at least 3 steps to fit a slope, got {}",
                    dts.len()
                )));
            }
            Mode::Converge(dts)
        }
    };
    Ok(RunSpec { problem_name: args.problem, cfg, output: args.output, mode })
}

/// Sibling path for the events table: `out.csv` -> `out.events.csv`.
pub fn events_path(output: &Path) -> PathBuf {
    let mut p = output.to_path_buf();
    p.set_extension("events.csv");
    p
}

fn metadata_header<P: DaeoProblem>(p: &P, cfg: &IntegratorConfig, out: &mut String) {
    let domain = p.y_domain();
    let boxes: Vec<String> = domain
        .components()
        .iter()
        .map(|c| format!("[{}, {}]", c.lo(), c.hi()))
        .collect();
    let (_, span_end) = p.time_span();
    writeln!(out, "# problem: {}", p.name()).unwrap();
    writeln!(out, "# dt: {}", cfg.dt).unwrap();
    writeln!(out, "# t_end: {}", cfg.t_end.unwrap_or(span_end)).unwrap();
    writeln!(out, "# events: {}", if cfg.events_enabled { "on" } else { "off" }).unwrap();
    writeln!(out, "# ydomain: {}", boxes.join(" x ")).unwrap();
    writeln!(
        out,
        "# tolerances: newton_tol={:e} event_tol={:e} detect_abstol={:e} tie_tol={:e}",
        cfg.newton_tol, cfg.event_tol, cfg.detect_abstol, cfg.tie_tol
    )
    .unwrap();
}

/// Trajectory table: one row per grid point plus one per located event.
/// The y columns carry the global minimizer; floats are printed in Rust's
/// shortest round-trip form, so parsing recovers them exactly.
pub fn trajectory_csv<P: DaeoProblem>(p: &P, cfg: &IntegratorConfig, traj: &Trajectory) -> String {
    let mut out = String::new();
    metadata_header(p, cfg, &mut out);
    let xs: Vec<String> = (0..p.n_x()).map(|i| format!("x{i}")).collect();
    let ys: Vec<String> = (0..p.n_y()).map(|i| format!("y{i}")).collect();
    writeln!(out, "t,{},{},h,event", xs.join(","), ys.join(",")).unwrap();
    for row in &traj.points {
        write!(out, "{}", row.t).unwrap();
        for v in &row.x {
            write!(out, ",{v}").unwrap();
        }
        for v in &row.ystar {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out, ",{},{}", row.hstar, u8::from(row.is_event)).unwrap();
    }
    out
}

/// Events table, one row per located exchange.
pub fn events_csv<P: DaeoProblem>(p: &P, traj: &Trajectory) -> String {
    let mut out = String::new();
    let xs: Vec<String> = (0..p.n_x()).map(|i| format!("x{i}")).collect();
    let before: Vec<String> = (0..p.n_y()).map(|i| format!("y_before{i}")).collect();
    let after: Vec<String> = (0..p.n_y()).map(|i| format!("y_after{i}")).collect();
    writeln!(out, "t_event,{},{},{}", xs.join(","), before.join(","), after.join(",")).unwrap();
    for ev in &traj.events {
        write!(out, "{}", ev.t_event).unwrap();
        for v in &ev.x_event {
            write!(out, ",{v}").unwrap();
        }
        for v in &ev.y_before {
            write!(out, ",{v}").unwrap();
        }
        for v in &ev.y_after {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Step-scaled L1 distance to the analytic reference over the uniform grid
/// rows; event rows are excluded so refined grids stay comparable.
pub fn error_norm<P: DaeoProblem>(p: &P, traj: &Trajectory, dt: f64) -> Result<f64, CliError> {
    let reference = p
        .reference()
        .filter(|r| r.has_trajectory())
        .ok_or_else(|| CliError::MissingReference(p.name().to_string()))?;
    let mut sum = 0.0;
    for row in traj.points.iter().filter(|r| !r.is_event) {
        let xr = reference.x_of_t(row.t).expect("reference present");
        sum += row.x.iter().zip(&xr).map(|(a, b)| (a - b).abs()).sum::<f64>();
    }
    Ok(dt * sum)
}

/// Least-squares slope of log(err) against log(dt).
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64, CliError> {
    if points.len() < 2 || points.iter().any(|&(dt, err)| dt <= 0.0 || err <= 0.0) {
        return Err(CliError::DegenerateFit);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(dt, e)| (dt.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(CliError::DegenerateFit);
    }
    Ok(sxy / sxx)
}

fn run_simulation(p: &BuiltinProblem, spec: &RunSpec) -> Result<(), CliError> {
    let traj = simulate(p, &spec.cfg)?;
    let table = trajectory_csv(p, &spec.cfg, &traj);
    let events = events_csv(p, &traj);
    std::fs::write(&spec.output, table)?;
    std::fs::write(events_path(&spec.output), events)?;
    println!(
        "{}: {} rows, {} events -> {}",
        p.name(),
        traj.points.len(),
        traj.events.len(),
        spec.output.display()
    );
    Ok(())
}

/// One row of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub error_on: f64,
    pub error_off: f64,
}

/// Runs the study rows without touching the filesystem.
pub fn convergence_rows<P: DaeoProblem + Sync>(
    p: &P,
    base: &IntegratorConfig,
    dts: &[f64],
) -> Result<Vec<ConvergenceRow>, CliError> {
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut cfg = base.clone();
        cfg.dt = dt;
        cfg.events_enabled = true;
        let error_on = error_norm(p, &simulate(p, &cfg)?, dt)?;
        cfg.events_enabled = false;
        let error_off = error_norm(p, &simulate(p, &cfg)?, dt)?;
        rows.push(ConvergenceRow { dt, error_on, error_off });
    }
    Ok(rows)
}

fn convergence_study(p: &BuiltinProblem, spec: &RunSpec, dts: &[f64]) -> Result<(), CliError> {
    let rows = convergence_rows(p, &spec.cfg, dts)?;
    let slope_on = fit_slope(&rows.iter().map(|r| (r.dt, r.error_on)).collect::<Vec<_>>())?;
    let slope_off = fit_slope(&rows.iter().map(|r| (r.dt, r.error_off)).collect::<Vec<_>>())?;
    let mut out = String::new();
    writeln!(out, "# problem: {}", p.name()).unwrap();
    writeln!(out, "# step-scaled L1 error vs the analytic reference; event rows excluded").unwrap();
    writeln!(out, "dt,error_on,error_off").unwrap();
    for r in &rows {
        writeln!(out, "{},{},{}", r.dt, r.error_on, r.error_off).unwrap();
    }
    std::fs::write(&spec.output, out)?;
    println!("events-on  log-log slope: {slope_on:.3}");
    println!("events-off log-log slope: {slope_off:.3}");
    println!("table -> {}", spec.output.display());
    Ok(())
}

pub fn run(spec: &RunSpec) -> Result<(), CliError> {
    let problem = problem_by_name(&spec.problem_name)
        .ok_or_else(|| usage(format!("unknown problem `{}`", spec.problem_name)))?;
    match &spec.mode {
        Mode::Simulate => run_simulation(&problem, spec),
        Mode::Converge(dts) => convergence_study(&problem, spec, dts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(line: &str) -> Result<RunSpec, CliError> {
        parse_args(std::iter::once("daeo").chain(line.split_whitespace()))
    }

    #[test]
    fn flags_assemble_a_spec() {
        let spec = parse("--problem ex1 --dt 0.01 --events off --output run.csv").unwrap();
        assert_eq!(spec.problem_name, "ex1");
        assert_eq!(spec.cfg.dt, 0.01);
        assert!(!spec.cfg.events_enabled);
        assert!(matches!(spec.mode, Mode::Simulate));
        assert_eq!(spec.output, PathBuf::from("run.csv"));
    }

    #[test]
    fn bad_invocations_are_usage_errors() {
        for line in [
            "--problem ex9",
            "--problem ex1 --dt -0.5",
            "--problem ex1 --dt nan",
            "--problem ex1 --events sideways",
            "--problem ex1 --tol 0",
            "--problem ex1 --t-end -3",
            "--problem ex1 --converge 0.04,0.02",
            "--problem ex1 --converge 0.04,bogus,0.01",
            "--no-such-flag",
            "",
        ] {
            match parse(line) {
                Err(e @ CliError::Usage(_)) => assert_eq!(e.exit_code(), 2, "{line}"),
                other => panic!("`{line}` should be a usage error, got {other:?}"),
            }
        }
    }

    #[test]
    fn help_is_not_an_error() {
        let e = parse("--help").unwrap_err();
        assert_eq!(e.exit_code(), 0);
        assert!(matches!(e, CliError::Help(_)));
    }

    #[test]
    fn bare_converge_uses_the_default_ladder() {
        let spec = parse("--problem ex1 --converge").unwrap();
        match spec.mode {
            Mode::Converge(dts) => {
                assert_eq!(dts, vec![0.04, 0.02, 0.01, 0.005, 0.0025, 0.00125]);
            }
            other => panic!("expected converge mode, got {other:?}"),
        }
    }

    #[test]
    fn tol_overrides_both_newton_tolerances() {
        let spec = parse("--problem ex1 --tol 1e-10").unwrap();
        assert_eq!(spec.cfg.newton_tol, 1e-10);
        assert_eq!(spec.cfg.search.newton_tol, 1e-10);
    }

    #[test]
    fn slope_fit_recovers_exact_power_laws() {
        let pts: Vec<(f64, f64)> =
            [0.04, 0.02, 0.01].iter().map(|&dt| (dt, 3.0 * dt * dt)).collect();
        let s = fit_slope(&pts).unwrap();
        assert!((s - 2.0).abs() < 1e-12, "slope {s}");
        assert!(matches!(fit_slope(&[(0.1, 0.0), (0.2, 0.0)]), Err(CliError::DegenerateFit)));
        assert!(matches!(fit_slope(&[(0.1, 1.0)]), Err(CliError::DegenerateFit)));
    }

    #[test]
    fn error_norm_matches_the_constant_offset_identity() {
        use daeo::problem::Example1;
        let p = Example1::new();
        let reference = p.reference().unwrap();
        let dt = 0.25;
        let eps = 1e-3;
        let points: Vec<_> = (0..5)
            .map(|k| {
                let t = k as f64 * dt;
                let x = reference.x_of_t(t).unwrap();
                daeo::integrator::TrajectoryPoint {
                    t,
                    x: vec![x[0] + eps],
                    ystar: vec![1.0],
                    hstar: 0.0,
                    active_label: 0,
                    is_event: false,
                    optima: vec![],
                }
            })
            .collect();
        let traj = Trajectory { points, events: vec![] };
        let norm = error_norm(&p, &traj, dt).unwrap();
        // Constant offset over N+1 rows: dt * (N+1) * eps.
        assert!((norm - dt * 5.0 * eps).abs() < 1e-15, "norm {norm}");
    }

    #[test]
    fn missing_reference_is_an_unsupported_problem() {
        use daeo::problem::Example2;
        let p = Example2::new();
        let traj = Trajectory { points: vec![], events: vec![] };
        assert!(matches!(error_norm(&p, &traj, 0.02), Err(CliError::MissingReference(_))));
    }

    #[test]
    fn events_go_to_a_sibling_file() {
        assert_eq!(events_path(Path::new("out.csv")), PathBuf::from("out.events.csv"));
        assert_eq!(events_path(Path::new("runs/a")), PathBuf::from("runs/a.events.csv"));
    }
}
