//! `qhj` command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 numerical failure, 3 tolerance failure.

pub mod config;
pub mod tables;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qhj::integrator::{integrate, linspace};
use qhj::io::format_float;
use qhj::jacobi::{time_parametrize, trajectory_csv, TrajectoryPoint};
use qhj::milne::{default_points, default_q_max, j_curve, j_curve_csv, shoot_eigenvalue};
use qhj::squarewell;
use qhj::Potential;
use serde_json::{json, Value};

use config::{parse_file, Format, PotentialKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<qhj::Error> for CliError {
    fn from(e: qhj::Error) -> Self {
        use qhj::Error::*;
        match e {
            InvalidArgument(_) | EnergyOutOfRange { .. } | ActionOutOfRange { .. } | ModeViolation(_)
            | PolicyViolation | WrongPotential => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qhj", version, about = "Quantum stationary Hamilton-Jacobi solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate W, W', W'' on a grid.
    Solve,
    /// Action variable J at each energy.
    Action,
    /// Bound states: shooting on the oscillator, closed form on the well.
    Eigen,
    /// Time parametrization t − τ = ∂W/∂E along a grid.
    Time,
    /// Closed-form square-well reduced action on a grid.
    Well,
    /// Recompute a reference table and compare.
    Table {
        /// Table number, 1 to 4.
        id: u8,
    },
}

#[derive(Debug, Args, Default)]
pub struct Flags {
    /// Flat `key = value` file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// lho or well.
    #[arg(long, global = true)]
    pub potential: Option<String>,
    /// Energy, or a comma-separated list.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub energy: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub w0: Option<String>,
    /// Initial conjugate momentum; omitted means (2mE)^{1/2}.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pp0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub q0: Option<String>,
    /// Energy step for ∂W/∂E.
    #[arg(long, global = true)]
    pub epsilon: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub qmax: Option<String>,
    #[arg(long, global = true)]
    pub points: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub omega: Option<String>,
    #[arg(long, global = true)]
    pub v0: Option<String>,
    /// Square-well half width.
    #[arg(long, global = true)]
    pub a: Option<String>,
    #[arg(long, global = true)]
    pub hbar: Option<String>,
    #[arg(long, global = true)]
    pub mass: Option<String>,
    #[arg(long = "abs-tol", global = true)]
    pub abs_tol: Option<String>,
    #[arg(long = "rel-tol", global = true)]
    pub rel_tol: Option<String>,
    /// Label for the `case` column of J-curves.
    #[arg(long, global = true)]
    pub case: Option<String>,
    /// Oscillator level to shoot for.
    #[arg(long, global = true)]
    pub n: Option<String>,
    /// Shooting bracket `lo,hi`.
    #[arg(long, global = true)]
    pub bracket: Option<String>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("potential", &self.potential),
            ("energy", &self.energy),
            ("w0", &self.w0),
            ("p0", &self.p0),
            ("pp0", &self.pp0),
            ("q0", &self.q0),
            ("epsilon", &self.epsilon),
            ("qmax", &self.qmax),
            ("points", &self.points),
            ("out", &self.out),
            ("format", &self.format),
            ("omega", &self.omega),
            ("v0", &self.v0),
            ("a", &self.a),
            ("hbar", &self.hbar),
            ("mass", &self.mass),
            ("abs_tol", &self.abs_tol),
            ("rel_tol", &self.rel_tol),
            ("case", &self.case),
            ("n", &self.n),
            ("bracket", &self.bracket),
            ("jobs", &self.jobs),
        ]
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Action => "action",
            Command::Eigen => "eigen",
            Command::Time => "time",
            Command::Well => "well",
            Command::Table { .. } => "table",
        }
    }
}

/// Result of a successful command run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    /// A tolerance check failed; the data is still emitted.
    pub tolerance_failure: Option<String>,
    /// Points that could not be computed; the data is still emitted.
    pub numerical_failure: Option<String>,
}

impl Outcome {
    fn data(csv: String) -> Self {
        Self { csv, tolerance_failure: None, numerical_failure: None }
    }

    pub fn exit_code(&self) -> i32 {
        if self.numerical_failure.is_some() {
            EXIT_NUMERICAL
        } else if self.tolerance_failure.is_some() {
            EXIT_TOLERANCE
        } else {
            EXIT_OK
        }
    }
}

/// Merges file and flag settings into a validated config.
pub fn resolve_config(flags: &Flags) -> Result<RunConfig, CliError> {
    let mut raw: BTreeMap<String, String> = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            parse_file(&text)?
        }
        None => BTreeMap::new(),
    };
    for (k, v) in flags.pairs() {
        if let Some(v) = v {
            raw.insert(k.to_string(), v.clone());
        }
    }
    RunConfig::from_map(raw)
}

/// Runs a parsed command.
pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let job = || match command {
        Command::Solve => solve(cfg),
        Command::Action => action(cfg),
        Command::Eigen => eigen(cfg),
        Command::Time => time(cfg),
        Command::Well => well(cfg),
        Command::Table { id } => table(*id, cfg),
    };
    match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(job),
        None => job(),
    }
}

fn q_end(cfg: &RunConfig, potential: &Potential<f64>, energy: f64) -> f64 {
    cfg.qmax.unwrap_or_else(|| default_q_max(potential, energy))
}

fn grid(cfg: &RunConfig, from: f64, to: f64) -> Result<Vec<f64>, CliError> {
    if from == to {
        return Err(CliError::Usage("qmax must differ from q0".into()));
    }
    Ok(linspace(from, to, cfg.points.unwrap_or_else(|| default_points(from, to))))
}

fn solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let potential = cfg.build_potential()?;
    let e = cfg.single_energy()?;
    let m = cfg.microstate()?;
    let end = q_end(cfg, &potential, e);
    let n = cfg.points.unwrap_or_else(|| default_points(cfg.q0, end));
    let g = integrate(&potential, e, &m, end, n, &cfg.tolerances)?;
    Ok(Outcome::data(g.to_csv()))
}

fn case_label(cfg: &RunConfig) -> String {
    match (&cfg.case, cfg.p0) {
        (Some(c), _) => c.clone(),
        (None, Some(p)) => format!("p0={p}"),
        (None, None) => "p0=sqrt(2mE)".into(),
    }
}

fn action(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let potential = cfg.build_potential()?;
    let energies = cfg.require_energies()?;
    let m = cfg.microstate()?;
    let points = j_curve(&potential, energies, &m, cfg.qmax, &case_label(cfg), &cfg.tolerances);
    let failed: Vec<String> = points
        .iter()
        .filter_map(|p| p.j.as_ref().err().map(|e| format!("E={}: {e}", p.energy)))
        .collect();
    let mut out = Outcome::data(j_curve_csv(&potential, &points));
    if !failed.is_empty() {
        out.numerical_failure = Some(failed.join("; "));
    }
    Ok(out)
}

fn eigen(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.build_potential()? {
        Potential::FiniteSquareWell(w) => {
            let states = squarewell::eigenvalues(&w);
            Ok(Outcome::data(squarewell::eigen_report_csv(&w, &states)))
        }
        potential @ Potential::HarmonicOscillator(osc) => {
            let m = cfg.microstate()?;
            let quantum = osc.constants.hbar * osc.omega;
            let n = cfg.n as f64;
            let bracket = cfg.bracket.unwrap_or(((n - 0.9) * quantum, (n - 0.1) * quantum));
            let r = shoot_eigenvalue(&potential, cfg.n, bracket, &m, cfg.qmax, 1e-12, &cfg.tolerances)?;
            let two_pi_hbar = 2.0 * std::f64::consts::PI * osc.constants.hbar;
            let j = two_pi_hbar * n + r.j_residual;
            let parity = if cfg.n % 2 == 1 { "symmetric" } else { "antisymmetric" };
            let mut csv = String::from("n,parity,E,J_over_2pi,residual\n");
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                cfg.n,
                parity,
                format_float(r.energy),
                format_float(j / two_pi_hbar),
                format_float(r.j_residual / two_pi_hbar)
            );
            Ok(Outcome::data(csv))
        }
    }
}

fn time(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let potential = cfg.build_potential()?;
    let e = cfg.single_energy()?;
    let end = q_end(cfg, &potential, e);
    let qs = grid(cfg, cfg.q0, end)?;
    let points = match (&potential, cfg.p0) {
        // energy-scaled microstate on the well has a closed form
        (Potential::FiniteSquareWell(w), None) => qs
            .iter()
            .map(|&q| Ok(TrajectoryPoint { q, t_minus_tau: squarewell::time_parametrization(w, e, q)? }))
            .collect::<Result<Vec<_>, qhj::Error>>()?,
        _ => {
            // hold the triple resolved at E fixed across E ± ε
            let m = cfg.microstate()?.resolve(e, potential.constants())?;
            time_parametrize(&potential, e, &m, &qs, cfg.epsilon, &cfg.tolerances)?
        }
    };
    Ok(Outcome::data(trajectory_csv(&points)))
}

fn well(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.raw.contains_key("potential") && cfg.potential != PotentialKind::Well {
        return Err(CliError::Usage("the well command needs the square-well potential".into()));
    }
    let w = qhj::SquareWell::new(cfg.v0, cfg.a, cfg.constants)?;
    let e = cfg.single_energy()?;
    if cfg.p0.is_some() {
        return Err(CliError::Usage("the closed form is for p0 = (2mE)^{1/2}; drop --p0".into()));
    }
    let potential = Potential::FiniteSquareWell(w);
    let qs = grid(cfg, cfg.q0, q_end(cfg, &potential, e))?;
    let mut csv = String::from("q,W,p,pp\n");
    for &q in &qs {
        let s = squarewell::canonical_state(&w, e, q)?;
        let _ = writeln!(csv, "{},{},{},{}", format_float(q), format_float(s.w), format_float(s.p), format_float(s.pp));
    }
    Ok(Outcome::data(csv))
}

fn table(id: u8, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let report = tables::run_table(id, &cfg.tolerances)?;
    let mut out = Outcome::data(report.to_csv());
    if !report.overall_pass {
        let failed: Vec<&str> = report.failures().map(|r| r.label.as_str()).collect();
        out.tolerance_failure = Some(format!("table {id}: {} row(s) out of tolerance: {}", failed.len(), failed.join("; ")));
    }
    Ok(out)
}

/// CSV to a JSON array of row objects; numeric cells become numbers, NaN null.
pub fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<Value> = lines
        .map(|line| {
            let obj = header
                .iter()
                .zip(line.split(','))
                .map(|(h, cell)| {
                    let v = match cell.parse::<f64>() {
                        Ok(x) if x.is_finite() => json!(x),
                        Ok(_) => Value::Null,
                        Err(_) => match cell {
                            "true" => json!(true),
                            "false" => json!(false),
                            _ => json!(cell),
                        },
                    };
                    (h.to_string(), v)
                })
                .collect();
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

/// Path of the metadata sidecar for `out`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn sidecar(command: &str, cfg: &RunConfig, elapsed: f64) -> Value {
    json!({
        "command": command,
        "config": cfg.echo(),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "elapsed_seconds": elapsed,
    })
}

fn render(outcome: &Outcome, format: Format) -> String {
    match format {
        Format::Csv => outcome.csv.clone(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&csv_to_json(&outcome.csv)).expect("serializable");
            s.push('\n');
            s
        }
    }
}

/// Full command-line entry; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    let cfg = match resolve_config(&cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let outcome = match execute(&cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let body = render(&outcome, cfg.format);
    match &cfg.out {
        Some(path) => {
            let meta = sidecar(cli.command.name(), &cfg, start.elapsed().as_secs_f64());
            let meta = serde_json::to_string_pretty(&meta).expect("serializable") + "\n";
            if let Err(e) = std::fs::write(path, body).and_then(|_| std::fs::write(sidecar_path(path), meta)) {
                eprintln!("cannot write {}: {e}", path.display());
                return EXIT_USAGE;
            }
        }
        None => print!("{body}"),
    }
    if let Some(m) = &outcome.numerical_failure {
        eprintln!("numerical failure: {m}");
    }
    if let Some(m) = &outcome.tolerance_failure {
        eprintln!("tolerance failure: {m}");
    }
    outcome.exit_code()
}

#[cfg(test)]
mod tests {
    use super::*;
    use qhj::Microstate;

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(qhj::Error::PolicyViolation).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::from(qhj::Error::NonFiniteState { q: 1.0 }).exit_code(), EXIT_NUMERICAL);
        assert_eq!(CliError::from(qhj::Error::MaxIterations(3)).exit_code(), EXIT_NUMERICAL);
    }

    #[test]
    fn json_conversion() {
        let v = csv_to_json("E,J_over_2pi,residual,case\n5.0000000000000000e-1,NaN,NaN,C\n");
        assert_eq!(v[0]["E"], json!(0.5));
        assert_eq!(v[0]["J_over_2pi"], Value::Null);
        assert_eq!(v[0]["case"], json!("C"));
    }

    #[test]
    fn sidecar_keys() {
        let cfg = RunConfig::from_map(BTreeMap::new()).unwrap();
        let v = sidecar("solve", &cfg, 0.25);
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["command", "config", "elapsed_seconds", "tool_version"]);
        assert_eq!(sidecar_path(Path::new("a/b.csv")), PathBuf::from("a/b.csv.meta.json"));
    }

    #[test]
    fn exit_precedence() {
        let mut o = Outcome::data(String::new());
        assert_eq!(o.exit_code(), EXIT_OK);
        o.tolerance_failure = Some("x".into());
        assert_eq!(o.exit_code(), EXIT_TOLERANCE);
        o.numerical_failure = Some("y".into());
        assert_eq!(o.exit_code(), EXIT_NUMERICAL);
    }

    #[test]
    fn microstate_defaults_to_energy_scaled() {
        let cfg = RunConfig::from_map(BTreeMap::new()).unwrap();
        assert_eq!(cfg.microstate().unwrap(), Microstate::energy_scaled());
    }
}
