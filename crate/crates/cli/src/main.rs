//! Command-line driver for the elliptic Calogero-Sutherland solver.
//!
//! Subcommands cover the three workflow families: `solve` runs the spectral
//! recursion and reports the energy series with its coefficient table,
//! `jack` assembles the symmetric eigenfunction series on top of a solve,
//! and the `verify-*` / `oracle-compare` commands rerun the independent
//! checks (correlation identity, zeta identity, pointwise eigen-residuals,
//! lattice diagonalization) with seeded sampling.
//!
//! Configuration comes from flags, an optional flat `key=value` file named
//! by `--config`, and built-in defaults, in that order of precedence.  The
//! coupling flag doubles as an arithmetic-mode declaration: a fraction such
//! as `--lambda 3/2` enables exact rational coefficients, while a decimal
//! such as `--lambda 1.5` requests floating-point mode.  Machine-readable
//! output (JSON or CSV, chosen by `--format`) goes to `--out` or stdout and
//! embeds the resolved configuration and package version; a one-line human
//! summary goes to stderr.
//!
//! Exit codes: 0 success, 2 configuration error, 3 resonance obstruction,
//! 4 cutoff insufficient, 5 verification threshold not met, 1 other runtime
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;

use ecs_core::elliptic_core::{Lambda, ModelParameters};
use ecs_core::error::Error as CoreError;
use ecs_core::scalar::Scalar;
use ecs_core::spectrum_recursion::{solve_recursion, SolveOptions, SpectralSolution};
use ecs_core::verification::{
    check_remarkable_identity, check_zeta_identity, eigen_residual, galerkin_oracle, Method,
};
use ecs_core::wavefunction::{assemble_eigenfunction, EllipticJack, PTable};

/// Residual ceiling for the analytic identity check.
const IDENTITY_TOL_ANALYTIC: f64 = 1e-8;
/// Residual ceiling for the finite-difference identity check.
const IDENTITY_TOL_FD: f64 = 1e-6;
/// Absolute residual ceiling for the zeta addition identity.
const ZETA_TOL: f64 = 1e-10;
/// Pointwise eigen-residual ceiling at q = 0.
const SUTHERLAND_TOL: f64 = 1e-9;
/// Energy gap ceiling against the lattice oracle.
const ORACLE_GAP_TOL: f64 = 1e-6;
/// Slack subtracted from the ideal residual scaling exponent 2(L+1).
const SLOPE_SLACK: f64 = 0.5;

const EXIT_HELP: &str = "Exit codes:\n  \
    0  success\n  \
    2  configuration error\n  \
    3  resonance obstruction (a resonant site has a nonzero defect)\n  \
    4  cutoff insufficient (plane-wave or lattice escalation hit its cap)\n  \
    5  a verification threshold was not met\n  \
    1  any other runtime failure";

#[derive(Parser)]
#[command(name = "ecs", version, about = "Elliptic Calogero-Sutherland solver", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the spectral recursion: energy series plus coefficient table
    Solve(JobArgs),
    /// Assemble the symmetric eigenfunction series (elliptic Jack polynomial)
    Jack(JobArgs),
    /// Check the two-family correlation identity on random configurations
    VerifyIdentity(JobArgs),
    /// Check the zeta addition identity on random triples
    VerifyZeta(JobArgs),
    /// Check pointwise eigen-residuals of an assembled eigenfunction
    VerifyEigen(JobArgs),
    /// Compare a recursion energy against the lattice diagonalization oracle
    OracleCompare(JobArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Jack(_) => "jack",
            Command::VerifyIdentity(_) => "verify-identity",
            Command::VerifyZeta(_) => "verify-zeta",
            Command::VerifyEigen(_) => "verify-eigen",
            Command::OracleCompare(_) => "oracle-compare",
        }
    }

    fn args(&self) -> &JobArgs {
        match self {
            Command::Solve(a)
            | Command::Jack(a)
            | Command::VerifyIdentity(a)
            | Command::VerifyZeta(a)
            | Command::VerifyEigen(a)
            | Command::OracleCompare(a) => a,
        }
    }
}

/// The full flag set, shared by every subcommand; each command reads the
/// fields it needs.  All flags are optional here so that values can fall
/// through to the config file and then to the defaults.
#[derive(Args, Clone, Default)]
struct JobArgs {
    /// Number of particles
    #[arg(long = "N", value_name = "COUNT")]
    n_particles: Option<usize>,
    /// Coupling exponent: fraction p/s (exact mode) or decimal (float mode)
    #[arg(long, value_name = "VALUE")]
    lambda: Option<String>,
    /// Nome in [0, 1); verify-eigen accepts a comma-separated list
    #[arg(long, value_name = "VALUE", allow_hyphen_values = true)]
    q: Option<String>,
    /// Mode vector, comma-separated, e.g. 2,1,0
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    n: Option<String>,
    /// Series truncation order (number of correction levels)
    #[arg(long = "L", value_name = "ORDER")]
    order: Option<usize>,
    /// Coefficient window; default order + spread of the mode vector
    #[arg(long = "M", value_name = "WINDOW", allow_hyphen_values = true)]
    window: Option<i64>,
    /// Plane-wave cutoff (kernel extraction) or lattice cutoff (oracle)
    #[arg(long = "K", value_name = "CUTOFF")]
    cutoff: Option<usize>,
    /// Sample count for the verification commands
    #[arg(long, value_name = "COUNT")]
    samples: Option<usize>,
    /// RNG seed for the verification commands
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Derivative method for verify-identity: analytic | fd
    #[arg(long, value_name = "NAME")]
    method: Option<String>,
    /// Output file for the machine-readable report (default: stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format: json | csv
    #[arg(long, value_name = "NAME")]
    format: Option<String>,
    /// Flat key=value config file; flags take precedence over its entries
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn label(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// A categorized failure: the exit code plus a message for stderr.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

/// Maps library errors onto the documented exit categories.
fn map_core(error: CoreError) -> Failure {
    let code = match &error {
        CoreError::ResonanceObstruction { .. } => 3,
        CoreError::CutoffInsufficient(_) => 4,
        CoreError::InvalidParameter(_) | CoreError::ExactModeUnavailable(_) => 2,
        _ => 1,
    };
    fail(code, error.to_string())
}

/// Fully resolved job configuration (flags > config file > defaults).
#[derive(Debug)]
struct Job {
    command: &'static str,
    n_particles: usize,
    lambda: Option<(String, Lambda)>,
    q_list: Vec<f64>,
    n: Option<Vec<i64>>,
    order: usize,
    window: Option<i64>,
    cutoff: usize,
    samples: usize,
    seed: u64,
    method: Method,
    out: Option<PathBuf>,
    format: Format,
}

const CONFIG_KEYS: [&str; 12] = [
    "N", "lambda", "q", "n", "L", "M", "K", "samples", "seed", "method", "out", "format",
];

/// Parses a flat key=value config file.  Blank lines and lines starting
/// with '#' are ignored; unknown and duplicate keys are rejected.
fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut values = BTreeMap::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "config line {} is not a key=value entry: {line:?}",
                index + 1
            ));
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(format!("unknown config key {key:?}"));
        }
        if values
            .insert(key.to_string(), value.trim().to_string())
            .is_some()
        {
            return Err(format!("duplicate config key {key:?}"));
        }
    }
    Ok(values)
}

fn parse_integer<T: std::str::FromStr>(text: &str, flag: &str) -> Result<T, Failure> {
    text.trim()
        .parse()
        .map_err(|_| fail(2, format!("{flag}: expected an integer, got {text:?}")))
}

fn parse_mode_vector(text: &str, flag: &str) -> Result<Vec<i64>, Failure> {
    let entries: Result<Vec<i64>, Failure> = text
        .split(',')
        .map(|part| parse_integer::<i64>(part, flag))
        .collect();
    let entries = entries?;
    if entries.is_empty() {
        return Err(fail(2, format!("{flag} must list at least one integer")));
    }
    Ok(entries)
}

fn parse_nome_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    let mut list = Vec::new();
    for part in text.split(',') {
        let value: f64 = part
            .trim()
            .parse()
            .map_err(|_| fail(2, format!("{flag}: expected a number, got {part:?}")))?;
        if !value.is_finite() {
            return Err(fail(2, format!("{flag}: {part:?} is not finite")));
        }
        list.push(value);
    }
    Ok(list)
}

/// One resolved field: the flag value wins, then the config file, then the
/// default.  File values are parsed with messages that name the flag.
fn resolve<T>(
    flag: Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
    parse: impl FnOnce(&str) -> Result<T, Failure>,
) -> Result<Option<T>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        Some(text) => Ok(Some(parse(text)?)),
        None => Ok(None),
    }
}

impl Job {
    fn from_command(command: &Command) -> Result<Job, Failure> {
        let args = command.args().clone();
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| fail(2, format!("--config: cannot read {}: {e}", path.display())))?;
                parse_config_text(&text).map_err(|msg| fail(2, msg))?
            }
            None => BTreeMap::new(),
        };

        let n_particles = resolve(args.n_particles, &file, "N", |t| parse_integer(t, "--N"))?
            .unwrap_or(2);
        if n_particles == 0 {
            return Err(fail(2, "--N must be at least 1"));
        }

        let lambda_text = resolve(args.lambda, &file, "lambda", |t| Ok(t.to_string()))?;
        let lambda = match lambda_text {
            Some(text) => {
                let trimmed = text.trim().to_string();
                if trimmed.is_empty() {
                    return Err(fail(2, "--lambda must not be empty"));
                }
                let parsed = Lambda::parse(&trimmed)
                    .map_err(|e| fail(2, format!("--lambda: {e}")))?;
                Some((trimmed, parsed))
            }
            None => None,
        };

        let q_text =
            resolve(args.q, &file, "q", |t| Ok(t.to_string()))?.unwrap_or_else(|| "0".into());
        let q_list = parse_nome_list(&q_text, "--q")?;
        if q_list.len() != 1 && command.name() != "verify-eigen" {
            return Err(fail(2, "--q accepts a single value for this command"));
        }

        let n = resolve(args.n, &file, "n", |t| Ok(t.to_string()))?
            .map(|text| parse_mode_vector(&text, "--n"))
            .transpose()?;
        if let Some(modes) = &n {
            if modes.len() != n_particles {
                return Err(fail(
                    2,
                    format!(
                        "--n has {} entries but --N is {n_particles}",
                        modes.len()
                    ),
                ));
            }
        }

        let order = resolve(args.order, &file, "L", |t| parse_integer(t, "--L"))?.unwrap_or(3);
        let window = resolve(args.window, &file, "M", |t| parse_integer(t, "--M"))?;
        let cutoff = resolve(args.cutoff, &file, "K", |t| parse_integer(t, "--K"))?.unwrap_or(8);
        if cutoff == 0 {
            return Err(fail(2, "--K must be at least 1"));
        }
        let samples =
            resolve(args.samples, &file, "samples", |t| parse_integer(t, "--samples"))?
                .unwrap_or(50);
        if samples == 0 {
            return Err(fail(2, "--samples must be at least 1"));
        }
        let seed =
            resolve(args.seed, &file, "seed", |t| parse_integer(t, "--seed"))?.unwrap_or(7);
        let method = resolve(args.method, &file, "method", |t| Ok(t.to_string()))?
            .map(|text| Method::parse(text.trim()).map_err(|e| fail(2, format!("--method: {e}"))))
            .transpose()?
            .unwrap_or(Method::Analytic);
        let out = resolve(args.out, &file, "out", |t| Ok(PathBuf::from(t)))?;
        let format = resolve(args.format, &file, "format", |t| Ok(t.to_string()))?
            .map(|text| match text.trim() {
                "json" => Ok(Format::Json),
                "csv" => Ok(Format::Csv),
                other => Err(fail(
                    2,
                    format!("--format: expected json or csv, got {other:?}"),
                )),
            })
            .transpose()?
            .unwrap_or(Format::Json);

        Ok(Job {
            command: command.name(),
            n_particles,
            lambda,
            q_list,
            n,
            order,
            window,
            cutoff,
            samples,
            seed,
            method,
            out,
            format,
        })
    }

    fn require_lambda(&self) -> Result<(&str, &Lambda), Failure> {
        self.lambda
            .as_ref()
            .map(|(text, value)| (text.as_str(), value))
            .ok_or_else(|| fail(2, "missing required flag --lambda"))
    }

    fn require_n(&self) -> Result<&[i64], Failure> {
        self.n
            .as_deref()
            .ok_or_else(|| fail(2, "missing required flag --n"))
    }

    fn single_q(&self) -> f64 {
        self.q_list[0]
    }

    fn solve_options<S: Scalar>(&self) -> SolveOptions<S> {
        let mut options = SolveOptions::new(self.order);
        if let Some(window) = self.window {
            options = options.with_window(window);
        }
        options
    }

    /// JSON echo of the resolved configuration; `resolved_window` replaces
    /// the window field once a solve has fixed the default.
    fn config_json(&self, resolved_window: Option<i64>) -> String {
        let lambda = match &self.lambda {
            Some((text, value)) => format!(
                "{},\"coupling\":\"{}\"",
                json_string(text),
                if value.is_rational() { "rational" } else { "irrational" }
            ),
            None => "null,\"coupling\":null".into(),
        };
        let q = self
            .q_list
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let n = match &self.n {
            Some(modes) => format!(
                "[{}]",
                modes
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            None => "null".into(),
        };
        let window = match resolved_window.or(self.window) {
            Some(m) => m.to_string(),
            None => "null".into(),
        };
        let out = match &self.out {
            Some(path) => json_string(&path.display().to_string()),
            None => "null".into(),
        };
        format!(
            "{{\"N\":{},\"lambda\":{lambda},\"q\":[{q}],\"n\":{n},\"L\":{},\"M\":{window},\"K\":{},\"samples\":{},\"seed\":{},\"method\":\"{}\",\"format\":\"{}\",\"out\":{out}}}",
            self.n_particles,
            self.order,
            self.cutoff,
            self.samples,
            self.seed,
            self.method.label(),
            self.format.label(),
        )
    }
}

/// Minimal JSON string escaping for echoed configuration values.
fn json_string(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Everything a finished command hands back for emission.
struct CommandOutput {
    machine: String,
    summary: String,
    /// A verification threshold that was not met (exit 5 after emission).
    breach: Option<String>,
}

fn envelope(job: &Job, resolved_window: Option<i64>, result_json: &str) -> String {
    format!(
        "{{\"command\":\"{}\",\"version\":\"{}\",\"config\":{},\"result\":{}}}\n",
        job.command,
        env!("CARGO_PKG_VERSION"),
        job.config_json(resolved_window),
        result_json
    )
}

/// CSV reports carry the same provenance as a leading comment line.
fn csv_with_provenance(job: &Job, resolved_window: Option<i64>, body: String) -> String {
    format!(
        "# command={} version={} config={}\n{}",
        job.command,
        env!("CARGO_PKG_VERSION"),
        job.config_json(resolved_window),
        body
    )
}

fn machine_output(
    job: &Job,
    resolved_window: Option<i64>,
    result_json: String,
    csv_body: String,
) -> String {
    match job.format {
        Format::Json => envelope(job, resolved_window, &result_json),
        Format::Csv => csv_with_provenance(job, resolved_window, csv_body),
    }
}

fn residual_csv(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn run_solve(job: &Job) -> Result<CommandOutput, Failure> {
    let (_, lambda) = job.require_lambda()?;
    if lambda.is_rational() {
        solve_output::<BigRational>(job)
    } else {
        solve_output::<f64>(job)
    }
}

fn solve_output<S: Scalar>(job: &Job) -> Result<CommandOutput, Failure> {
    let (sol, params) = solve_job::<S>(job)?;
    let machine = machine_output(job, Some(sol.window), sol.to_json(), sol.alpha_csv());
    let summary = format!(
        "solve: energy {:.12} at q={}; order {}, window {}, coefficient sites: {}, resonances resolved: {}, clipped reads: {}",
        sol.energy_at_nome(),
        params.nome(),
        sol.order,
        sol.window,
        sol.alpha.len(),
        sol.resonances.len(),
        sol.clipped_reads,
    );
    Ok(CommandOutput {
        machine,
        summary,
        breach: None,
    })
}

fn solve_job<S: Scalar>(job: &Job) -> Result<(SpectralSolution<S>, ModelParameters), Failure> {
    let (_, lambda) = job.require_lambda()?;
    let n = job.require_n()?;
    let params = ModelParameters::new(job.n_particles, lambda.clone(), job.single_q())
        .map_err(map_core)?;
    let sol = solve_recursion::<S>(&params, n, &job.solve_options()).map_err(map_core)?;
    Ok((sol, params))
}

fn run_jack(job: &Job) -> Result<CommandOutput, Failure> {
    let (_, lambda) = job.require_lambda()?;
    if lambda.is_rational() {
        jack_output::<BigRational>(job)
    } else {
        jack_output::<f64>(job)
    }
}

fn jack_output<S: Scalar>(job: &Job) -> Result<CommandOutput, Failure> {
    let (jack, window, params) = jack_job::<S>(job)?;
    let csv = jack_csv(&jack);
    let machine = machine_output(job, Some(window), jack.to_json(), csv);
    let summary = format!(
        "jack: energy {:.12} at q={}; order {}, {} plane-wave modes, center-of-mass exponent {}",
        jack.energy.eval(params.nome()),
        params.nome(),
        jack.order,
        jack.poly.terms().count(),
        jack.com_exponent,
    );
    Ok(CommandOutput {
        machine,
        summary,
        breach: None,
    })
}

fn jack_job<S: Scalar>(job: &Job) -> Result<(EllipticJack<S>, i64, ModelParameters), Failure> {
    let (sol, params) = solve_job::<S>(job)?;
    let table = PTable::new(&params, job.order, job.cutoff);
    let window = sol.window;
    let jack = assemble_eigenfunction(&sol, &table).map_err(map_core)?;
    Ok((jack, window, params))
}

/// CSV rows of the assembled polynomial: mode entries, series level, value.
fn jack_csv<S: Scalar>(jack: &EllipticJack<S>) -> String {
    let mut out = String::new();
    for j in 0..jack.params.n_particles() {
        out.push_str(&format!("n_{},", j + 1));
    }
    out.push_str("level,value\n");
    for (mode, series) in jack.poly.terms() {
        for (level, value) in series.coeffs().iter().enumerate() {
            if value.is_zero() {
                continue;
            }
            for entry in mode {
                out.push_str(&format!("{entry},"));
            }
            out.push_str(&format!("{level},{}\n", value.render()));
        }
    }
    out
}

fn run_verify_identity(job: &Job) -> Result<CommandOutput, Failure> {
    let (_, lambda) = job.require_lambda()?;
    let params = ModelParameters::new(job.n_particles, lambda.clone(), job.single_q())
        .map_err(map_core)?;
    let report = check_remarkable_identity(&params, job.samples, job.seed, job.method)
        .map_err(map_core)?;
    let tolerance = match job.method {
        Method::Analytic => IDENTITY_TOL_ANALYTIC,
        Method::FiniteDifference => IDENTITY_TOL_FD,
    };
    let pass = report.max_rel_residual < tolerance;
    let csv = residual_csv(
        "sample,relative_residual",
        report
            .residuals
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{i},{r:e}")),
    );
    let machine = machine_output(job, None, report.to_json(), csv);
    let summary = format!(
        "verify-identity ({}): max relative residual {:.3e} over {} samples, tolerance {:.0e}: {}",
        job.method.label(),
        report.max_rel_residual,
        report.sample_count(),
        tolerance,
        verdict(pass),
    );
    Ok(CommandOutput {
        machine,
        summary,
        breach: breach_if(!pass, "identity residual above tolerance"),
    })
}

fn run_verify_zeta(job: &Job) -> Result<CommandOutput, Failure> {
    let report =
        check_zeta_identity(job.single_q(), job.samples, job.seed).map_err(map_core)?;
    let pass = report.max_abs_residual < ZETA_TOL;
    let csv = residual_csv(
        "sample,absolute_residual",
        report
            .residuals
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{i},{r:e}")),
    );
    let machine = machine_output(job, None, report.to_json(), csv);
    let summary = format!(
        "verify-zeta: max absolute residual {:.3e} over {} samples, tolerance {:.0e}: {}",
        report.max_abs_residual,
        report.sample_count(),
        ZETA_TOL,
        verdict(pass),
    );
    Ok(CommandOutput {
        machine,
        summary,
        breach: breach_if(!pass, "zeta identity residual above tolerance"),
    })
}

fn run_verify_eigen(job: &Job) -> Result<CommandOutput, Failure> {
    let (_, lambda) = job.require_lambda()?;
    let report = if lambda.is_rational() {
        let (jack, _, _) = jack_job::<BigRational>(job)?;
        eigen_residual(&jack, &job.q_list, job.samples, job.seed).map_err(map_core)?
    } else {
        let (jack, _, _) = jack_job::<f64>(job)?;
        eigen_residual(&jack, &job.q_list, job.samples, job.seed).map_err(map_core)?
    };

    let mut pieces = Vec::new();
    let mut breach = None;
    for row in &report.per_q {
        pieces.push(format!("q={}: {:.3e}", row.q, row.max_residual));
        if row.q == 0.0 && row.max_residual >= SUTHERLAND_TOL {
            breach = Some(format!(
                "residual {:.3e} at q=0 exceeds {SUTHERLAND_TOL:.0e}",
                row.max_residual
            ));
        }
    }
    let slope_floor = 2.0 * (job.order as f64 + 1.0) - SLOPE_SLACK;
    match report.scaling_exponent {
        Some(slope) => {
            pieces.push(format!(
                "scaling exponent {slope:.2} (floor {slope_floor:.1})"
            ));
            if slope < slope_floor {
                breach = Some(format!(
                    "scaling exponent {slope:.2} below {slope_floor:.1}"
                ));
            }
        }
        None => pieces.push("scaling exponent: not enough positive nomes".into()),
    }

    let csv = residual_csv(
        "q,max_residual",
        report
            .per_q
            .iter()
            .map(|row| format!("{},{:e}", row.q, row.max_residual)),
    );
    let machine = machine_output(job, None, report.to_json(), csv);
    let summary = format!(
        "verify-eigen: {}: {}",
        pieces.join("; "),
        verdict(breach.is_none()),
    );
    Ok(CommandOutput {
        machine,
        summary,
        breach,
    })
}

fn run_oracle_compare(job: &Job) -> Result<CommandOutput, Failure> {
    let (_, lambda) = job.require_lambda()?;
    let (energy, params) = if lambda.is_rational() {
        let (sol, params) = solve_job::<BigRational>(job)?;
        (sol.energy_at_nome(), params)
    } else {
        let (sol, params) = solve_job::<f64>(job)?;
        (sol.energy_at_nome(), params)
    };
    let report = galerkin_oracle(&params, job.require_n()?, job.cutoff).map_err(map_core)?;
    let nearest = report.nearest(energy);
    let gap = (energy - nearest).abs();
    let pass = gap < ORACLE_GAP_TOL;

    let result_json = format!(
        "{{\"recursion_energy\":{energy},\"nearest_eigenvalue\":{nearest},\"gap\":{gap:e},\"oracle\":{}}}",
        report.to_json()
    );
    let csv = residual_csv(
        "index,eigenvalue",
        report
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, e)| format!("{i},{e}")),
    );
    let machine = machine_output(job, None, result_json, csv);
    let summary = format!(
        "oracle-compare: recursion {energy:.12} vs lattice {nearest:.12}, gap {gap:.3e} (tolerance {ORACLE_GAP_TOL:.0e}), drift {:.3e}, hermiticity defect {:.3e}: {}",
        report.drift,
        report.hermiticity_defect,
        verdict(pass),
    );
    Ok(CommandOutput {
        machine,
        summary,
        breach: breach_if(!pass, "energy gap above tolerance"),
    })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn breach_if(condition: bool, message: &str) -> Option<String> {
    condition.then(|| message.to_string())
}

fn run(command: Command) -> Result<(), Failure> {
    let job = Job::from_command(&command)?;
    let output = match job.command {
        "solve" => run_solve(&job),
        "jack" => run_jack(&job),
        "verify-identity" => run_verify_identity(&job),
        "verify-zeta" => run_verify_zeta(&job),
        "verify-eigen" => run_verify_eigen(&job),
        "oracle-compare" => run_oracle_compare(&job),
        _ => unreachable!("command names are exhaustive"),
    }?;

    match &job.out {
        Some(path) => fs::write(path, &output.machine)
            .map_err(|e| fail(1, format!("cannot write {}: {e}", path.display())))?,
        None => print!("{}", output.machine),
    }
    eprintln!("{}", output.summary);
    match output.breach {
        Some(message) => Err(fail(5, message)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
