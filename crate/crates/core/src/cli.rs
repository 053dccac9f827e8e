//! `floquet-delta` command line: resfind, sweep, omegascan, psieval, tdse, selftest.
//!
//! Exit codes: 0 ok, 1 invalid flags or config, 2 no zero found,
//! 3 numerical failure (diagnostic JSON on stdout).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::branchcut::{ModelParams, PotentialKind, SheetConfig};
use crate::error::FloquetError;
use crate::forcing::InitialWavefunction;
use crate::resonances::{
    default_sheet_set, find_resonances, refine_zero, residue_recurrence_residual, sweep, with_residues, FindOptions,
    Resonance, SweepOptions, SweepRecord,
};
use crate::selftest::{self, Level};
use crate::tdseoracle::{evolve, survival_decay, Boundary, GridState, RecordOptions};
use crate::timedomain::{PsiEvaluator, TimeDomainOptions};
use crate::Complex64;

pub const SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "floquet-delta", version, about = "Resonances of the periodically driven delta potential")]
struct Cli {
    /// key=value file ([section] headers allowed) or a JSON config echo; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count, refine and attach residues to the zeros of W in the default region.
    Resfind(ResfindArgs),
    /// Zeros across a grid of r values and a set of sheets (CSV).
    Sweep(SweepArgs),
    /// Zeros across a grid of omega values at fixed r (CSV).
    Omegascan(OmegascanArgs),
    /// psi(x, t) and its Gamow / cut / source pieces on a grid (CSV).
    Psieval(PsievalArgs),
    /// Crank–Nicolson run: psi on the grid and survival probability (CSV).
    Tdse(TdseArgs),
    /// Built-in numerical checks; exit 0 iff all pass.
    Selftest(SelftestArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Resfind(_) => "resfind",
            Command::Sweep(_) => "sweep",
            Command::Omegascan(_) => "omegascan",
            Command::Psieval(_) => "psieval",
            Command::Tdse(_) => "tdse",
            Command::Selftest(_) => "selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Potential {
    Well,
    Barrier,
}

impl From<Potential> for PotentialKind {
    fn from(p: Potential) -> Self {
        match p {
            Potential::Well => PotentialKind::Well,
            Potential::Barrier => PotentialKind::Barrier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BoundaryKind {
    Absorbing,
    Reflecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Debug, Clone, Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct Model {
    #[arg(long, default_value_t = 2.0)]
    omega: f64,
    /// Drive amplitude (r >= 0).
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long, value_enum, default_value = "well")]
    potential: Potential,
}

impl Model {
    fn params(&self) -> Result<ModelParams, CliError> {
        let r = self.r.ok_or_else(|| CliError::Invalid("--r is required".into()))?;
        Ok(ModelParams::new(self.omega, r, self.potential.into())?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct Psi0Args {
    /// bump[:M] | exp:rate:M | boundstate[:M] | poly:c0,c1,..:M | cubic:FILE | zero:M,
    /// or poly_bump | truncated_exponential | piecewise_cubic with the psi0-* keys.
    #[arg(long, default_value = "bump:1")]
    psi0: String,
    /// Support M for the named profiles.
    #[arg(long)]
    psi0_support: Option<f64>,
    /// Rate for truncated_exponential.
    #[arg(long)]
    psi0_rate: Option<f64>,
    /// Knot CSV (x, re, im) for piecewise_cubic.
    #[arg(long)]
    psi0_knots: Option<PathBuf>,
}

impl Psi0Args {
    fn build(&self) -> Result<InitialWavefunction, CliError> {
        let named = matches!(self.psi0.trim(), "poly_bump" | "truncated_exponential" | "piecewise_cubic");
        let extras = self.psi0_support.is_some() || self.psi0_rate.is_some() || self.psi0_knots.is_some();
        if !named {
            if extras {
                return Err(invalid("--psi0-support/-rate/-knots go with a named profile (poly_bump, truncated_exponential, piecewise_cubic)"));
            }
            return Ok(parse_psi0(&self.psi0)?);
        }
        Ok(match self.psi0.trim() {
            "poly_bump" => InitialWavefunction::poly_bump(self.psi0_support.unwrap_or(1.0))?,
            "truncated_exponential" => {
                InitialWavefunction::truncated_exponential(self.psi0_rate.unwrap_or(1.0), self.psi0_support.unwrap_or(12.0))?
            }
            _ => {
                let path = self.psi0_knots.as_ref().ok_or_else(|| invalid("piecewise_cubic needs --psi0-knots"))?;
                InitialWavefunction::piecewise_cubic_from_csv(path)?
            }
        })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct ResfindArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: Model,
    /// usual | second | flip:n[,m...] | theta=a, joined with ';'.
    #[arg(long, default_value = "usual")]
    sheet: String,
    /// Refine from this point instead of searching: "re,im".
    #[arg(long, allow_hyphen_values = true)]
    guess: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    psi0: Psi0Args,
    /// Modes kept in the residue vector (|n| <= n-modes).
    #[arg(long, default_value_t = 32)]
    n_modes: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct SweepArgs {
    #[arg(long, default_value_t = 2.0)]
    omega: f64,
    #[arg(long, value_enum, default_value = "well")]
    potential: Potential,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    r_start: f64,
    #[arg(long, default_value_t = 1.5, allow_hyphen_values = true)]
    r_end: f64,
    /// Number of intervals; the grid has r-steps + 1 points.
    #[arg(long, default_value_t = 60)]
    r_steps: usize,
    /// Sheets separated by '|', or "default" for usual plus single flips at -2..=2.
    #[arg(long, default_value = "default")]
    sheets: String,
    /// Seed each point with the previous zeros.
    #[arg(long)]
    track: bool,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct OmegascanArgs {
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long, value_enum, default_value = "well")]
    potential: Potential,
    #[arg(long, default_value = "usual")]
    sheet: String,
    #[arg(long, default_value_t = 0.55)]
    omega_start: f64,
    #[arg(long, default_value_t = 2.0)]
    omega_end: f64,
    #[arg(long, default_value_t = 30)]
    points: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct PsievalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: Model,
    #[command(flatten)]
    #[serde(flatten)]
    psi0: Psi0Args,
    /// Single value, comma list, or inclusive range a:b:step.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    x: String,
    /// Same syntax as --x; times must be positive.
    #[arg(long)]
    t: Option<String>,
    /// Tilt of the integration rays.
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    /// Modes kept in the cut integrals.
    #[arg(long, default_value_t = 32)]
    n_cut: usize,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct TdseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: Model,
    #[command(flatten)]
    #[serde(flatten)]
    psi0: Psi0Args,
    #[arg(long)]
    t_end: Option<f64>,
    /// Box half-width.
    #[arg(long, default_value_t = 40.0)]
    l: f64,
    #[arg(long, default_value_t = 0.02)]
    dx: f64,
    #[arg(long, default_value_t = 2e-4)]
    dt: f64,
    #[arg(long, value_enum, default_value = "absorbing")]
    boundary: BoundaryKind,
    /// Time between recorded rows.
    #[arg(long, default_value_t = 0.1)]
    record_every: f64,
    /// Emit every k-th node instead of only x = 0.
    #[arg(long)]
    x_stride: Option<usize>,
    /// Half-width of the survival interval.
    #[arg(long, default_value_t = 5.0)]
    window: f64,
    /// Fit window a:b (default T/8 : 3T/4).
    #[arg(long)]
    fit: Option<String>,
    /// Also write the survival CSV here.
    #[arg(long)]
    survival: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "kebab-case")]
struct SelftestArgs {
    #[arg(long, value_enum, default_value = "fast")]
    level: LevelArg,
    #[command(flatten)]
    #[serde(skip)]
    output: Output,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] FloquetError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Solver(e) => match e {
                FloquetError::InvalidParameter(_) | FloquetError::VerticalCut(_) | FloquetError::Io(_) => EXIT_INVALID,
                FloquetError::NotFound(_) => EXIT_NOT_FOUND,
                _ => EXIT_NUMERICAL,
            },
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => EXIT_NUMERICAL,
        }
    }

    fn kind(&self) -> String {
        match self {
            CliError::Solver(e) => {
                let dbg = format!("{e:?}");
                dbg.split(['(', ' ', '{']).next().unwrap_or("Solver").to_string()
            }
            CliError::Invalid(_) => "Invalid".into(),
            CliError::Io(_) => "Io".into(),
            CliError::Csv(_) => "Csv".into(),
            CliError::Json(_) => "Json".into(),
        }
    }
}

/// Run with full argv (program name first); returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("floquet-delta: {e}");
            return EXIT_INVALID;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("floquet-delta: {e}");
        return EXIT_INVALID;
    }
    let name = cli.command.name();
    let echo = echo_of(&cli.command);
    let outcome = match &cli.command {
        Command::Resfind(a) => cmd_resfind(a, &echo),
        Command::Sweep(a) => cmd_sweep(a, &echo),
        Command::Omegascan(a) => cmd_omegascan(a, &echo),
        Command::Psieval(a) => cmd_psieval(a, &echo),
        Command::Tdse(a) => cmd_tdse(a, &echo),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            if code == EXIT_INVALID {
                eprintln!("floquet-delta {name}: {e}");
            } else {
                let diag = json!({
                    "schema": SCHEMA,
                    "command": name,
                    "status": "error",
                    "error": { "kind": e.kind(), "message": e.to_string() },
                    "config": echo,
                });
                println!("{}", serde_json::to_string_pretty(&diag).unwrap_or_default());
                eprintln!("floquet-delta {name}: {e}");
            }
            code
        }
    }
}

fn configure_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("FLOQUET_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| format!("FLOQUET_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            return Err("FLOQUET_THREADS must be positive".into());
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn echo_of(cmd: &Command) -> Value {
    let v = match cmd {
        Command::Resfind(a) => serde_json::to_value(a),
        Command::Sweep(a) => serde_json::to_value(a),
        Command::Omegascan(a) => serde_json::to_value(a),
        Command::Psieval(a) => serde_json::to_value(a),
        Command::Tdse(a) => serde_json::to_value(a),
        Command::Selftest(a) => serde_json::to_value(a),
    };
    v.unwrap_or(Value::Null)
}

fn header(command: &str, echo: &Value) -> Value {
    json!({ "schema": SCHEMA, "command": command, "config": echo })
}

// ---------------------------------------------------------------- config

/// Config entries: section ("" for global) -> key -> value.
type ConfigMap = BTreeMap<String, BTreeMap<String, String>>;

fn norm_key(k: &str) -> String {
    k.trim().replace('_', "-").to_ascii_lowercase()
}

fn parse_ini(text: &str) -> Result<ConfigMap, String> {
    let mut out = ConfigMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_ascii_lowercase();
            if section == "common" || section == "global" {
                section.clear();
            }
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
        let v = v.trim().trim_matches('"').to_string();
        out.entry(section.clone()).or_default().insert(norm_key(k), v);
    }
    Ok(out)
}

fn json_scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// A JSON object, or the `# {...}` header line of an earlier output.
fn parse_json_config(text: &str) -> Result<ConfigMap, String> {
    let body = match text.trim_start().strip_prefix('#') {
        Some(rest) => rest.lines().next().unwrap_or(""),
        None => text,
    };
    let v: Value = serde_json::from_str(body.trim()).map_err(|e| format!("config JSON: {e}"))?;
    let obj = v.as_object().ok_or("config JSON must be an object")?;
    let (section, fields) = match obj.get("config") {
        Some(Value::Object(c)) => (obj.get("command").and_then(Value::as_str).unwrap_or("").to_string(), c.clone()),
        _ => (String::new(), obj.clone()),
    };
    let mut out = ConfigMap::new();
    for (k, v) in fields {
        if matches!(k.as_str(), "schema" | "command") {
            continue;
        }
        if let Some(s) = json_scalar(&v) {
            out.entry(section.clone()).or_default().insert(norm_key(&k), s);
        } else if !v.is_null() {
            return Err(format!("config key {k}: expected a scalar"));
        }
    }
    Ok(out)
}

fn load_config(path: &Path) -> Result<ConfigMap, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let t = text.trim_start();
    if t.starts_with('{') || t.starts_with("# {") || t.starts_with("#{") {
        parse_json_config(&text)
    } else {
        parse_ini(&text)
    }
}

/// Append config entries the command line does not already set.
fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let strs: Vec<String> = argv
        .iter()
        .map(|a| a.to_str().map(str::to_string).ok_or_else(|| format!("argument {a:?} is not UTF-8")))
        .collect::<Result<_, _>>()?;
    let mut path = None;
    let mut sub = None;
    let mut i = 1;
    while i < strs.len() {
        let a = &strs[i];
        if a == "--config" {
            path = strs.get(i + 1).cloned();
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some(a.clone());
        }
        i += 1;
    }
    let (Some(path), Some(sub)) = (path, sub) else {
        return Ok(argv);
    };
    let cfg = load_config(Path::new(&path))?;
    let root = Cli::command();
    let Some(cmd) = root.find_subcommand(&sub) else {
        return Ok(argv); // clap reports the unknown subcommand
    };
    let known: BTreeMap<String, bool> = cmd
        .get_arguments()
        .filter_map(|a| a.get_long().map(|l| (l.to_string(), a.get_action().takes_values())))
        .collect();
    let given: Vec<String> = strs
        .iter()
        .filter_map(|a| a.strip_prefix("--").map(|k| norm_key(k.split('=').next().unwrap_or(""))))
        .collect();
    let mut merged: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in cfg.get("").into_iter().flatten() {
        if known.contains_key(k) {
            merged.insert(k.clone(), v.clone());
        } else if !root.get_subcommands().any(|c| c.get_arguments().any(|a| a.get_long() == Some(k.as_str()))) {
            return Err(format!("unknown config key {k:?}"));
        }
    }
    for (section, entries) in &cfg {
        if section.is_empty() {
            continue;
        }
        if root.find_subcommand(section).is_none() {
            return Err(format!("unknown config section [{section}]"));
        }
        if section == &sub {
            merged.extend(entries.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
    }
    let mut out = argv;
    for (k, v) in merged {
        if k == "config" || given.contains(&k) {
            continue;
        }
        match known.get(&k) {
            Some(true) => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
            Some(false) => match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => out.push(format!("--{k}").into()),
                "false" | "0" | "no" => {}
                _ => return Err(format!("config key {k}: expected true or false, got {v:?}")),
            },
            None => return Err(format!("config key {k:?} does not apply to {sub}")),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- parsing helpers

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

fn parse_f64(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| invalid(format!("bad {what}: {s:?}")))
}

/// `v`, `a,b,c` or inclusive `a:b:step`.
fn parse_grid(spec: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.len() {
        1 => spec.split(',').map(|s| parse_f64(s, what)).collect(),
        3 => {
            let (a, b, h) = (parse_f64(parts[0], what)?, parse_f64(parts[1], what)?, parse_f64(parts[2], what)?);
            if h <= 0.0 || b < a {
                return Err(invalid(format!("bad {what} range {spec:?}: need a <= b and step > 0")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            if n > 10_000_000 {
                return Err(invalid(format!("{what} range {spec:?} is too long")));
            }
            Ok((0..=n).map(|k| a + k as f64 * h).collect())
        }
        _ => Err(invalid(format!("bad {what} spec {spec:?}"))),
    }
}

fn linspace(a: f64, b: f64, intervals: usize) -> Vec<f64> {
    if intervals == 0 {
        return vec![a];
    }
    (0..=intervals).map(|k| a + (b - a) * k as f64 / intervals as f64).collect()
}

/// Initial wave function from its CLI spec.
pub fn parse_psi0(spec: &str) -> Result<InitialWavefunction, FloquetError> {
    let bad = || FloquetError::InvalidParameter(format!("bad psi0 spec {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.trim().split(':').collect();
    match parts.as_slice() {
        ["bump"] => InitialWavefunction::poly_bump(1.0),
        ["bump", m] => InitialWavefunction::poly_bump(num(m)?),
        ["boundstate"] => InitialWavefunction::truncated_exponential(1.0, 12.0),
        ["boundstate", m] => InitialWavefunction::truncated_exponential(1.0, num(m)?),
        ["exp", rate, m] => InitialWavefunction::truncated_exponential(num(rate)?, num(m)?),
        ["zero", m] => InitialWavefunction::zero(num(m)?),
        ["poly", cs, m] => {
            let coeffs = cs.split(',').map(|c| num(c).map(|v| Complex64::new(v, 0.0))).collect::<Result<Vec<_>, _>>()?;
            InitialWavefunction::polynomial(coeffs, num(m)?)
        }
        ["cubic", ..] => InitialWavefunction::piecewise_cubic_from_csv(Path::new(&spec.trim()["cubic:".len()..])),
        _ => Err(bad()),
    }
}

fn parse_sheet(spec: &str) -> Result<SheetConfig, CliError> {
    SheetConfig::parse(spec).map_err(CliError::from)
}

// ---------------------------------------------------------------- output

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// `# {header}` line, column names, then rows; or one JSON document.
fn write_table<R: Serialize>(
    output: &Output,
    path: &Option<PathBuf>,
    head: &Value,
    columns: &[&str],
    rows: &[R],
) -> Result<(), CliError> {
    let mut w = open_out(path)?;
    match output.format {
        Format::Csv => {
            writeln!(w, "# {}", serde_json::to_string(head)?)?;
            let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            csv.write_record(columns)?;
            for r in rows {
                csv.serialize(r)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            let mut doc = head.clone();
            doc["rows"] = serde_json::to_value(rows)?;
            writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_json(path: &Option<PathBuf>, doc: &Value) -> Result<(), CliError> {
    let mut w = open_out(path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(doc)?)?;
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- resfind

#[derive(Serialize)]
struct ResonanceOut<'a> {
    #[serde(flatten)]
    res: &'a Resonance,
    sheet_id: String,
    lambda_paper: Complex64,
    recurrence_residual: Option<f64>,
}

fn cmd_resfind(a: &ResfindArgs, echo: &Value) -> Result<i32, CliError> {
    let params = a.model.params()?;
    let cfg = parse_sheet(&a.sheet)?;
    let psi0 = a.psi0.build()?;
    let (found, count, consistent) = match &a.guess {
        Some(g) => {
            let (re, im) = g.split_once(',').ok_or_else(|| invalid(format!("bad --guess {g:?}: expected re,im")))?;
            let guess = Complex64::new(parse_f64(re, "guess")?, parse_f64(im, "guess")?);
            match refine_zero(guess, &params, &cfg) {
                Ok(res) => (vec![res], 1, true),
                Err(e @ (FloquetError::Divergence(_) | FloquetError::NoConvergence(_) | FloquetError::SingularPoint(_))) => {
                    return Err(FloquetError::NotFound(format!("refinement from {guess} failed: {e}")).into())
                }
                Err(e) => return Err(e.into()),
            }
        }
        None => {
            let s = find_resonances(&params, &cfg, &FindOptions::default())?;
            (s.resonances, s.count, s.consistent)
        }
    };
    let mut head = header("resfind", echo);
    head["count"] = json!(count);
    head["consistent"] = json!(consistent);
    if found.is_empty() && count == 0 {
        head["status"] = json!("none");
        head["resonances"] = json!([]);
        write_json(&a.output.out, &head)?;
        return Ok(EXIT_NOT_FOUND);
    }
    if !consistent {
        return Err(FloquetError::NotFound(format!("argument count {count} but {} zeros refined", found.len())).into());
    }
    let with: Vec<Resonance> = found
        .into_iter()
        .map(|r| with_residues(r, &params, &psi0, a.n_modes))
        .collect::<Result<_, _>>()?;
    let out: Vec<ResonanceOut> = with
        .iter()
        .map(|r| ResonanceOut {
            res: r,
            sheet_id: r.sheet.id(),
            lambda_paper: r.decay_exponent(),
            recurrence_residual: residue_recurrence_residual(r, &params),
        })
        .collect();
    head["status"] = json!("ok");
    head["resonances"] = serde_json::to_value(&out)?;
    write_json(&a.output.out, &head)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- sweep

#[derive(Serialize)]
struct SweepRow {
    omega: f64,
    r: f64,
    sheet_id: String,
    re_z: Option<f64>,
    im_z: Option<f64>,
    gamma: Option<f64>,
    visible: Option<bool>,
    newton_residual: Option<f64>,
    count: i64,
    status: String,
}

const SWEEP_COLUMNS: [&str; 10] =
    ["omega", "r", "sheet_id", "re_z", "im_z", "gamma", "visible", "newton_residual", "count", "status"];

fn record_status(rec: &SweepRecord) -> String {
    let mut s = match &rec.error {
        Some(e) => format!("error: {e}"),
        None if !rec.consistent => "inconsistent".into(),
        None if rec.resonances.is_empty() => "none".into(),
        None => "ok".into(),
    };
    for ev in &rec.events {
        s.push_str("; ");
        s.push_str(ev);
    }
    s
}

fn sweep_rows(records: &[SweepRecord]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for rec in records {
        let status = record_status(rec);
        if rec.resonances.is_empty() {
            rows.push(SweepRow {
                omega: rec.omega,
                r: rec.r,
                sheet_id: rec.sheet_id.clone(),
                re_z: None,
                im_z: None,
                gamma: None,
                visible: None,
                newton_residual: None,
                count: rec.zero_count_per_region,
                status,
            });
            continue;
        }
        for z in &rec.resonances {
            rows.push(SweepRow {
                omega: rec.omega,
                r: rec.r,
                sheet_id: rec.sheet_id.clone(),
                re_z: Some(z.z_star.re),
                im_z: Some(z.z_star.im),
                gamma: Some(z.gamma),
                visible: Some(z.visible),
                newton_residual: Some(z.newton_residual),
                count: rec.zero_count_per_region,
                status: status.clone(),
            });
        }
    }
    rows
}

fn parse_sheet_set(spec: &str) -> Result<Vec<SheetConfig>, CliError> {
    if spec.trim() == "default" {
        return Ok(default_sheet_set());
    }
    spec.split('|').map(parse_sheet).collect()
}

fn cmd_sweep(a: &SweepArgs, echo: &Value) -> Result<i32, CliError> {
    let base = ModelParams::new(a.omega, a.r_start, a.potential.into())?;
    if a.r_end < 0.0 {
        return Err(invalid("--r-end must be non-negative"));
    }
    let grid = linspace(a.r_start, a.r_end, a.r_steps);
    let sheets = parse_sheet_set(&a.sheets)?;
    let opts = SweepOptions { tracking: a.track, ..Default::default() };
    let records = sweep(&grid, &base, &sheets, &opts)?;
    write_table(&a.output, &a.output.out, &header("sweep", echo), &SWEEP_COLUMNS, &sweep_rows(&records))?;
    Ok(if records.iter().any(|r| r.error.is_some()) { EXIT_NUMERICAL } else { EXIT_OK })
}

// ---------------------------------------------------------------- omegascan

#[derive(Serialize)]
struct ScanRow {
    omega: f64,
    re_z: Option<f64>,
    im_z: Option<f64>,
    gamma: Option<f64>,
    m_estimate: Option<f64>,
    status: String,
}

fn cmd_omegascan(a: &OmegascanArgs, echo: &Value) -> Result<i32, CliError> {
    let r = a.r.ok_or_else(|| invalid("--r is required"))?;
    let cfg = parse_sheet(&a.sheet)?;
    if a.points == 0 {
        return Err(invalid("--points must be at least 1"));
    }
    let omegas = linspace(a.omega_start, a.omega_end, a.points - 1);
    let params: Vec<ModelParams> =
        omegas.iter().map(|&w| ModelParams::new(w, r, a.potential.into())).collect::<Result<_, _>>()?;
    let results: Vec<Vec<ScanRow>> = params
        .par_iter()
        .map(|p| {
            let blank = |status: String| ScanRow { omega: p.omega, re_z: None, im_z: None, gamma: None, m_estimate: None, status };
            match find_resonances(p, &cfg, &FindOptions::default()) {
                Err(e) => vec![blank(format!("error: {e}"))],
                Ok(s) if s.resonances.is_empty() => vec![blank(if s.count == 0 { "none".into() } else { "inconsistent".into() })],
                Ok(s) => {
                    let status = if s.consistent { "ok" } else { "inconsistent" };
                    s.resonances
                        .iter()
                        .map(|z| ScanRow {
                            omega: p.omega,
                            re_z: Some(z.z_star.re),
                            im_z: Some(z.z_star.im),
                            gamma: Some(z.gamma),
                            // |Re z| ~ r^{2m+2}
                            m_estimate: (r > 0.0 && r != 1.0 && z.z_star.re != 0.0)
                                .then(|| 0.5 * z.z_star.re.abs().ln() / r.ln() - 1.0),
                            status: status.into(),
                        })
                        .collect()
                }
            }
        })
        .collect();
    let rows: Vec<ScanRow> = results.into_iter().flatten().collect();
    let failed = rows.iter().any(|r| r.status.starts_with("error"));
    write_table(
        &a.output,
        &a.output.out,
        &header("omegascan", echo),
        &["omega", "re_z", "im_z", "gamma", "m_estimate", "status"],
        &rows,
    )?;
    Ok(if failed { EXIT_NUMERICAL } else { EXIT_OK })
}

// ---------------------------------------------------------------- psieval

#[derive(Serialize)]
struct PsiRow {
    x: f64,
    t: f64,
    re_psi: Option<f64>,
    im_psi: Option<f64>,
    re_gamow: Option<f64>,
    im_gamow: Option<f64>,
    abs_cut: Option<f64>,
    abs_f: Option<f64>,
    status: String,
}

fn cmd_psieval(a: &PsievalArgs, echo: &Value) -> Result<i32, CliError> {
    let params = a.model.params()?;
    let psi0 = a.psi0.build()?;
    let xs = parse_grid(&a.x, "x")?;
    let ts = parse_grid(a.t.as_deref().ok_or_else(|| invalid("--t is required"))?, "t")?;
    if ts.iter().any(|&t| t <= 0.0) {
        return Err(invalid("times must be positive"));
    }
    let opts = TimeDomainOptions { theta: a.theta, n_cut: a.n_cut, ..Default::default() };
    let ev = PsiEvaluator::new(&params, &psi0, &SheetConfig::usual(), &opts)?;
    let pts: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ts.iter().map(move |&t| (x, t))).collect();
    let rows: Vec<PsiRow> = pts
        .iter()
        .zip(ev.eval_grid(&xs, &ts))
        .map(|(&(x, t), d)| match d {
            Ok(d) => PsiRow {
                x,
                t,
                re_psi: Some(d.total.re),
                im_psi: Some(d.total.im),
                re_gamow: Some(d.gamow.re),
                im_gamow: Some(d.gamow.im),
                abs_cut: Some(d.cut_sum.norm()),
                abs_f: Some(d.f_term.norm()),
                status: "ok".into(),
            },
            Err(e) => PsiRow {
                x,
                t,
                re_psi: None,
                im_psi: None,
                re_gamow: None,
                im_gamow: None,
                abs_cut: None,
                abs_f: None,
                status: format!("error: {e}"),
            },
        })
        .collect();
    let failed = rows.iter().any(|r| r.status != "ok");
    let mut head = header("psieval", echo);
    head["resonances"] = json!(ev.resonances.iter().map(|r| json!({ "z_star": r.z_star, "gamma": r.gamma })).collect::<Vec<_>>());
    write_table(
        &a.output,
        &a.output.out,
        &head,
        &["x", "t", "re_psi", "im_psi", "re_gamow", "im_gamow", "abs_cut", "abs_f", "status"],
        &rows,
    )?;
    Ok(if failed { EXIT_NUMERICAL } else { EXIT_OK })
}

// ---------------------------------------------------------------- tdse

#[derive(Serialize)]
struct TdseRow {
    t: f64,
    x: f64,
    re_psi: f64,
    im_psi: f64,
}

#[derive(Serialize)]
struct SurvivalRow {
    t: f64,
    #[serde(rename = "P_ab")]
    p_ab: f64,
}

fn cmd_tdse(a: &TdseArgs, echo: &Value) -> Result<i32, CliError> {
    let params = a.model.params()?;
    let psi0 = a.psi0.build()?;
    let t_end = a.t_end.ok_or_else(|| invalid("--t-end is required"))?;
    if !(t_end > 0.0) {
        return Err(invalid("--t-end must be positive"));
    }
    if !(a.record_every >= a.dt) {
        return Err(invalid("--record-every must be at least dt"));
    }
    let boundary = match a.boundary {
        BoundaryKind::Absorbing => Boundary::default_absorbing(a.l),
        BoundaryKind::Reflecting => Boundary::Reflecting,
    };
    let mut state = GridState::new(a.l, a.dx, a.dt, boundary)?.with_initial(&psi0)?;
    let rec = RecordOptions {
        stride: (a.record_every / a.dt).round() as usize,
        window: a.window,
        snapshot_stride: a.x_stride,
        ..Default::default()
    };
    let traj = evolve(&mut state, &params, t_end, &rec)?;
    let window = match &a.fit {
        Some(s) => {
            let (lo, hi) = s.split_once(':').ok_or_else(|| invalid(format!("bad --fit {s:?}: expected a:b")))?;
            (parse_f64(lo, "fit")?, parse_f64(hi, "fit")?)
        }
        None => (t_end / 8.0, 0.75 * t_end),
    };
    let fit = survival_decay(&traj, window);
    let mut head = header("tdse", echo);
    head["fit"] = match &fit {
        Ok(f) => json!({ "window": [window.0, window.1], "rate": f.rate, "r_squared": f.r_squared, "exponential": f.exponential }),
        Err(e) => json!({ "window": [window.0, window.1], "error": e.to_string() }),
    };
    head["max_step_drift"] = json!(traj.max_step_drift);
    let rows: Vec<TdseRow> = if a.x_stride.is_some() {
        traj.snapshots
            .iter()
            .flat_map(|(t, nodes)| nodes.iter().map(move |(x, v)| TdseRow { t: *t, x: *x, re_psi: v.re, im_psi: v.im }))
            .collect()
    } else {
        traj.t.iter().zip(&traj.origin).map(|(t, v)| TdseRow { t: *t, x: 0.0, re_psi: v.re, im_psi: v.im }).collect()
    };
    write_table(&a.output, &a.output.out, &head, &["t", "x", "re_psi", "im_psi"], &rows)?;
    if let Some(path) = &a.survival {
        let srows: Vec<SurvivalRow> = traj.t.iter().zip(&traj.survival).map(|(t, p)| SurvivalRow { t: *t, p_ab: *p }).collect();
        write_table(&a.output, &Some(path.clone()), &head, &["t", "P_ab"], &srows)?;
    }
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- selftest

fn cmd_selftest(a: &SelftestArgs) -> Result<i32, CliError> {
    let level = match a.level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    let checks = selftest::run(level);
    let all = checks.iter().all(|c| c.passed);
    let mut w = open_out(&a.output.out)?;
    match a.output.format {
        Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&json!({ "schema": SCHEMA, "level": level, "passed": all, "checks": checks }))?)?,
        Format::Csv => {
            for c in &checks {
                writeln!(w, "{}", c.line())?;
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if failed.is_empty() {
                writeln!(w, "all {} checks passed", checks.len())?;
            } else {
                writeln!(w, "failed: {}", failed.join(", "))?;
            }
        }
    }
    w.flush()?;
    Ok(if all { EXIT_OK } else { EXIT_NUMERICAL })
}
