//! The `gamow-lab` command line: scenario configs in, deterministic tables
//! and reports out.
//!
//! A scenario is a flat `key = value` file with dotted keys (`line.gamma`,
//! `time.max`, `event.1.x`). `--set key=value` overrides file entries,
//! `--tol`, `--seed` and `--format` override the matching keys. Identical
//! inputs produce byte-identical output: grids are evaluated in parallel
//! but assembled in grid order, and all randomness is seeded.
//!
//! Exit codes: 0 success, 2 config or argument validation, 3 numerical
//! failure (tolerance not met, fit did not converge).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::dynamics::{self, DynamicsError};
use crate::fitting::{self, FittingError};
use crate::quadrature::DEFAULT_TOL;
use crate::relativistic::{
    transform_gamow, FourVector, GamowLabel, HalfInt, LorentzTransform, PoincareOutcome,
};
use crate::spectral::{self, HalfPlane, RationalHardyFunction, ResonanceLine, SpectralSupport};
use crate::units;

#[derive(Debug)]
enum CliError {
    /// Bad flags or config; nothing was computed. Exit 2.
    Validation(String),
    /// The computation itself failed or missed its tolerance. Exit 3.
    Numeric(String),
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<FittingError> for CliError {
    fn from(e: FittingError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "gamow-lab",
    about = "Resonance lineshape, decay-law, and symmetry-action toolbox",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survival amplitude A(t) on a time grid, both spectral supports
    Survival(CommonArgs),
    /// Closed-form spectral norm and its narrow-line series
    Norm(CommonArgs),
    /// Generate data, fit width and rate, compare the two
    Fit(CommonArgs),
    /// Excitation probability of a detector at distance r
    Fermi(CommonArgs),
    /// Poincare transformations applied to a resonance label
    Relativistic(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file of `key = value` lines; '#' starts a comment
    #[arg(long)]
    config: std::path::PathBuf,
    /// Override one config entry, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output layout
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Quadrature tolerance override
    #[arg(long)]
    tol: Option<f64>,
    /// Seed override for data generation
    #[arg(long)]
    seed: Option<u64>,
    /// Prefix the output with constant origins and the resolved scenario
    #[arg(long)]
    explain: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    /// Comma rows with a '#' header line
    Csv,
    /// One structured JSON document
    JsonDoc,
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap prints help/version on stdout (exit 0) and usage errors on
        // stderr (exit 2), matching the validation contract
        Err(e) => e.exit(),
    };
    let (name, args) = match &cli.command {
        Command::Survival(a) => ("survival", a),
        Command::Norm(a) => ("norm", a),
        Command::Fit(a) => ("fit", a),
        Command::Fermi(a) => ("fermi", a),
        Command::Relativistic(a) => ("relativistic", a),
    };
    match run(name, args) {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(name: &'static str, args: &CommonArgs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| invalid(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = Config::parse(&text)?;
    for pair in &args.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| invalid(format!("--set needs KEY=VALUE, got '{pair}'")))?;
        cfg.map.insert(key.trim().to_string(), value.trim().to_string());
    }
    if let Some(tol) = args.tol {
        cfg.map.insert("tol".into(), format!("{tol}"));
    }
    if let Some(seed) = args.seed {
        cfg.map.insert("seed".into(), format!("{seed}"));
    }
    if let Some(format) = args.format {
        let value = match format {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonDoc => "json-doc",
        };
        cfg.map.insert("format".into(), value.into());
    }
    cfg.check_keys(name)?;

    let format = match cfg.str_key("format")?.unwrap_or("csv") {
        "csv" => OutputFormat::Csv,
        "json-doc" => OutputFormat::JsonDoc,
        other => return Err(invalid(format!("format must be csv or json-doc, got '{other}'"))),
    };

    let mut explain = Vec::new();
    if args.explain {
        explain_scenario(&cfg, &mut explain)?;
    }

    let body = match name {
        "survival" => cmd_survival(&cfg)?,
        "norm" => cmd_norm(&cfg)?,
        "fit" => cmd_fit(&cfg)?,
        "fermi" => cmd_fermi(&cfg)?,
        "relativistic" => cmd_relativistic(&cfg)?,
        _ => unreachable!("subcommand list is closed"),
    };
    Ok(render(name, &body, &explain, format))
}

// ---------------------------------------------------------------- config

struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("config line {}: expected key = value", i + 1)))?;
            let key = key.trim().to_string();
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(invalid(format!("config line {}: duplicate key '{key}'", i + 1)));
            }
        }
        Ok(Self { map })
    }

    /// Reject keys the subcommand will never read, before any computation.
    fn check_keys(&self, command: &str) -> Result<(), CliError> {
        const GLOBAL: &[&str] = &["tol", "seed", "format"];
        const LINE: &[&str] = &["line.preset", "line.e_r", "line.gamma"];
        const TIME: &[&str] = &["time.min", "time.max", "time.count", "time.spacing", "time.unit"];
        let fixed: &[&str] = match command {
            "survival" => &["support"],
            "norm" => &["norm.order"],
            "fit" => &[
                "fit.scale",
                "fit.noise_sigma",
                "fit.poisson",
                "fit.n_initial",
                "fit.lineshape_path",
                "fit.counts_path",
                "energy.min",
                "energy.max",
                "energy.count",
                "energy.spacing",
            ],
            "fermi" => &["psi.poles", "fermi.r", "fermi.c"],
            "relativistic" => &[
                "label.preset",
                "label.j",
                "label.j3",
                "label.mass",
                "label.width",
                "label.velocity",
            ],
            _ => &[],
        };
        let time_ok = matches!(command, "survival" | "fit" | "fermi");
        let line_ok = command != "relativistic";
        for key in self.map.keys() {
            let known = GLOBAL.contains(&key.as_str())
                || fixed.contains(&key.as_str())
                || (line_ok && LINE.contains(&key.as_str()))
                || (time_ok && TIME.contains(&key.as_str()))
                || (command == "relativistic" && is_event_key(key));
            if !known {
                return Err(invalid(format!("unknown key '{key}' for `{command}`")));
            }
        }
        Ok(())
    }

    fn str_key(&self, key: &str) -> Result<Option<&str>, CliError> {
        Ok(self.map.get(key).map(|s| s.as_str()))
    }

    fn f64_key(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.map
            .get(key)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| invalid(format!("{key}: '{s}' is not a number")))
            })
            .transpose()
    }

    fn u64_key(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.map
            .get(key)
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| invalid(format!("{key}: '{s}' is not a non-negative integer")))
            })
            .transpose()
    }

    fn bool_key(&self, key: &str) -> Result<Option<bool>, CliError> {
        self.map
            .get(key)
            .map(|s| match s.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(invalid(format!("{key}: expected true or false, got '{other}'"))),
            })
            .transpose()
    }

    fn tol(&self) -> Result<f64, CliError> {
        let tol = self.f64_key("tol")?.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid(format!("tol must be positive and finite, got {tol}")));
        }
        Ok(tol)
    }

    fn seed(&self) -> Result<u64, CliError> {
        Ok(self.u64_key("seed")?.unwrap_or(0))
    }
}

fn is_event_key(key: &str) -> bool {
    let mut parts = key.split('.');
    matches!(
        (parts.next(), parts.next(), parts.next(), parts.next()),
        (Some("event"), Some(index), Some("type" | "v" | "axis" | "angle" | "x"), None)
            if index.parse::<usize>().is_ok()
    )
}

// --------------------------------------------------------------- presets

struct Preset {
    e_r_ev: f64,
    gamma_ev: f64,
    /// Independently measured lifetime, when one exists, for the
    /// width-against-clock comparison.
    direct_lifetime_s: Option<f64>,
    explain: &'static [&'static str],
}

fn lookup_preset(name: &str) -> Option<Preset> {
    match name {
        "sodium-3p" => Some(Preset {
            e_r_ev: 2.1044,
            gamma_ev: 4.0538e-8,
            direct_lifetime_s: Some(16.254e-9),
            explain: &[
                "sodium-3p: natural linewidth of the Na 3p 2P3/2 level,",
                "  9.802(22) MHz = 4.0538(91)e-8 eV, measured on trapped ultracold",
                "  atoms (Oates, Vogel, Hall 1996). Direct lifetime 16.254(22) ns",
                "  from beam-gas-laser spectroscopy (Volz et al. 1996). Line energy",
                "  2.1044 eV is the D2 transition (589.0 nm), quoted for scale only.",
            ],
        }),
        "fe57" => Some(Preset {
            e_r_ev: 14.4e3,
            gamma_ev: 4.7e-9,
            direct_lifetime_s: Some(1.4e-7),
            explain: &[
                "fe57: recoil-free 14.4 keV line of Fe-57. Moessbauer-effect width",
                "  4.7e-9 eV and direct lifetime 1.4e-7 s (classic measurements,",
                "  ca. 1960); the two agree at the ten-percent level.",
            ],
        }),
        "pi0" => Some(Preset {
            e_r_ev: 134.9768e6,
            // hbar / (8.97e-17 s); only the lifetime is measured directly
            gamma_ev: units::HBAR_EV_S / 8.97e-17,
            direct_lifetime_s: Some(8.97e-17),
            explain: &[
                "pi0: neutral pion, mass 134.9768 MeV. Time-of-flight lifetime",
                "  8.97 +/- 0.22 +/- 0.17 e-17 s (Atherton et al. 1985); the width",
                "  entry is hbar/tau = 7.3379 eV since no lineshape is resolvable.",
            ],
        }),
        _ => None,
    }
}

fn resolve_line(cfg: &Config) -> Result<(ResonanceLine, Option<Preset>), CliError> {
    let preset = match cfg.str_key("line.preset")? {
        Some(name) => Some(
            lookup_preset(name)
                .ok_or_else(|| invalid(format!("unknown preset '{name}' (sodium-3p, fe57, pi0)")))?,
        ),
        None => None,
    };
    let e_r = match (cfg.f64_key("line.e_r")?, &preset) {
        (Some(v), _) => v,
        (None, Some(p)) => p.e_r_ev,
        (None, None) => return Err(invalid("set line.preset or line.e_r")),
    };
    let gamma = match (cfg.f64_key("line.gamma")?, &preset) {
        (Some(v), _) => v,
        (None, Some(p)) => p.gamma_ev,
        (None, None) => return Err(invalid("set line.preset or line.gamma")),
    };
    let line = ResonanceLine::new(e_r, gamma).map_err(|e| invalid(e.to_string()))?;
    Ok((line, preset))
}

fn resolve_support(cfg: &Config) -> Result<SpectralSupport, CliError> {
    match cfg.str_key("support")?.unwrap_or("half-line") {
        "half-line" => Ok(SpectralSupport::HalfLine),
        "full-line" => Ok(SpectralSupport::FullLine),
        other => Err(invalid(format!(
            "support must be half-line or full-line, got '{other}'"
        ))),
    }
}

/// Time or energy grid under `prefix.*`. Times may be given in units of
/// the line's lifetime (`time.unit = tau`).
fn resolve_grid(
    cfg: &Config,
    prefix: &str,
    line: &ResonanceLine,
    default: (f64, f64, usize),
) -> Result<Vec<f64>, CliError> {
    let min = cfg.f64_key(&format!("{prefix}.min"))?.unwrap_or(default.0);
    let max = cfg.f64_key(&format!("{prefix}.max"))?.unwrap_or(default.1);
    let count = cfg.u64_key(&format!("{prefix}.count"))?.unwrap_or(default.2 as u64) as usize;
    let spacing = cfg
        .str_key(&format!("{prefix}.spacing"))?
        .unwrap_or("linear");
    let scale = match cfg.str_key(&format!("{prefix}.unit"))? {
        None | Some("natural") => 1.0,
        Some("tau") if prefix == "time" => line.tau(),
        Some(other) => {
            return Err(invalid(format!("{prefix}.unit: expected natural or tau, got '{other}'")))
        }
    };
    if !(min.is_finite() && max.is_finite() && max > min) {
        return Err(invalid(format!("{prefix} grid needs finite max > min, got [{min}, {max}]")));
    }
    if !(2..=1_000_000).contains(&count) {
        return Err(invalid(format!("{prefix}.count must be in [2, 1000000], got {count}")));
    }
    let points = match spacing {
        "linear" => (0..count)
            .map(|k| min + (max - min) * k as f64 / (count - 1) as f64)
            .collect::<Vec<_>>(),
        "log" => {
            if min <= 0.0 {
                return Err(invalid(format!("log spacing needs {prefix}.min > 0, got {min}")));
            }
            let (a, b) = (min.ln(), max.ln());
            (0..count)
                .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
                .collect()
        }
        other => {
            return Err(invalid(format!("{prefix}.spacing must be linear or log, got '{other}'")))
        }
    };
    Ok(points.into_iter().map(|x| x * scale).collect())
}

fn resolve_psi(cfg: &Config) -> Result<RationalHardyFunction, CliError> {
    let listed = cfg.str_key("psi.poles")?.unwrap_or("2i, 3i");
    let poles = listed
        .split(',')
        .map(|s| parse_complex(s).map_err(|e| invalid(format!("psi.poles: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(p) = poles.iter().find(|p| p.im <= 0.0) {
        return Err(invalid(format!(
            "psi.poles must lie strictly above the real axis, got {p}"
        )));
    }
    RationalHardyFunction::reciprocal_poles(&poles, HalfPlane::Lower)
        .map_err(|e| invalid(e.to_string()))
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err("empty complex literal".into());
    }
    let parse_re = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| format!("cannot parse '{s}' as a complex number"))
    };
    let Some(body) = t.strip_suffix(['i', 'I']) else {
        return parse_re(&t).map(|re| Complex64::new(re, 0.0));
    };
    // split before the last sign that is not an exponent sign
    let split = body
        .bytes()
        .enumerate()
        .skip(1)
        .rev()
        .find(|&(k, b)| {
            (b == b'+' || b == b'-') && !matches!(body.as_bytes()[k - 1], b'e' | b'E')
        })
        .map(|(k, _)| k);
    let (re_s, im_s) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let re = if re_s.is_empty() { 0.0 } else { parse_re(re_s)? };
    let im = match im_s {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => parse_re(v)?,
    };
    Ok(Complex64::new(re, im))
}

fn parse_floats<const N: usize>(key: &str, s: &str) -> Result<[f64; N], CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(invalid(format!("{key}: expected {N} comma-separated numbers, got '{s}'")));
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| invalid(format!("{key}: '{part}' is not a number")))?;
    }
    Ok(out)
}

fn parse_half_int(key: &str, s: &str) -> Result<HalfInt, CliError> {
    let bad = || invalid(format!("{key}: expected an integer or odd/2 fraction, got '{s}'"));
    if let Some((num, den)) = s.split_once('/') {
        if den.trim() != "2" {
            return Err(bad());
        }
        let twice: i32 = num.trim().parse().map_err(|_| bad())?;
        return Ok(HalfInt::from_twice(twice));
    }
    let n: i32 = s.trim().parse().map_err(|_| bad())?;
    Ok(HalfInt::from_int(n))
}

// ------------------------------------------------------------ rendering

/// One report entry or table cell.
#[derive(Clone)]
enum Value {
    Num(f64),
    Text(String),
}

impl Value {
    fn to_json(&self) -> serde_json::Value {
        match self {
            // non-finite numbers have no JSON encoding; fall back to text
            Value::Num(x) if x.is_finite() => serde_json::json!(x),
            Value::Num(x) => serde_json::json!(format!("{x}")),
            Value::Text(s) => serde_json::json!(s),
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}

enum Body {
    Table {
        columns: Vec<&'static str>,
        rows: Vec<Vec<Value>>,
    },
    Report {
        entries: Vec<(String, Value)>,
    },
}

fn render(command: &str, body: &Body, explain: &[String], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            for line in explain {
                let _ = writeln!(out, "# {line}");
            }
            match body {
                Body::Table { columns, rows } => {
                    let _ = writeln!(out, "# {}", columns.join(","));
                    for row in rows {
                        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                        let _ = writeln!(out, "{}", cells.join(","));
                    }
                }
                Body::Report { entries } => {
                    let _ = writeln!(out, "# key,value");
                    for (key, value) in entries {
                        let _ = writeln!(out, "{key},{value}");
                    }
                }
            }
            out
        }
        OutputFormat::JsonDoc => {
            let mut doc = serde_json::Map::new();
            doc.insert("command".into(), serde_json::json!(command));
            if !explain.is_empty() {
                doc.insert("explain".into(), serde_json::json!(explain));
            }
            match body {
                Body::Table { columns, rows } => {
                    doc.insert("columns".into(), serde_json::json!(columns));
                    let rows: Vec<serde_json::Value> = rows
                        .iter()
                        .map(|row| {
                            serde_json::Value::Array(row.iter().map(Value::to_json).collect())
                        })
                        .collect();
                    doc.insert("rows".into(), serde_json::Value::Array(rows));
                }
                Body::Report { entries } => {
                    let entries: Vec<serde_json::Value> = entries
                        .iter()
                        .map(|(k, v)| serde_json::json!([k, v.to_json()]))
                        .collect();
                    doc.insert("entries".into(), serde_json::Value::Array(entries));
                }
            }
            let mut out = serde_json::to_string_pretty(&serde_json::Value::Object(doc))
                .expect("no non-string keys");
            out.push('\n');
            out
        }
    }
}

fn explain_scenario(cfg: &Config, out: &mut Vec<String>) -> Result<(), CliError> {
    if let Some(name) = cfg.str_key("line.preset")? {
        if let Some(preset) = lookup_preset(name) {
            out.extend(preset.explain.iter().map(|s| s.to_string()));
        }
    }
    if let Some(name) = cfg.str_key("label.preset")? {
        if let Some(preset) = lookup_preset(name) {
            out.extend(preset.explain.iter().map(|s| s.to_string()));
        }
    }
    out.push("units: energies in eV, times in hbar/eV unless time.unit = tau".to_string());
    let mut resolved: Vec<String> = cfg
        .map
        .iter()
        .map(|(k, v)| format!("{k} = {v}"))
        .collect();
    resolved.sort();
    out.push(format!("resolved scenario: {}", resolved.join("; ")));
    Ok(())
}

// ------------------------------------------------------------- parallel

/// Evaluate `f` over `0..n` on a few threads, results in index order.
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(8)
        .min(n.max(1));
    if threads <= 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk = n.div_ceil(threads);
    std::thread::scope(|scope| {
        for (c, piece) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in piece.iter_mut().enumerate() {
                    *slot = Some(f(c * chunk + j));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("chunks cover 0..n")).collect()
}

// ------------------------------------------------------------- commands

fn cmd_survival(cfg: &Config) -> Result<Body, CliError> {
    let (line, _) = resolve_line(cfg)?;
    let support = resolve_support(cfg)?;
    let tol = cfg.tol()?;
    let grid = resolve_grid(cfg, "time", &line, (0.0, 5.0 * line.tau(), 101))?;
    // Amplitude of still being the resonance, normalized at preparation.
    // Full line: the exact semigroup result, one-sided by construction.
    // Half line: the self-overlap of the truncated density, by quadrature.
    let amplitude = |t: f64| -> Result<(Complex64, f64), DynamicsError> {
        match support {
            SpectralSupport::FullLine => {
                if t < 0.0 {
                    Ok((Complex64::new(0.0, 0.0), 0.0))
                } else {
                    Ok(((-Complex64::i() * line.z_r() * t).exp(), 0.0))
                }
            }
            SpectralSupport::HalfLine => {
                let r = dynamics::survival_amplitude(&line, support, t, tol)?;
                Ok((r.value, r.abs_error_estimate))
            }
        }
    };
    let rows = par_map(grid.len(), |k| {
        amplitude(grid[k]).map(|(value, err)| {
            vec![
                Value::Num(grid[k]),
                Value::Num(value.re),
                Value::Num(value.im),
                Value::Num(value.norm_sqr()),
                Value::Num(amp_err_to_prob_err(value.norm(), err)),
            ]
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(Body::Table {
        columns: vec!["t", "re_a", "im_a", "abs2", "error_estimate"],
        rows,
    })
}

/// First-order error of `|a|^2` given `|a|` and the error of `a`.
fn amp_err_to_prob_err(amp: f64, err: f64) -> f64 {
    2.0 * amp * err + err * err
}

fn cmd_norm(cfg: &Config) -> Result<Body, CliError> {
    let (line, _) = resolve_line(cfg)?;
    let order = cfg.u64_key("norm.order")?.unwrap_or(6);
    if order > 60 {
        return Err(invalid(format!("norm.order must be at most 60, got {order}")));
    }
    let closed = spectral::norm_truncated_closed_form(&line);
    let mut entries = vec![
        ("ratio_gamma_over_e_r".to_string(), Value::Num(line.ratio())),
        ("closed_form".to_string(), Value::Num(closed)),
    ];
    for k in 0..=order {
        let partial = spectral::norm_truncated_series(&line, k as usize)
            .map_err(|e| invalid(e.to_string()))?;
        entries.push((format!("series_order_{k}"), Value::Num(partial)));
    }
    entries.push(("full_line".to_string(), Value::Num(1.0)));
    Ok(Body::Report { entries })
}

fn cmd_fit(cfg: &Config) -> Result<Body, CliError> {
    let (line, preset) = resolve_line(cfg)?;
    let seed = cfg.seed()?;

    let sample = match cfg.str_key("fit.lineshape_path")? {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("cannot read {path}: {e}")))?;
            fitting::import_lineshape(&text).map_err(|e| invalid(e.to_string()))?
        }
        None => {
            let half_span = 5.0 * line.gamma();
            let e_grid = resolve_grid(
                cfg,
                "energy",
                &line,
                (line.e_r() - half_span, line.e_r() + half_span, 201),
            )?;
            let scale = cfg.f64_key("fit.scale")?.unwrap_or(1.0);
            let sigma = cfg.f64_key("fit.noise_sigma")?.unwrap_or(0.0);
            fitting::generate_lineshape(&line, &e_grid, scale, sigma, seed)
                .map_err(|e| invalid(e.to_string()))?
        }
    };

    let counts = match cfg.str_key("fit.counts_path")? {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("cannot read {path}: {e}")))?;
            fitting::import_decay_counts(&text).map_err(|e| invalid(e.to_string()))?
        }
        None => {
            let edges = resolve_grid(cfg, "time", &line, (0.0, 5.0 * line.tau(), 51))?;
            let n_initial = cfg.u64_key("fit.n_initial")?.unwrap_or(100_000_000);
            let poisson = cfg.bool_key("fit.poisson")?.unwrap_or(false);
            fitting::generate_decay_counts(&line, &edges, n_initial, seed, poisson)
                .map_err(|e| invalid(e.to_string()))?
        }
    };

    let shape = fitting::fit_lineshape(&sample)?;
    let rate = fitting::fit_decay_rate(&counts)?;
    let report =
        fitting::compare_width_lifetime(shape.gamma, shape.gamma_err, rate.gamma_r, rate.gamma_r_err)?;

    let consistent = (report.ratio - 1.0).abs() <= 0.10;
    let mut entries = vec![
        ("gamma_lineshape_ev".into(), Value::Num(report.gamma_fit)),
        ("gamma_lineshape_err_ev".into(), Value::Num(report.gamma_fit_err)),
        ("e_r_ev".into(), Value::Num(shape.e_r)),
        ("gamma_rate_ev".into(), Value::Num(report.gamma_r_fit)),
        ("gamma_rate_err_ev".into(), Value::Num(report.gamma_r_fit_err)),
        ("tau_ns".into(), Value::Num(report.tau_fit_seconds / units::NANOSECOND)),
        ("tau_err_ns".into(), Value::Num(report.tau_err_seconds / units::NANOSECOND)),
        ("width_rate_ratio".into(), Value::Num(report.ratio)),
        ("width_rate_ratio_err".into(), Value::Num(report.ratio_err)),
        (
            "width_rate_consistency".into(),
            Value::Text(if consistent { "PASS".into() } else { "FAIL".into() }),
        ),
    ];
    if let Some(tau_direct) = preset.and_then(|p| p.direct_lifetime_s) {
        // fitted clock against the independently measured one
        let ratio = report.tau_fit_seconds / tau_direct;
        let agree = (ratio - 1.0).abs() <= 0.10;
        entries.push(("direct_lifetime_ns".into(), Value::Num(tau_direct / units::NANOSECOND)));
        entries.push(("direct_lifetime_ratio".into(), Value::Num(ratio)));
        entries.push((
            "direct_lifetime_agreement".into(),
            Value::Text(if agree { "PASS".into() } else { "FAIL".into() }),
        ));
    }
    Ok(Body::Report { entries })
}

fn cmd_fermi(cfg: &Config) -> Result<Body, CliError> {
    let (line, _) = resolve_line(cfg)?;
    let psi = resolve_psi(cfg)?;
    let tol = cfg.tol()?;
    let r = cfg.f64_key("fermi.r")?.unwrap_or(0.0);
    let c = cfg.f64_key("fermi.c")?.unwrap_or(1.0);
    if !(r >= 0.0 && r.is_finite() && c > 0.0 && c.is_finite()) {
        return Err(invalid(format!(
            "retardation needs r >= 0 and c > 0, got r = {r}, c = {c}"
        )));
    }
    let grid = resolve_grid(cfg, "time", &line, (0.0, 3.0 * r / c + 5.0 * line.tau(), 61))?;
    let rows = par_map(grid.len(), |k| -> Result<Vec<Value>, DynamicsError> {
        let retarded = grid[k] - r / c;
        let mut row = vec![Value::Num(grid[k])];
        for support in [SpectralSupport::FullLine, SpectralSupport::HalfLine] {
            let a = dynamics::gamow_amplitude_detailed(&line, &psi, retarded, support, tol)?;
            row.push(Value::Num(a.value.norm_sqr()));
            row.push(Value::Num(amp_err_to_prob_err(a.value.norm(), a.abs_error_estimate)));
        }
        Ok(row)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(Body::Table {
        columns: vec!["t", "p_full", "err_full", "p_half", "err_half"],
        rows,
    })
}

struct EventSpec {
    index: usize,
    transform: LorentzTransform,
    x: FourVector,
}

fn parse_events(cfg: &Config) -> Result<Vec<EventSpec>, CliError> {
    let mut indices: Vec<usize> = cfg
        .map
        .keys()
        .filter(|k| is_event_key(k))
        .filter_map(|k| k.split('.').nth(1)?.parse().ok())
        .collect();
    indices.sort_unstable();
    indices.dedup();
    if indices.is_empty() {
        return Err(invalid("no events: add event.1.type and event.1.x"));
    }
    let mut events = Vec::new();
    for index in indices {
        let key = |field: &str| format!("event.{index}.{field}");
        let kind = cfg
            .str_key(&key("type"))?
            .ok_or_else(|| invalid(format!("{} is required", key("type"))))?;
        let transform = match kind {
            "identity" => LorentzTransform::identity(),
            "boost" => {
                let v = cfg
                    .str_key(&key("v"))?
                    .ok_or_else(|| invalid(format!("{} is required for a boost", key("v"))))?;
                let v = parse_floats::<3>(&key("v"), v)?;
                LorentzTransform::boost(v).map_err(|e| invalid(e.to_string()))?
            }
            "rotation" => {
                let axis = cfg
                    .str_key(&key("axis"))?
                    .ok_or_else(|| invalid(format!("{} is required for a rotation", key("axis"))))?;
                let axis = parse_floats::<3>(&key("axis"), axis)?;
                let angle = cfg
                    .f64_key(&key("angle"))?
                    .ok_or_else(|| invalid(format!("{} is required for a rotation", key("angle"))))?;
                LorentzTransform::rotation(axis, angle).map_err(|e| invalid(e.to_string()))?
            }
            other => {
                return Err(invalid(format!(
                    "{}: expected identity, boost or rotation, got '{other}'",
                    key("type")
                )))
            }
        };
        let x = cfg
            .str_key(&key("x"))?
            .ok_or_else(|| invalid(format!("{} is required", key("x"))))?;
        let [t, x1, x2, x3] = parse_floats::<4>(&key("x"), x)?;
        events.push(EventSpec {
            index,
            transform,
            x: FourVector::new(t, [x1, x2, x3]),
        });
    }
    Ok(events)
}

fn fmt_complex(z: Complex64) -> String {
    if z.im < 0.0 {
        format!("{}{}i", z.re, z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn cmd_relativistic(cfg: &Config) -> Result<Body, CliError> {
    let j = parse_half_int("label.j", cfg.str_key("label.j")?.unwrap_or("0"))?;
    let j3 = parse_half_int("label.j3", cfg.str_key("label.j3")?.unwrap_or("0"))?;
    let preset = match cfg.str_key("label.preset")? {
        Some(name) => Some(
            lookup_preset(name)
                .ok_or_else(|| invalid(format!("unknown preset '{name}' (sodium-3p, fe57, pi0)")))?,
        ),
        None => None,
    };
    let mass = match (cfg.f64_key("label.mass")?, &preset) {
        (Some(v), _) => v,
        (None, Some(p)) => p.e_r_ev,
        (None, None) => return Err(invalid("set label.preset or label.mass")),
    };
    let width = match (cfg.f64_key("label.width")?, &preset) {
        (Some(v), _) => v,
        (None, Some(p)) => p.gamma_ev,
        (None, None) => return Err(invalid("set label.preset or label.width")),
    };
    let velocity = match cfg.str_key("label.velocity")? {
        Some(v) => parse_floats::<3>("label.velocity", v)?,
        None => [0.0; 3],
    };
    let label = GamowLabel::from_mass_width(j, mass, width, velocity, j3)
        .map_err(|e| invalid(e.to_string()))?;

    let events = parse_events(cfg)?;
    let mut entries = vec![
        ("label_j".to_string(), Value::Text(j.to_string())),
        ("label_j3".to_string(), Value::Text(j3.to_string())),
        ("label_sqrt_s_r".to_string(), Value::Text(fmt_complex(label.sqrt_s_r()))),
    ];
    for event in &events {
        let tag = |field: &str| format!("event_{}_{field}", event.index);
        match transform_gamow(&label, &event.transform, event.x)
            .map_err(|e| CliError::Numeric(e.to_string()))?
        {
            PoincareOutcome::Transformed(state) => {
                entries.push((tag("status"), Value::Text("TRANSFORMED".into())));
                entries.push((tag("phase_re"), Value::Num(state.phase.re)));
                entries.push((tag("phase_im"), Value::Num(state.phase.im)));
                entries.push((tag("abs_phase"), Value::Num(state.phase.norm())));
                let components: Vec<String> =
                    state.components.iter().map(|&z| fmt_complex(z)).collect();
                entries.push((tag("components"), Value::Text(components.join(";"))));
                let p = state.new_p_hat;
                entries.push((
                    tag("new_p_hat"),
                    Value::Text(format!("{};{};{};{}", p.t, p.x[0], p.x[1], p.x[2])),
                ));
            }
            PoincareOutcome::Rejected(rejection) => {
                entries.push((
                    tag("status"),
                    Value::Text(format!("REJECTED: outside forward cone ({rejection})")),
                ));
            }
        }
    }
    Ok(Body::Report { entries })
}
