//! Run configuration: experiment parameters from a `key=value` file and
//! `--key value` flags, validated against each experiment's parameter table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use conc_lab_core::exact::{format_q, parse_q};
use conc_lab_core::Q;
use num_traits::{ToPrimitive, Zero};

/// Default master seed.
pub const DEFAULT_SEED: u64 = 20_130_601;
pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub message: String,
    pub hint: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)?;
        if !self.hint.is_empty() {
            write!(f, "\n  hint: {}", self.hint)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn err(message: impl Into<String>, hint: impl Into<String>) -> ConfigError {
    ConfigError {
        message: message.into(),
        hint: hint.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(err(
                format!("unknown format {s:?}"),
                "use --format csv or --format json",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Exact rational; accepts `0.25`, `1/4`, `3`.
    Rational,
    Integer,
    Choice(&'static [&'static str]),
    /// Free text (pattern JSON, file paths).
    Text,
}

#[derive(Debug, Clone, Copy)]
pub struct Range {
    pub hint: &'static str,
    pub check: fn(&Q) -> bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: Kind,
    /// `None` makes the parameter required.
    pub default: Option<&'static str>,
    pub help: &'static str,
    pub range: Option<Range>,
    /// Whether a comma-separated list expands into a grid.
    pub list: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParamValue {
    Rational(Q),
    Integer(u64),
    Text(String),
}

impl ParamValue {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ParamValue::Rational(q) => match q.is_integer().then(|| q.numer().to_i64()).flatten() {
                Some(i) => serde_json::json!(i),
                None => serde_json::json!(format_q(q)),
            },
            ParamValue::Integer(i) => serde_json::json!(i),
            ParamValue::Text(s) => serde_json::json!(s),
        }
    }
}

/// One point of the expanded parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    values: BTreeMap<&'static str, ParamValue>,
}

impl Point {
    pub fn q(&self, name: &str) -> Q {
        match self.values.get(name) {
            Some(ParamValue::Rational(q)) => q.clone(),
            Some(ParamValue::Integer(i)) => Q::from_integer((*i).into()),
            other => panic!("parameter {name} is not rational: {other:?}"),
        }
    }

    pub fn f(&self, name: &str) -> f64 {
        conc_lab_core::exact::to_f64(&self.q(name))
    }

    pub fn int(&self, name: &str) -> u64 {
        match self.values.get(name) {
            Some(ParamValue::Integer(i)) => *i,
            other => panic!("parameter {name} is not an integer: {other:?}"),
        }
    }

    pub fn text(&self, name: &str) -> &str {
        match self.values.get(name) {
            Some(ParamValue::Text(s)) => s,
            other => panic!("parameter {name} is not text: {other:?}"),
        }
    }

    pub fn to_json(&self) -> serde_json::Map<String, serde_json::Value> {
        self.values
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_json()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub params: BTreeMap<&'static str, Vec<ParamValue>>,
    pub seed: u64,
    pub trials: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub jobs: Option<usize>,
    pub budget: Option<String>,
    pub timing: bool,
}

impl RunConfig {
    /// Cartesian product of list-valued parameters, in parameter-table order.
    pub fn grid(&self) -> Vec<Point> {
        let mut points = vec![BTreeMap::new()];
        for (name, values) in &self.params {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for p in &points {
                for v in values {
                    let mut q = p.clone();
                    q.insert(*name, v.clone());
                    next.push(q);
                }
            }
            points = next;
        }
        points.into_iter().map(|values| Point { values }).collect()
    }
}

const COMMON_KEYS: &[&str] = &[
    "seed", "trials", "output", "format", "jobs", "budget", "timing",
];

fn parse_value(spec: &ParamSpec, raw: &str) -> Result<ParamValue, ConfigError> {
    let raw = raw.trim();
    let v = match spec.kind {
        Kind::Rational => ParamValue::Rational(parse_q(raw).map_err(|_| {
            err(
                format!("parameter {} expects a number, got {raw:?}", spec.name),
                "numbers may be decimals (0.25) or fractions (1/4)",
            )
        })?),
        Kind::Integer => ParamValue::Integer(raw.parse().map_err(|_| {
            err(
                format!(
                    "parameter {} expects a nonnegative integer, got {raw:?}",
                    spec.name
                ),
                spec.help,
            )
        })?),
        Kind::Choice(opts) => {
            if !opts.contains(&raw) {
                return Err(err(
                    format!(
                        "parameter {} must be one of {}, got {raw:?}",
                        spec.name,
                        opts.join(", ")
                    ),
                    spec.help,
                ));
            }
            ParamValue::Text(raw.to_string())
        }
        Kind::Text => ParamValue::Text(raw.to_string()),
    };
    if let Some(range) = spec.range {
        let q = match &v {
            ParamValue::Rational(q) => Some(q.clone()),
            ParamValue::Integer(i) => Some(Q::from_integer((*i).into())),
            ParamValue::Text(_) => None,
        };
        if let Some(q) = q {
            if !(range.check)(&q) {
                return Err(err(
                    format!(
                        "parameter {} = {raw} is out of range: {}",
                        spec.name, range.hint
                    ),
                    spec.help,
                ));
            }
        }
    }
    Ok(v)
}

fn parse_list(spec: &ParamSpec, raw: &str) -> Result<Vec<ParamValue>, ConfigError> {
    let parts: Vec<&str> = if spec.list && !matches!(spec.kind, Kind::Text) {
        raw.split(',').filter(|s| !s.trim().is_empty()).collect()
    } else {
        vec![raw]
    };
    if parts.is_empty() {
        return Err(err(
            format!("parameter {} has an empty value", spec.name),
            spec.help,
        ));
    }
    let mut out: Vec<ParamValue> = parts
        .iter()
        .map(|p| parse_value(spec, p))
        .collect::<Result<_, _>>()?;
    out.dedup();
    Ok(out)
}

/// Reads `key=value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        err(
            format!("cannot read config file {}: {e}", path.display()),
            "",
        )
    })?;
    parse_config_text(&text).map_err(|mut e| {
        e.message = format!("{}: {}", path.display(), e.message);
        e
    })
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            err(
                format!("line {}: expected key=value, got {line:?}", i + 1),
                "",
            )
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Raw `--key value` pairs after the experiment id. `--timing` takes no value.
pub fn split_flags(args: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let a = &args[i];
        let key = a.strip_prefix("--").ok_or_else(|| {
            err(
                format!("unexpected argument {a:?}"),
                "parameters are passed as --name value",
            )
        })?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            i += 1;
            continue;
        }
        if key == "timing" {
            out.push((key.to_string(), "true".into()));
            i += 1;
            continue;
        }
        let v = args.get(i + 1).ok_or_else(|| {
            err(
                format!("flag --{key} needs a value"),
                "parameters are passed as --name value",
            )
        })?;
        out.push((key.to_string(), v.clone()));
        i += 2;
    }
    Ok(out)
}

fn normalize_key(k: &str) -> String {
    k.replace('-', "_")
}

/// Builds a [`RunConfig`]: file entries first, then flags (later wins).
pub fn parse_config(
    command: &str,
    specs: &[ParamSpec],
    file: &[(String, String)],
    flags: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in file.iter().chain(flags) {
        raw.insert(normalize_key(k), v.clone());
    }
    let known: Vec<&str> = specs.iter().map(|s| s.name).collect();
    for k in raw.keys() {
        if k == "config" {
            continue;
        }
        if !COMMON_KEYS.contains(&k.as_str()) && !known.contains(&k.as_str()) {
            return Err(err(
                format!("unknown parameter {k:?} for experiment {command}"),
                format!("known parameters: {}", known.join(", ")),
            ));
        }
    }
    let take_u64 = |key: &str, default: u64| -> Result<u64, ConfigError> {
        match raw.get(key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|_| {
                err(
                    format!("--{key} expects a nonnegative integer, got {v:?}"),
                    "",
                )
            }),
        }
    };
    let seed = take_u64("seed", DEFAULT_SEED)?;
    let trials = take_u64("trials", DEFAULT_TRIALS)?;
    if trials == 0 {
        return Err(err("--trials must be positive", ""));
    }
    let jobs = match raw.get("jobs") {
        None => None,
        Some(_) => Some(take_u64("jobs", 0)? as usize).filter(|&j| j > 0),
    };
    let format = raw
        .get("format")
        .map(|s| Format::parse(s.trim()))
        .transpose()?
        .unwrap_or(Format::Csv);
    let timing = match raw.get("timing").map(|s| s.trim()) {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") => true,
        Some(other) => {
            return Err(err(
                format!("timing expects true or false, got {other:?}"),
                "",
            ))
        }
    };
    let mut params = BTreeMap::new();
    for spec in specs {
        let value = match (raw.get(spec.name), spec.default) {
            (Some(v), _) => v.as_str(),
            (None, Some(d)) => d,
            (None, None) => {
                return Err(err(
                    format!(
                        "missing required parameter --{} for experiment {command}",
                        spec.name
                    ),
                    spec.help,
                ))
            }
        };
        params.insert(spec.name, parse_list(spec, value)?);
    }
    Ok(RunConfig {
        command: command.to_string(),
        params,
        seed,
        trials,
        output: raw.get("output").map(PathBuf::from),
        format,
        jobs,
        budget: raw.get("budget").cloned(),
        timing,
    })
}

pub fn in_unit(q: &Q) -> bool {
    !q.is_zero() && *q > Q::zero() && *q <= Q::from_integer(1.into())
}
