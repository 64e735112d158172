//! Flag parsing and bulk-argument merging.
//!
//! Every value flag is collected as an optional string, filled from
//! `--json-args` when absent, then parsed here so a bad value produces the
//! same diagnostic either way. Precedence: command line, then json file,
//! then built-in default.

use std::sync::Arc;

use serde_json::Value;
use sol_lab::witness::ProbeBox;
use sol_lab::{CosetPoint, Precision, SearchWindow, SemidirectLattice, Sl2z, SolPoint};

pub type ArgResult<T> = Result<T, String>;

/// Argument values loaded from a `--json-args` file. Keys use the long flag
/// name with dashes replaced by underscores.
pub struct JsonArgs(serde_json::Map<String, Value>);

impl JsonArgs {
    pub fn load(path: Option<&str>, allowed: &[&str]) -> ArgResult<Self> {
        let Some(path) = path else {
            return Ok(JsonArgs(serde_json::Map::new()));
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {path}: {e}"))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))?;
        let Value::Object(map) = value else {
            return Err(format!("{path}: expected a JSON object of argument values"));
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(format!(
                    "{path}: unknown argument {key:?} (accepted here: {})",
                    allowed.join(", ")
                ));
            }
        }
        Ok(JsonArgs(map))
    }

    /// String form of a stored value; scalars and flat arrays are rendered
    /// in the same comma syntax the flags use.
    fn lookup(&self, key: &str) -> Option<String> {
        self.0.get(key).map(|v| match v {
            Value::String(s) => s.clone(),
            Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        })
    }

    pub fn flag_true(&self, key: &str) -> bool {
        matches!(self.0.get(key), Some(Value::Bool(true)))
    }
}

/// Flag value if given, otherwise the json-args value.
pub fn pick(flag: &Option<String>, json: &JsonArgs, key: &str) -> Option<String> {
    flag.clone().or_else(|| json.lookup(key))
}

pub fn need(flag: &Option<String>, json: &JsonArgs, key: &str) -> ArgResult<String> {
    pick(flag, json, key)
        .ok_or_else(|| format!("missing --{} (or {key:?} in --json-args)", key.replace('_', "-")))
}

fn split_fixed(name: &str, raw: &str, n: usize) -> ArgResult<Vec<String>> {
    let parts: Vec<String> = raw.split(',').map(|p| p.trim().to_string()).collect();
    if parts.len() != n {
        return Err(format!(
            "--{name} expects {n} comma-separated values, got {} in {raw:?}",
            parts.len()
        ));
    }
    Ok(parts)
}

pub fn parse_i64(name: &str, s: &str) -> ArgResult<i64> {
    s.trim()
        .parse::<i64>()
        .map_err(|_| format!("--{name}: expected an integer, got {s:?}"))
}

pub fn parse_usize(name: &str, s: &str) -> ArgResult<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| format!("--{name}: expected a nonnegative integer, got {s:?}"))
}

pub fn parse_f64(name: &str, s: &str) -> ArgResult<f64> {
    let v = s
        .trim()
        .parse::<f64>()
        .map_err(|_| format!("--{name}: expected a number, got {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("--{name}: value must be finite, got {s:?}"));
    }
    Ok(v)
}

pub fn parse_matrix(raw: &str) -> ArgResult<Sl2z> {
    let parts = split_fixed("matrix", raw, 4)?;
    let mut e = [0i64; 4];
    for (slot, part) in e.iter_mut().zip(&parts) {
        *slot = parse_i64("matrix", part)?;
    }
    Sl2z::new(e[0], e[1], e[2], e[3]).map_err(|e| e.to_string())
}

pub fn parse_point(name: &str, raw: &str) -> ArgResult<SolPoint> {
    let parts = split_fixed(name, raw, 3)?;
    Ok(SolPoint::new(
        parse_f64(name, &parts[0])?,
        parse_f64(name, &parts[1])?,
        parse_f64(name, &parts[2])?,
    ))
}

pub fn parse_window(raw: &str, tgrid: usize) -> ArgResult<SearchWindow> {
    let parts = split_fixed("window", raw, 3)?;
    SearchWindow::new(
        parse_i64("window", &parts[0])?,
        parse_i64("window", &parts[1])?,
        parse_i64("window", &parts[2])?,
        tgrid,
    )
    .map_err(|e| e.to_string())
}

pub fn parse_box(raw: &str) -> ArgResult<ProbeBox> {
    let parts = split_fixed("box", raw, 6)?;
    let mut v = [0f64; 6];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = parse_f64("box", part)?;
    }
    ProbeBox::new(v[0], v[1], v[2], v[3], v[4], v[5]).map_err(|e| e.to_string())
}

pub fn parse_r_sequence(raw: &str) -> ArgResult<Vec<i64>> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(format!("--r-sequence: expected comma-separated integers, got {raw:?}"));
    }
    parts
        .iter()
        .map(|p| parse_i64("r-sequence", p))
        .collect()
}

/// Precision mode. `SOL_LAB_PRECISION`, when set and nonempty, overrides
/// both the flag and any json-args value.
pub fn resolve_precision(choice: Option<String>) -> ArgResult<Precision> {
    if let Ok(env) = std::env::var("SOL_LAB_PRECISION") {
        if !env.is_empty() {
            return env
                .parse()
                .map_err(|e| format!("SOL_LAB_PRECISION: {e}"));
        }
    }
    match choice {
        Some(v) => v.parse().map_err(|e| format!("--precision: {e}")),
        None => Ok(Precision::Double),
    }
}

/// Reads a JSON array of x,y,z triples.
pub fn read_points(path: &str) -> ArgResult<Vec<SolPoint>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("{path}: {e}"))
}

pub fn read_cosets(path: &str, lat: &Arc<SemidirectLattice>) -> ArgResult<Vec<CosetPoint>> {
    Ok(read_points(path)?
        .into_iter()
        .map(|p| CosetPoint::from_float(lat.clone(), p))
        .collect())
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum OutFormat {
    Json,
    Csv,
}

pub fn resolve_format(choice: Option<String>) -> ArgResult<OutFormat> {
    match choice.as_deref() {
        None | Some("json") => Ok(OutFormat::Json),
        Some("csv") => Ok(OutFormat::Csv),
        Some(other) => Err(format!("--format: expected json or csv, got {other:?}")),
    }
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(usize::from).unwrap_or(1)
}
