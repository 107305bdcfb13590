//! JSON config loading.
//!
//! A config is checked in two passes so that every problem is reported at
//! once: a shape pass over the raw JSON (missing, unknown and mistyped
//! fields), then the library's semantic checks on the parsed value.
//! Command-line overrides are merged into the raw JSON first, so a flag can
//! also supply a field the file leaves out.

use std::fs;
use std::path::Path;

use depthrisk_core::experiments::{ConvergenceConfig, ExperimentConfig};
use depthrisk_core::sampling::Gumbel;
use depthrisk_core::FrankGumbelConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Frank–Gumbel parameters plus the seed of the draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub theta: f64,
    pub marginals: [Gumbel; 2],
    pub noise_var: f64,
    pub seed: u64,
}

impl SamplingConfig {
    pub fn frank_gumbel(&self) -> FrankGumbelConfig {
        FrankGumbelConfig {
            theta: self.theta,
            marginals: self.marginals,
            noise_var: self.noise_var,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Number,
    Integer,
    Numbers,
    Integers,
    Matrix,
    Marginals,
    /// Tagged data block.
    Data,
    /// The tag of a data block.
    Tag,
}

struct Field {
    name: &'static str,
    kind: Kind,
    required: bool,
}

const fn req(name: &'static str, kind: Kind) -> Field {
    Field {
        name,
        kind,
        required: true,
    }
}

const fn opt(name: &'static str, kind: Kind) -> Field {
    Field {
        name,
        kind,
        required: false,
    }
}

const SAMPLING: &[Field] = &[
    req("theta", Kind::Number),
    req("marginals", Kind::Marginals),
    req("noise_var", Kind::Number),
    req("seed", Kind::Integer),
];

const FRANK_GUMBEL: &[Field] = &[
    req("kind", Kind::Tag),
    req("theta", Kind::Number),
    req("marginals", Kind::Marginals),
    req("noise_var", Kind::Number),
];

const GAUSSIAN: &[Field] = &[
    req("kind", Kind::Tag),
    req("mu", Kind::Numbers),
    req("sigma", Kind::Matrix),
    req("noise_var", Kind::Number),
];

const EXPERIMENT: &[Field] = &[
    req("data", Kind::Data),
    req("n_values", Kind::Integers),
    req("alpha_values", Kind::Numbers),
    req("replications", Kind::Integer),
    req("delta_values", Kind::Numbers),
    req("truth_n_mc", Kind::Integer),
    req("master_seed", Kind::Integer),
];

const CONVERGENCE: &[Field] = &[
    req("data", Kind::Data),
    req("n_values", Kind::Integers),
    req("seeds", Kind::Integer),
    req("alpha", Kind::Number),
    req("master_seed", Kind::Integer),
    opt("boundary_points", Kind::Integer),
    opt("sym_diff_n_mc", Kind::Integer),
    opt("population_n_mc", Kind::Integer),
];

fn is_number(v: &Value) -> bool {
    v.is_number()
}

fn is_integer(v: &Value) -> bool {
    v.as_u64().is_some()
}

fn all(v: &Value, f: fn(&Value) -> bool) -> bool {
    v.as_array().is_some_and(|a| a.iter().all(f))
}

fn check_object(value: &Value, prefix: &str, fields: &[Field], out: &mut Vec<String>) {
    let Some(obj) = value.as_object() else {
        out.push(format!("{}: expected an object", prefix.trim_end_matches('.')));
        return;
    };
    for key in obj.keys() {
        if !fields.iter().any(|f| f.name == key) {
            out.push(format!("{prefix}{key}: unknown field"));
        }
    }
    for f in fields {
        match obj.get(f.name) {
            None if f.required => out.push(format!("{prefix}{}: missing", f.name)),
            None => {}
            Some(v) => check_field(v, &format!("{prefix}{}", f.name), f.kind, out),
        }
    }
}

fn check_field(v: &Value, path: &str, kind: Kind, out: &mut Vec<String>) {
    let ok = match kind {
        Kind::Number => is_number(v),
        Kind::Integer => is_integer(v),
        Kind::Numbers => all(v, is_number),
        Kind::Integers => all(v, is_integer),
        Kind::Matrix => v.as_array().is_some_and(|rows| rows.iter().all(|r| all(r, is_number))),
        Kind::Marginals => {
            let Some(items) = v.as_array() else {
                out.push(format!("{path}: expected a list of two {{\"mu\", \"beta\"}} objects"));
                return;
            };
            if items.len() != 2 {
                out.push(format!("{path}: expected 2 marginals, found {}", items.len()));
            }
            let fields = [req("mu", Kind::Number), req("beta", Kind::Number)];
            for (i, m) in items.iter().enumerate() {
                check_object(m, &format!("{path}[{i}]."), &fields, out);
            }
            return;
        }
        // Checked with the block that carries it.
        Kind::Tag => true,
        Kind::Data => {
            let prefix = format!("{path}.");
            match v.get("kind").and_then(Value::as_str) {
                Some("gaussian") => check_object(v, &prefix, GAUSSIAN, out),
                Some("frank_gumbel") => check_object(v, &prefix, FRANK_GUMBEL, out),
                Some(other) => out.push(format!(
                    "{prefix}kind: unknown kind {other:?}, expected \"frank_gumbel\" or \"gaussian\""
                )),
                None if v.is_object() => {
                    out.push(format!("{prefix}kind: missing"));
                }
                None => out.push(format!("{path}: expected an object")),
            }
            return;
        }
    };
    if !ok {
        let expected = match kind {
            Kind::Number => "a number",
            Kind::Integer => "a nonnegative integer",
            Kind::Numbers => "a list of numbers",
            Kind::Integers => "a list of nonnegative integers",
            _ => "a list of number lists",
        };
        out.push(format!("{path}: expected {expected}"));
    }
}

/// Sets `key` on a JSON object, creating the field when absent.
pub fn set_override(value: &mut Value, key: &str, v: impl Into<Value>) {
    if let Some(obj) = value.as_object_mut() {
        obj.insert(key.to_string(), v.into());
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

fn parse<T: DeserializeOwned>(
    value: Value,
    what: &str,
    fields: &[Field],
    semantic: impl FnOnce(&T) -> Vec<String>,
) -> Result<T> {
    let mut problems = Vec::new();
    check_object(&value, "", fields, &mut problems);
    if problems.is_empty() {
        match serde_json::from_value::<T>(value) {
            Ok(cfg) => {
                problems = semantic(&cfg);
                if problems.is_empty() {
                    return Ok(cfg);
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    Err(Error::Config {
        what: what.to_string(),
        problems,
    })
}

pub fn experiment_from_value(value: Value) -> Result<ExperimentConfig> {
    parse(value, "experiment config", EXPERIMENT, ExperimentConfig::problems)
}

pub fn convergence_from_value(value: Value) -> Result<ConvergenceConfig> {
    parse(value, "convergence config", CONVERGENCE, ConvergenceConfig::problems)
}

pub fn sampling_from_value(value: Value) -> Result<SamplingConfig> {
    parse(value, "sampling config", SAMPLING, |c: &SamplingConfig| {
        c.frank_gumbel().problems()
    })
}
