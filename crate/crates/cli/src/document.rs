//! Configuration documents: `[[experiment]]` tables merged over scenario defaults.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};
use relclock::experiments::{Diagnostic, ExperimentConfig, Scenario};
use toml::{Table, Value};

/// Experiments resolved from a document, or the problems that prevented it.
pub struct Loaded {
    pub experiments: Vec<ExperimentConfig>,
    pub diagnostics: Vec<Diagnostic>,
}

fn diag(path: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic { path: path.into(), message: message.into() }
}

/// Overlays `over` onto `base`. Tables merge key by key, except tagged tables (with a `kind`
/// key), which replace the default whole so fields of another variant do not leak in.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) if !o.contains_key("kind") => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn resolve(index: usize, table: Table) -> std::result::Result<ExperimentConfig, Diagnostic> {
    let at = |field: &str| format!("experiment[{index}].{field}");
    let scenario_name = table
        .get("scenario")
        .ok_or_else(|| diag(at("scenario"), "missing scenario"))?
        .as_str()
        .ok_or_else(|| diag(at("scenario"), "scenario must be a string"))?;
    let scenario = Scenario::from_name(scenario_name).ok_or_else(|| {
        let known: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
        diag(at("scenario"), format!("unknown scenario `{scenario_name}` (known: {})", known.join(", ")))
    })?;
    let name = match table.get("name") {
        Some(v) => v.as_str().ok_or_else(|| diag(at("name"), "name must be a string"))?.to_string(),
        None => scenario.name().to_string(),
    };
    let defaults = ExperimentConfig::defaults_for(scenario, &name);
    let mut value = Value::try_from(&defaults).expect("defaults serialise");
    merge(&mut value, Value::Table(table));
    value.try_into::<ExperimentConfig>().map_err(|e| diag(format!("experiment[{index}]"), e.message().to_string()))
}

/// Parses document text; `source` labels parse errors.
pub fn parse(text: &str, source: &str) -> Loaded {
    let mut out = Loaded { experiments: Vec::new(), diagnostics: Vec::new() };
    let doc: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            out.diagnostics.push(diag(source, e.to_string()));
            return out;
        }
    };
    for key in doc.keys().filter(|k| k.as_str() != "experiment") {
        out.diagnostics.push(diag(key.as_str(), "unknown top-level key (expected [[experiment]] tables)"));
    }
    let tables = match doc.get("experiment") {
        Some(Value::Array(items)) => items.clone(),
        Some(_) => {
            out.diagnostics.push(diag("experiment", "must be an array of tables ([[experiment]])"));
            return out;
        }
        None => {
            out.diagnostics.push(diag("experiment", "document defines no experiments"));
            return out;
        }
    };
    let mut names = BTreeSet::new();
    for (i, item) in tables.into_iter().enumerate() {
        let Value::Table(table) = item else {
            out.diagnostics.push(diag(format!("experiment[{i}]"), "must be a table"));
            continue;
        };
        match resolve(i, table) {
            Ok(cfg) => {
                if !names.insert(cfg.name.clone()) {
                    out.diagnostics.push(diag(format!("experiment[{i}].name"), format!("duplicate name `{}`", cfg.name)));
                }
                for d in cfg.validate() {
                    out.diagnostics.push(diag(format!("experiment[{i}].{}", d.path), d.message));
                }
                out.experiments.push(cfg);
            }
            Err(d) => out.diagnostics.push(d),
        }
    }
    out
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(parse(&text, &path.display().to_string()))
}
