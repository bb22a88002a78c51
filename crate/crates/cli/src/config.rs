//! JSON run configuration.
//!
//! The file is a flat object whose keys are the fields of [`SimConfig`]. Every
//! problem is collected before reporting: unknown keys (with the closest known
//! key as a suggestion), per-field type errors and range violations.

use std::path::Path;

use bpsm::SimConfig;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Bootstrap replicates for `analyze`; the `bootstrap` key when present,
    /// otherwise [`DEFAULT_ANALYZE_BOOTSTRAP`].
    pub analyze_bootstrap: usize,
}

pub const DEFAULT_ANALYZE_BOOTSTRAP: usize = 500;

pub fn known_keys() -> Vec<String> {
    match serde_json::to_value(SimConfig::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => unreachable!("SimConfig serializes to an object"),
    }
}

fn nearest<'a>(key: &str, known: &'a [String]) -> &'a str {
    known
        .iter()
        .min_by_key(|k| strsim::levenshtein(key, k))
        .map(String::as_str)
        .unwrap_or("")
}

/// 1-based line on which `"key"` first appears, if it does.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map(|pos| text[..pos].matches('\n').count() + 1)
}

fn at(path: &str, text: &str, key: &str) -> String {
    match line_of(text, key) {
        Some(l) => format!("{path}:{l}"),
        None => path.to_string(),
    }
}

/// Parse and validate configuration text. `path` is only used in messages.
pub fn parse(text: &str, path: &str) -> Result<RunConfig, Vec<String>> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        vec![format!(
            "{path}:{}:{}: invalid JSON: {e}",
            e.line(),
            e.column()
        )]
    })?;
    let Value::Object(obj) = value else {
        return Err(vec![format!("{path}: top level must be a JSON object")]);
    };

    let known = known_keys();
    let mut errors = Vec::new();
    for (key, val) in &obj {
        if !known.iter().any(|k| k == key) {
            errors.push(format!(
                "{}: unknown key `{key}`; did you mean `{}`?",
                at(path, text, key),
                nearest(key, &known)
            ));
            continue;
        }
        let mut single = Map::new();
        single.insert(key.clone(), val.clone());
        if let Err(e) = serde_json::from_value::<SimConfig>(Value::Object(single)) {
            errors.push(format!("{}: {key}: {e}", at(path, text, key)));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let sim: SimConfig = serde_json::from_value(Value::Object(obj.clone()))
        .map_err(|e| vec![format!("{path}: {e}")])?;
    let violations: Vec<String> = sim
        .violations()
        .into_iter()
        .map(|v| {
            let field = v.split(':').next().unwrap_or_default();
            format!("{}: {v}", at(path, text, field))
        })
        .collect();
    if !violations.is_empty() {
        return Err(violations);
    }
    let analyze_bootstrap = if obj.contains_key("bootstrap") {
        sim.bootstrap
    } else {
        DEFAULT_ANALYZE_BOOTSTRAP
    };
    Ok(RunConfig {
        sim,
        analyze_bootstrap,
    })
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{shown}: cannot read config: {e}")))?;
    parse(&text, &shown).map_err(|v| CliError::Input(v.join("\n")))
}

/// Defaults used when no config file is given.
pub fn defaults() -> RunConfig {
    RunConfig {
        sim: SimConfig::default(),
        analyze_bootstrap: DEFAULT_ANALYZE_BOOTSTRAP,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = parse("{}", "c.json").unwrap();
        assert_eq!(cfg.sim, SimConfig::default());
        assert_eq!(cfg.analyze_bootstrap, DEFAULT_ANALYZE_BOOTSTRAP);
    }

    #[test]
    fn unknown_key_suggests_nearest() {
        let err = parse("{\n  \"replicatons\": 5\n}", "c.json").unwrap_err();
        assert_eq!(err.len(), 1);
        assert!(err[0].contains("c.json:2"), "{}", err[0]);
        assert!(err[0].contains("did you mean `replications`"), "{}", err[0]);
    }

    #[test]
    fn all_violations_are_reported() {
        let text =
            r#"{"caliper_sd": -1, "with_replacement": false, "draws": 1, "sed": 3, "n": "x"}"#;
        let err = parse(text, "c.json").unwrap_err();
        // Unknown and type errors come first; range checks need a typed config.
        assert_eq!(err.len(), 2, "{err:?}");
        let text = r#"{"caliper_sd": -1, "with_replacement": false, "draws": 1}"#;
        let err = parse(text, "c.json").unwrap_err();
        assert_eq!(err.len(), 2, "{err:?}");
        assert!(err.iter().any(|e| e.contains("caliper_sd")));
        assert!(err.iter().any(|e| e.contains("draws")));
    }

    #[test]
    fn type_errors_name_the_field() {
        let err = parse("{\"rho\": \"high\"}", "c.json").unwrap_err();
        assert!(err[0].contains("rho"), "{}", err[0]);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("{\n\"n\": 5,\n}", "c.json").unwrap_err();
        assert!(err[0].starts_with("c.json:3:"), "{}", err[0]);
    }

    #[test]
    fn explicit_bootstrap_is_respected() {
        let cfg = parse("{\"bootstrap\": 0}", "c.json").unwrap();
        assert_eq!(cfg.analyze_bootstrap, 0);
    }
}
