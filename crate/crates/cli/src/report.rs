//! `qbayes report`: one table over every run summary in a directory.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::CliError;
use crate::output::fmt_float;

const SUFFIX: &str = ".summary.json";

fn num(v: &Value, key: &str) -> Option<f64> {
    v.get("results")?.get(key)?.as_f64()
}

fn cell(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

/// Scalar results other than the rate columns, as `key=value`.
fn other_results(v: &Value) -> String {
    let Some(Value::Object(map)) = v.get("results") else {
        return String::new();
    };
    map.iter()
        .filter(|(k, _)| !matches!(k.as_str(), "alpha_hat" | "spectral_rate" | "ratio"))
        .filter_map(|(k, x)| match x {
            Value::Number(n) if n.is_f64() => Some(format!("{k}={}", fmt_float(n.as_f64().expect("f64")))),
            Value::Number(n) => Some(format!("{k}={n}")),
            Value::Bool(b) => Some(format!("{k}={b}")),
            Value::String(s) => Some(format!("{k}={s}")),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Markdown table of all summaries; converge rows show the fitted rate next
/// to the spectral rate of a spectrum run in the same directory when there
/// is one, else their own.
pub fn report(dir: &Path) -> Result<String, CliError> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(SUFFIX))
        .collect();
    if names.is_empty() {
        return Err(CliError::EmptyRunDir(dir.display().to_string()));
    }
    names.sort();
    let runs: Vec<(String, Value)> = names
        .into_iter()
        .map(|n| {
            let v: Value = serde_json::from_str(&fs::read_to_string(dir.join(&n))?)?;
            Ok((n.trim_end_matches(SUFFIX).to_string(), v))
        })
        .collect::<Result<_, CliError>>()?;
    let spectral = runs.iter().find(|(_, v)| v["command"] == "spectrum").and_then(|(_, v)| num(v, "spectral_rate"));

    let mut out = String::from("| run | command | seed | alpha_hat | spectral_rate | ratio | results |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for (name, v) in &runs {
        let command = v["command"].as_str().unwrap_or("");
        let seed = v["seed"].as_u64().map(|s| s.to_string()).unwrap_or_default();
        let alpha = num(v, "alpha_hat");
        let rate = match command {
            "converge" => spectral.or_else(|| num(v, "spectral_rate")),
            _ => num(v, "spectral_rate"),
        };
        let ratio = match (command, alpha, rate) {
            ("converge", Some(a), Some(r)) => Some(a / r),
            _ => None,
        };
        out.push_str(&format!(
            "| {name} | {command} | {seed} | {} | {} | {} | {} |\n",
            cell(alpha),
            cell(rate),
            cell(ratio),
            other_results(v)
        ));
    }
    fs::write(dir.join("report.md"), &out)?;
    Ok(out)
}
