//! Resolved-config sidecars, config hashes and report serialization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use rivwidth_core::numfmt::sig6;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize> {
    command: &'a str,
    tool_version: &'a str,
    config: &'a C,
}

/// Renders the resolved config as TOML and hashes it.
pub fn resolve<C: Serialize>(command: &str, config: &C) -> anyhow::Result<(String, Provenance)> {
    let text = toml::to_string(&Sidecar {
        command,
        tool_version: TOOL_VERSION,
        config,
    })
    .context("serializing the resolved config")?;
    let digest = Sha256::digest(text.as_bytes());
    let mut hash = String::with_capacity(64);
    for b in digest.iter() {
        write!(hash, "{b:02x}").expect("writing to a String cannot fail");
    }
    Ok((
        text,
        Provenance {
            tool_version: TOOL_VERSION.into(),
            config_hash: hash,
        },
    ))
}

/// Sidecar path for an output file (`out.csv` → `out.csv.run_config.toml`) or directory.
pub fn sidecar_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("run_config.toml")
    } else {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".run_config.toml");
        output.with_file_name(name)
    }
}

pub fn write_sidecar(output: &Path, text: &str) -> anyhow::Result<()> {
    let path = sidecar_path(output);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// Rounds every float in `v` to 6 significant digits.
pub fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            sig6(x)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| (k, round_floats(v)))
                .collect::<Map<_, _>>(),
        ),
        other => other,
    }
}

/// Writes a pretty JSON report with floats at 6 significant digits and a trailing newline.
pub fn write_json_report<T: Serialize>(path: &Path, report: &T) -> anyhow::Result<()> {
    let value = round_floats(serde_json::to_value(report).context("serializing report")?);
    let mut text = serde_json::to_string_pretty(&value).context("serializing report")?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
