//! Configuration: a TOML file with one table per experiment, layered over
//! built-in defaults and under `--set key=value` overrides.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//!
//! [fig1]
//! dims = [1, 5, 10]
//! trials = 10
//!
//! [fig1.kernel]
//! family = "rbf"
//! ```

use std::fmt;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::{DeserializeOwned, IgnoredAny, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

/// Settings shared by every experiment.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSettings {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

/// A parsed configuration file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub global: GlobalSettings,
    table: toml::Table,
    text: String,
    /// Where the text came from, for diagnostics.
    origin: String,
}

pub const SECTIONS: [&str; 6] = ["fig1", "error-function", "rate-check", "restarts", "subgradient", "bound-tables"];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut global = toml::Table::new();
        for (k, v) in &table {
            if SECTIONS.contains(&k.as_str()) {
                if !v.is_table() {
                    return Err(CliError::Config(format!("`{k}` must be a table")));
                }
            } else {
                global.insert(k.clone(), v.clone());
            }
        }
        let global = GlobalSettings::deserialize(toml::Value::Table(global))
            .map_err(|e| CliError::Config(format!("top level: {e}")))?;
        Ok(Self {
            global,
            table,
            text: text.to_string(),
            origin: "config".to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut file = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        file.origin = path.display().to_string();
        Ok(file)
    }

    fn section(&self, name: &str) -> Option<&toml::Table> {
        self.table.get(name).and_then(|v| v.as_table())
    }
}

/// The section `T::SECTION` of a document, deserialized straight from the
/// file text so that type errors keep their line and column.
struct SectionOf<T>(#[allow(dead_code)] Option<T>);

impl<'de, T: ExperimentConfig> Deserialize<'de> for SectionOf<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V<T>(PhantomData<T>);
        impl<'de, T: ExperimentConfig> Visitor<'de> for V<T> {
            type Value = SectionOf<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a table")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = None;
                while let Some(k) = map.next_key::<String>()? {
                    if k == T::SECTION {
                        out = Some(map.next_value::<T>()?);
                    } else {
                        map.next_value::<IgnoredAny>()?;
                    }
                }
                Ok(SectionOf(out))
            }
        }
        d.deserialize_map(V(PhantomData))
    }
}

/// Parses `key=value`; the value is read as a TOML literal and falls back to
/// a plain string.
pub fn parse_set(raw: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{raw}`")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--set has an empty key in `{raw}`")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), parsed))
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set: `{p}` is not a table")))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

/// An experiment configuration with built-in defaults at two scales.
///
/// Implementors carry `#[serde(default)]` so that partial tables parse.
pub trait ExperimentConfig: Serialize + DeserializeOwned + Default + Sized {
    /// Table name in the configuration file.
    const SECTION: &'static str;

    /// Desk-scale defaults.
    fn desk() -> Self;

    /// Defaults for the full-scale grid behind `--full`.
    fn full() -> Self;

    /// Checks invariants that serde cannot express.
    fn validate(&self) -> Result<(), String>;
}

/// Resolves the configuration of one experiment: defaults, then the file's
/// section, then `--set` overrides (keys relative to the section; a leading
/// `<section>.` is accepted).
pub fn resolve<T: ExperimentConfig>(file: Option<&ConfigFile>, full: bool, sets: &[String]) -> Result<T, CliError> {
    let defaults = if full { T::full() } else { T::desk() };
    let mut table = match toml::Value::try_from(&defaults).map_err(|e| CliError::Config(e.to_string()))? {
        toml::Value::Table(t) => t,
        _ => unreachable!("experiment configs serialize to tables"),
    };
    if let Some(file) = file {
        toml::from_str::<SectionOf<T>>(&file.text).map_err(|e| CliError::Config(format!("{}: {e}", file.origin)))?;
        if let Some(sec) = file.section(T::SECTION) {
            merge(&mut table, sec);
        }
    }
    for raw in sets {
        let (mut path, value) = parse_set(raw)?;
        if path.len() > 1 && path[0] == T::SECTION {
            path.remove(0);
        }
        set_path(&mut table, &path, value)?;
    }
    let cfg = T::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Config(format!("[{}]: {e}", T::SECTION)))?;
    cfg.validate().map_err(|m| CliError::Config(format!("[{}]: {m}", T::SECTION)))?;
    Ok(cfg)
}
