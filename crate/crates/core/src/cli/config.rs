//! Run configuration: TOML file or built-in preset, then `key=value`
//! overrides applied on the TOML tree, then typed validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optimizer::OptimizerConfig;
use crate::problems::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RestartConfig {
    /// Extra refinement stages after the first run.
    pub stages: usize,
    /// Half-width of the refined box as a fraction of the original half-width.
    pub shrink: f64,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self { stages: 0, shrink: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotConfig {
    /// Points per objective curve.
    pub objective_samples: usize,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self { objective_samples: 1001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub restart: RestartConfig,
    #[serde(default)]
    pub plot: PlotConfig,
}

pub const PRESETS: &[(&str, &str)] = &[
    ("fractal", include_str!("../../presets/fractal.toml")),
    ("fractal-mm", include_str!("../../presets/fractal-mm.toml")),
    ("f4", include_str!("../../presets/f4.toml")),
    ("f1", include_str!("../../presets/f1.toml")),
    ("circles2", include_str!("../../presets/circles2.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{origin}: {e}")))
}

/// `a.b.c=value`; the value is read as a TOML literal, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let (last, path) = parts.split_last().expect("non-empty");
    let mut node = table;
    for p in path {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override `{key}`: `{p}` is not a section"))),
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

pub fn resolve_table(mut table: toml::Table, overrides: &[String]) -> Result<RunConfig> {
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads `path`, or the built-in preset of that name when no such file exists.
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let (text, origin) = if path.exists() {
        (std::fs::read_to_string(path)?, path.display().to_string())
    } else if let Some(text) = path.to_str().and_then(preset) {
        (text.to_string(), format!("preset {}", path.display()))
    } else {
        return Err(Error::Config(format!("no config file or preset named {}", path.display())));
    };
    resolve_table(parse_table(&text, &origin)?, overrides)
}

/// Config from TOML text.
pub fn parse(text: &str, overrides: &[String]) -> Result<RunConfig> {
    resolve_table(parse_table(text, "config")?, overrides)
}

pub fn load_preset(name: &str, overrides: &[String]) -> Result<RunConfig> {
    let text = preset(name).ok_or_else(|| Error::Config(format!("unknown preset {name}")))?;
    resolve_table(parse_table(text, name)?, overrides)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.build()?;
        self.optimizer.validate()?;
        if !(self.restart.shrink > 0.0 && self.restart.shrink <= 1.0) {
            return Err(Error::Config("restart.shrink must lie in (0,1]".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("seed is required (config `seed` or --seed)".into()))
    }

    /// Canonical TOML of everything that affects results (`out` excluded).
    pub fn canonical_toml(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        toml::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
