use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::ddpg::DdpgConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::evo::EvoConfig;
use crate::orchestrator::EdrlConfig;

/// Environment variables of the form `EDRL__SECTION__KEY=<json>` override
/// the matching (lower-cased) config path before validation.
pub const ENV_PREFIX: &str = "EDRL__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    #[serde(rename = "edrl")]
    Edrl,
    #[serde(rename = "drl", alias = "drl-baseline")]
    Drl,
    #[serde(rename = "eval-only")]
    EvalOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Edrl => "edrl",
            Mode::Drl => "drl",
            Mode::EvalOnly => "eval-only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edrl" => Ok(Mode::Edrl),
            "drl" | "drl-baseline" => Ok(Mode::Drl),
            "eval-only" | "eval" => Ok(Mode::EvalOnly),
            other => Err(Error::config("mode", format!("unknown mode `{other}` (expected edrl, drl or eval-only)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub evo: EvoConfig,
    pub ddpg: DdpgConfig,
    /// Training loop settings, including the master seed.
    pub edrl: EdrlConfig,
    pub mode: Mode,
    pub output_dir: PathBuf,
    /// Agent or network checkpoint evaluated in eval-only mode.
    pub checkpoint: Option<PathBuf>,
    pub eval_episodes: usize,
    /// Maximum number of points per exported CDF.
    pub cdf_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            evo: EvoConfig::default(),
            ddpg: DdpgConfig::default(),
            edrl: EdrlConfig::default(),
            mode: Mode::Edrl,
            output_dir: PathBuf::from("runs/latest"),
            checkpoint: None,
            eval_episodes: 10,
            cdf_points: 100,
        }
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.edrl.seed
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.evo.validate()?;
        self.ddpg.validate()?;
        self.edrl.validate()?;
        if self.mode == Mode::EvalOnly && self.checkpoint.is_none() {
            return Err(Error::config("checkpoint", "eval-only mode needs a checkpoint path"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes", "must be at least 1"));
        }
        if self.cdf_points == 0 {
            return Err(Error::config("cdf_points", "must be at least 1"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::config("output_dir", "must not be empty"));
        }
        Ok(())
    }

    /// Parses and validates a JSON document; omitted fields take defaults.
    pub fn from_json_value(value: Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_json_value(serde_json::from_str(&text)?)
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(cfg)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Applies `EDRL__A__B=<json>` style overrides to a config document. Values
/// that do not parse as JSON are taken as strings. Variables without the
/// prefix are ignored.
pub fn apply_overrides<I, K, V>(root: &mut Value, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut overrides: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            k.as_ref()
                .strip_prefix(ENV_PREFIX)
                .map(|rest| (rest.to_ascii_lowercase(), v.as_ref().to_string()))
        })
        .collect();
    // environment iteration order is unspecified
    overrides.sort();
    for (path, raw) in overrides {
        let keys: Vec<&str> = path.split("__").collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(Error::config(path.clone(), "malformed override path"));
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        let mut node = &mut *root;
        for key in &keys[..keys.len() - 1] {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::config(path.replace("__", "."), "cannot override inside a non-object value"))?;
            node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
        }
        node.as_object_mut()
            .ok_or_else(|| Error::config(path.replace("__", "."), "cannot override inside a non-object value"))?
            .insert(keys[keys.len() - 1].to_string(), value);
    }
    Ok(())
}

/// Loads `path` (or an empty document), applies environment overrides and
/// validates.
pub fn resolve_config<I, K, V>(path: Option<&Path>, vars: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut doc = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => Value::Object(Map::new()),
    };
    apply_overrides(&mut doc, vars)?;
    RunConfig::from_json_value(doc)
}
