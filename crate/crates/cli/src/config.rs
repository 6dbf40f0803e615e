use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use softdice::baselines::{BcConfig, ValueDiceConfig};
use softdice::softdice::SoftDiceConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Softdice,
    Valuedice,
    Bc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EnvName {
    PointMass,
    Pendulum,
}

/// Experiment file as written by hand. `params` holds the algorithm block and
/// is checked against the chosen algorithm's schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub env: EnvName,
    pub demos: PathBuf,
    /// Trajectories subsampled from the demo file per seed; all when absent.
    #[serde(default)]
    pub n_traj: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

/// Algorithm block with every default materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "params", rename_all = "snake_case")]
pub enum AlgoParams {
    Softdice(SoftDiceConfig),
    Valuedice(ValueDiceConfig),
    Bc(BcConfig),
}

impl AlgoParams {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgoParams::Softdice(_) => Algorithm::Softdice,
            AlgoParams::Valuedice(_) => Algorithm::Valuedice,
            AlgoParams::Bc(_) => Algorithm::Bc,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            AlgoParams::Softdice(c) => c.seed = seed,
            AlgoParams::Valuedice(c) => c.seed = seed,
            AlgoParams::Bc(c) => c.seed = seed,
        }
        out
    }

    pub fn eval_episodes(&self) -> usize {
        match self {
            AlgoParams::Softdice(c) => c.eval_episodes,
            AlgoParams::Valuedice(c) => c.eval_episodes,
            AlgoParams::Bc(c) => c.eval_episodes,
        }
    }

    pub fn iterations(&self) -> u64 {
        match self {
            AlgoParams::Softdice(c) => c.iterations,
            AlgoParams::Valuedice(c) => c.iterations,
            AlgoParams::Bc(c) => c.iterations,
        }
    }

    fn validate(&self) -> softdice::Result<()> {
        match self {
            AlgoParams::Softdice(c) => c.validate(),
            AlgoParams::Valuedice(c) => c.validate(),
            AlgoParams::Bc(c) => c.validate(),
        }
    }
}

/// The fully resolved run description, written as `resolved-config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub env: EnvName,
    pub demos: PathBuf,
    pub n_traj: Option<usize>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    #[serde(flatten)]
    pub algo: AlgoParams,
}

impl ExperimentConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.demos, &mut cfg.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Sets `params[key] = value`, parsing `value` as JSON and falling back to a string.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        let obj = self
            .params
            .as_object_mut()
            .ok_or_else(|| CliError::Usage("`params` must be a JSON object".into()))?;
        obj.insert(key.to_string(), v);
        Ok(())
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Usage("at least one seed is required".into()));
        }
        if self.n_traj == Some(0) {
            return Err(CliError::Usage("n_traj must be at least 1".into()));
        }
        if !self.demos.is_file() {
            return Err(CliError::Usage(format!("demo file {} does not exist", self.demos.display())));
        }
        let bad = |e: serde_json::Error| CliError::Usage(format!("params do not match the {:?} schema: {e}", self.algorithm));
        let params = self.params.clone();
        let algo = match self.algorithm {
            Algorithm::Softdice => AlgoParams::Softdice(serde_json::from_value(params).map_err(bad)?),
            Algorithm::Valuedice => AlgoParams::Valuedice(serde_json::from_value(params).map_err(bad)?),
            Algorithm::Bc => AlgoParams::Bc(serde_json::from_value(params).map_err(bad)?),
        };
        algo.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(ResolvedConfig {
            env: self.env,
            demos: self.demos.clone(),
            n_traj: self.n_traj,
            seeds: self.seeds.clone(),
            out_dir: self.out_dir.clone(),
            algo,
        })
    }
}

/// `key=v1,v2,...` into the key and its JSON-ish values.
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<String>), CliError> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("sweep `{spec}` is not of the form key=v1,v2")))?;
    let values: Vec<String> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
    if key.is_empty() || values.is_empty() {
        return Err(CliError::Usage(format!("sweep `{spec}` needs a key and at least one value")));
    }
    Ok((key.to_string(), values))
}
