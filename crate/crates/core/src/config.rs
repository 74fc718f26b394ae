//! Flat `key = value` run configuration shared by every CLI command.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::baselines::SknnConfig;
use crate::data::{ColumnOrder, LogFormat, PreprocessConfig};
use crate::model::{AblationConfig, Variant};
use crate::train::TrainConfig;

pub const SEED_ENV: &str = "EMBSR_SEED";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preprocess: PreprocessConfig,
    pub format: LogFormat,
    pub train: TrainConfig,
    pub ablation: AblationConfig,
    pub sknn: SknnConfig,
    /// Data split used by `eval`, `baseline` and `ablate`.
    pub eval_split: String,
    pub raw: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub log: Option<PathBuf>,
    /// 0 quiet, 1 normal, 2 per-epoch progress on stderr.
    pub verbosity: u8,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            format: LogFormat::default(),
            train: TrainConfig::default(),
            ablation: AblationConfig::new(Variant::Full),
            sknn: SknnConfig::default(),
            eval_split: "test".into(),
            raw: None,
            dataset: None,
            checkpoint: None,
            report: None,
            log: None,
            verbosity: 1,
        }
    }
}

/// Every accepted key, in `--print-config` order.
pub const KEYS: &[&str] = &[
    "raw",
    "dataset",
    "checkpoint",
    "report",
    "log",
    "verbosity",
    "delimiter",
    "columns",
    "numeric_items_only",
    "min_count",
    "max_len",
    "fractions",
    "split_mode",
    "op_filter",
    "seed",
    "lr",
    "dropout",
    "dim",
    "batch_size",
    "max_epochs",
    "ks",
    "patience",
    "target_op_mask_prob",
    "workers",
    "variant",
    "gnn_layers",
    "fixed_beta",
    "k_neighbors",
    "pool_size",
    "exclude_session_items",
    "eval_split",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigError::Value { key: key.into(), message: e.to_string() })
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|s| parse(key, s.trim())).collect()
}

fn optional(v: &str) -> Option<&str> {
    match v {
        "" | "none" => None,
        s => Some(s),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Defaults with the seed taken from `EMBSR_SEED` when set.
    pub fn from_env() -> Result<Self, ConfigError> {
        let mut c = Self::default();
        if let Ok(v) = std::env::var(SEED_ENV) {
            c.set("seed", v.trim()).map_err(|e| ConfigError::Invalid(format!("{SEED_ENV}: {e}")))?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let path = |v: &str| optional(v).map(PathBuf::from);
        match key {
            "raw" => self.raw = path(v),
            "dataset" => self.dataset = path(v),
            "checkpoint" => self.checkpoint = path(v),
            "report" => self.report = path(v),
            "log" => self.log = path(v),
            "verbosity" => self.verbosity = parse(key, v)?,
            "delimiter" => {
                self.format.delimiter = match v {
                    "tab" | "\\t" => '\t',
                    "comma" => ',',
                    s if s.chars().count() == 1 => s.chars().next().unwrap(),
                    _ => {
                        return Err(ConfigError::Value {
                            key: key.into(),
                            message: "expected one character, `tab` or `comma`".into(),
                        })
                    }
                }
            }
            "columns" => {
                let c: Vec<usize> = parse_list(key, v)?;
                let [session, item, operation, timestamp] = c[..] else {
                    return Err(ConfigError::Value { key: key.into(), message: "expected four column indices".into() });
                };
                self.format.columns = ColumnOrder { session, item, operation, timestamp };
            }
            "numeric_items_only" => self.format.numeric_items_only = parse(key, v)?,
            "min_count" => self.preprocess.min_count = parse(key, v)?,
            "max_len" => self.preprocess.max_len = parse(key, v)?,
            "fractions" => {
                let f: Vec<f64> = parse_list(key, v)?;
                self.preprocess.fractions = f
                    .try_into()
                    .map_err(|_| ConfigError::Value { key: key.into(), message: "expected three fractions".into() })?;
            }
            "split_mode" => self.preprocess.split_mode = parse(key, v)?,
            "op_filter" => {
                self.preprocess.op_filter = optional(v).map(|s| s.split(',').map(|o| o.trim().to_string()).collect())
            }
            "seed" => {
                let s = parse(key, v)?;
                self.preprocess.seed = s;
                self.train.seed = s;
            }
            "lr" => self.train.lr = parse(key, v)?,
            "dropout" => self.train.dropout = parse(key, v)?,
            "dim" => self.train.dim = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "max_epochs" => self.train.max_epochs = parse(key, v)?,
            "ks" => self.train.ks = parse_list(key, v)?,
            "patience" => self.train.patience = parse(key, v)?,
            "target_op_mask_prob" => self.train.target_op_mask_prob = parse(key, v)?,
            "workers" => self.train.workers = optional(v).map(|s| parse(key, s)).transpose()?,
            "variant" => self.ablation.variant = parse(key, v)?,
            "gnn_layers" => self.ablation.gnn_layers = parse(key, v)?,
            "fixed_beta" => self.ablation.fixed_beta = optional(v).map(|s| parse(key, s)).transpose()?,
            "k_neighbors" => self.sknn.k_neighbors = parse(key, v)?,
            "pool_size" => self.sknn.pool_size = parse(key, v)?,
            "exclude_session_items" => self.sknn.exclude_session_items = parse(key, v)?,
            "eval_split" => self.eval_split = v.to_string(),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a config file body; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// Applies `key=value`.
    pub fn apply_assignment(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("`{kv}` is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        Some(match key {
            "raw" => path(&self.raw),
            "dataset" => path(&self.dataset),
            "checkpoint" => path(&self.checkpoint),
            "report" => path(&self.report),
            "log" => path(&self.log),
            "verbosity" => self.verbosity.to_string(),
            "delimiter" => match self.format.delimiter {
                '\t' => "tab".into(),
                ',' => "comma".into(),
                c => c.to_string(),
            },
            "columns" => {
                let c = self.format.columns;
                join(&[c.session, c.item, c.operation, c.timestamp])
            }
            "numeric_items_only" => self.format.numeric_items_only.to_string(),
            "min_count" => self.preprocess.min_count.to_string(),
            "max_len" => self.preprocess.max_len.to_string(),
            "fractions" => join(&self.preprocess.fractions),
            "split_mode" => self.preprocess.split_mode.to_string(),
            "op_filter" => self.preprocess.op_filter.as_ref().map_or("none".into(), |f| f.join(",")),
            "seed" => self.train.seed.to_string(),
            "lr" => self.train.lr.to_string(),
            "dropout" => self.train.dropout.to_string(),
            "dim" => self.train.dim.to_string(),
            "batch_size" => self.train.batch_size.to_string(),
            "max_epochs" => self.train.max_epochs.to_string(),
            "ks" => join(&self.train.ks),
            "patience" => self.train.patience.to_string(),
            "target_op_mask_prob" => self.train.target_op_mask_prob.to_string(),
            "workers" => self.train.workers.map_or("none".into(), |w| w.to_string()),
            "variant" => self.ablation.variant.name().to_string(),
            "gnn_layers" => self.ablation.gnn_layers.to_string(),
            "fixed_beta" => self.ablation.fixed_beta.map_or("none".into(), |b| b.to_string()),
            "k_neighbors" => self.sknn.k_neighbors.to_string(),
            "pool_size" => self.sknn.pool_size.to_string(),
            "exclude_session_items" => self.sknn.exclude_session_items.to_string(),
            "eval_split" => self.eval_split.clone(),
            _ => return None,
        })
    }

    /// The effective configuration, one `key = value` per line; feeding it
    /// back through [`RunConfig::apply_text`] reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            writeln!(out, "{k} = {}", self.get(k).expect("every listed key is readable")).unwrap();
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.preprocess.max_len == 0 {
            return bad("max_len must be positive".into());
        }
        if self.ablation.gnn_layers == 0 {
            return bad("gnn_layers must be at least 1".into());
        }
        if let Some(b) = self.ablation.fixed_beta {
            if !(0.0..=1.0).contains(&b) {
                return bad(format!("fixed_beta {b} outside [0, 1]"));
            }
        }
        if self.sknn.k_neighbors == 0 || self.sknn.pool_size == 0 {
            return bad("k_neighbors and pool_size must be positive".into());
        }
        if !matches!(self.eval_split.as_str(), "train" | "validation" | "test") {
            return bad(format!("eval_split `{}` is not train, validation or test", self.eval_split));
        }
        let f = self.preprocess.fractions;
        if f.iter().any(|x| !(0.0..=1.0).contains(x)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("fractions must be three values in [0, 1] summing to 1".into());
        }
        Ok(())
    }
}
