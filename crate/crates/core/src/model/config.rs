use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::optim::{LrSchedule, SgdConfig};
use crate::error::{Error, Result};
use crate::gcn::StackSpec;
use crate::labelgraph::{LgVariant, SparseReduction};

/// Flat `key = value` settings. Later insertions override earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{raw}'", n + 1)))?;
            kv.set(k.trim(), v.trim());
        }
        Ok(kv)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse {key} = '{v}'"))),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Everything that shapes and trains one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Weight of the sparse correlation loss.
    pub alpha: f64,
    pub lg_variant: LgVariant,
    /// Width of the label-graph projections; defaults to `d_e`.
    pub latent_dim: Option<usize>,
    pub lg_bias: bool,
    pub sparse_reduction: SparseReduction,
    pub stack: StackSpec,
    pub optimizer: SgdConfig,
    pub schedule: LrSchedule,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            alpha: 1.0,
            lg_variant: LgVariant::Default,
            latent_dim: None,
            lg_bias: false,
            sparse_reduction: SparseReduction::Sum,
            stack: StackSpec::default(),
            optimizer: SgdConfig::default(),
            schedule: LrSchedule::default(),
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Keys understood by [`ModelConfig::from_key_values`].
pub const MODEL_KEYS: &[&str] = &[
    "alpha",
    "lg_variant",
    "latent_dim",
    "lg_bias",
    "sparse_reduction",
    "gcn_hidden",
    "leaky_slope",
    "lr",
    "momentum",
    "weight_decay",
    "lr_decay_factor",
    "lr_decay_every",
    "epochs",
    "batch_size",
    "seed",
];

fn parse_widths(v: &str) -> Result<Option<Vec<usize>>> {
    let v = v.trim();
    if v == "auto" {
        return Ok(None);
    }
    if v == "none" {
        return Ok(Some(Vec::new()));
    }
    v.split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("cannot parse gcn_hidden width '{w}'")))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

impl ModelConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = ModelConfig::default();
        let latent_dim = match kv.get("latent_dim") {
            None | Some("auto") => None,
            Some(v) => Some(
                v.parse()
                    .map_err(|_| Error::Config(format!("cannot parse latent_dim = '{v}'")))?,
            ),
        };
        let hidden = match kv.get("gcn_hidden") {
            None => None,
            Some(v) => parse_widths(v)?,
        };
        let cfg = ModelConfig {
            alpha: kv.parse_or("alpha", d.alpha)?,
            lg_variant: kv.parse_or("lg_variant", d.lg_variant)?,
            latent_dim,
            lg_bias: kv.parse_or("lg_bias", d.lg_bias)?,
            sparse_reduction: kv.parse_or("sparse_reduction", d.sparse_reduction)?,
            stack: StackSpec {
                hidden,
                leaky_slope: kv.parse_or("leaky_slope", d.stack.leaky_slope)?,
            },
            optimizer: SgdConfig {
                lr: kv.parse_or("lr", d.optimizer.lr)?,
                momentum: kv.parse_or("momentum", d.optimizer.momentum)?,
                weight_decay: kv.parse_or("weight_decay", d.optimizer.weight_decay)?,
            },
            schedule: LrSchedule {
                decay_factor: kv.parse_or("lr_decay_factor", d.schedule.decay_factor)?,
                decay_every: kv.parse_or("lr_decay_every", d.schedule.decay_every)?,
                epochs: kv.parse_or("epochs", d.schedule.epochs)?,
            },
            batch_size: kv.parse_or("batch_size", d.batch_size)?,
            seed: kv.parse_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("alpha", &self.alpha.to_string());
        kv.set("lg_variant", self.lg_variant.as_str());
        kv.set(
            "latent_dim",
            &self.latent_dim.map_or_else(|| "auto".to_string(), |d| d.to_string()),
        );
        kv.set("lg_bias", &self.lg_bias.to_string());
        kv.set("sparse_reduction", &self.sparse_reduction.to_string());
        let hidden = match &self.stack.hidden {
            None => "auto".to_string(),
            Some(w) if w.is_empty() => "none".to_string(),
            Some(w) => w.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        };
        kv.set("gcn_hidden", &hidden);
        kv.set("leaky_slope", &self.stack.leaky_slope.to_string());
        kv.set("lr", &self.optimizer.lr.to_string());
        kv.set("momentum", &self.optimizer.momentum.to_string());
        kv.set("weight_decay", &self.optimizer.weight_decay.to_string());
        kv.set("lr_decay_factor", &self.schedule.decay_factor.to_string());
        kv.set("lr_decay_every", &self.schedule.decay_every.to_string());
        kv.set("epochs", &self.schedule.epochs.to_string());
        kv.set("batch_size", &self.batch_size.to_string());
        kv.set("seed", &self.seed.to_string());
        kv
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if self.latent_dim == Some(0) {
            return bad("latent_dim must be >= 1".into());
        }
        let s = self.stack.leaky_slope;
        if !(s > 0.0 && s < 1.0) {
            return bad(format!("leaky_slope must lie in (0, 1), got {s}"));
        }
        if self.stack.hidden.as_ref().is_some_and(|h| h.contains(&0)) {
            return bad("gcn_hidden widths must be positive".into());
        }
        self.optimizer.validate()?;
        self.schedule.validate()?;
        if self.schedule.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        Ok(())
    }
}
