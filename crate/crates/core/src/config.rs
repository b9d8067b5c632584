//! Model configuration document.
//!
//! ```json
//! { "n_cells": 2, "alpha": "2/5",
//!   "types": [ { "a": "3/7", "p": "3/5", "beta": "3/10" },
//!              { "a": "4/7", "p": 0.8,   "beta": "2/5"  } ] }
//! ```
//!
//! Probabilities are JSON numbers or strings. Strings holding a fraction
//! `n/d` are parsed exactly as rationals and converted to `f64` once. The
//! schema lives in `schema/config.schema.json`.

use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, SystemParams, TypeSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("bad number {text:?}: {reason}")]
    BadNumber { text: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A probability as written in the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prob {
    Number(f64),
    Text(String),
}

impl Prob {
    pub fn value(&self) -> Result<f64, ConfigError> {
        match self {
            Prob::Number(v) => Ok(*v),
            Prob::Text(s) => parse_probability(s),
        }
    }
}

impl From<f64> for Prob {
    fn from(v: f64) -> Self {
        Prob::Number(v)
    }
}

impl From<&str> for Prob {
    fn from(s: &str) -> Self {
        Prob::Text(s.to_string())
    }
}

/// Parses `"n/d"` exactly, or a decimal literal.
pub fn parse_probability(text: &str) -> Result<f64, ConfigError> {
    let trimmed = text.trim();
    let bad = |reason: &str| ConfigError::BadNumber {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    if trimmed.contains('/') {
        let (num, den) = trimmed
            .split_once('/')
            .ok_or_else(|| bad("malformed fraction"))?;
        let num = i64::from_str(num.trim()).map_err(|e| bad(&e.to_string()))?;
        let den = i64::from_str(den.trim()).map_err(|e| bad(&e.to_string()))?;
        if den == 0 {
            return Err(bad("zero denominator"));
        }
        let r = Ratio::new(num, den);
        Ok(*r.numer() as f64 / *r.denom() as f64)
    } else {
        let v = f64::from_str(trimmed).map_err(|e| bad(&e.to_string()))?;
        if !v.is_finite() {
            return Err(bad("not finite"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeConfig {
    pub a: Prob,
    pub p: Prob,
    pub beta: Prob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_cells: usize,
    pub alpha: Prob,
    pub types: Vec<TypeConfig>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Converts to validated parameters. With `force`, closed-interval
    /// boundary values are accepted.
    pub fn to_params(&self, force: bool) -> Result<SystemParams, ConfigError> {
        let alpha = self.alpha.value()?;
        let types = self
            .types
            .iter()
            .map(|t| Ok(TypeSpec::new(t.a.value()?, t.p.value()?, t.beta.value()?)))
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let params = if force {
            SystemParams::new_forced(self.n_cells, alpha, types)?
        } else {
            SystemParams::new(self.n_cells, alpha, types)?
        };
        Ok(params)
    }

    /// Config with every probability written as an `"n/d"` string.
    pub fn rational(n_cells: usize, alpha: &str, types: &[(&str, &str, &str)]) -> Self {
        Self {
            n_cells,
            alpha: alpha.into(),
            types: types
                .iter()
                .map(|&(a, p, beta)| TypeConfig {
                    a: a.into(),
                    p: p.into(),
                    beta: beta.into(),
                })
                .collect(),
        }
    }

    pub fn from_params(params: &SystemParams) -> Self {
        Self {
            n_cells: params.n_cells(),
            alpha: params.alpha().into(),
            types: params
                .types()
                .iter()
                .map(|t| TypeConfig {
                    a: t.arrival_weight.into(),
                    p: t.hop_prob.into(),
                    beta: t.exit_prob.into(),
                })
                .collect(),
        }
    }
}
