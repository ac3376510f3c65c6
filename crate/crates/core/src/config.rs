//! Model hyperparameters and sampler controls, with a flat `key = value` text form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distributions::KPriorMode;
use crate::error::{Error, Result};
use crate::partition::KWeightRule;
use crate::repulsion::{RepulsionForm, RepulsionSpec, DEFAULT_MAX_ATTEMPTS, MIN_ZK_DRAWS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Symmetric Dirichlet concentration of the mixing weights.
    pub beta: f64,
    pub form: RepulsionForm,
    pub g0: f64,
    /// Prior standard deviation of each center coordinate.
    pub tau: f64,
    /// Inverse-gamma shape and rate of each covariance eigenvalue.
    pub a0: f64,
    pub b0: f64,
    /// Eigenvalues are confined to `[sigma_lo², sigma_hi²]`.
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// Intensity of the zero-truncated Poisson prior on `K`.
    pub k_intensity: f64,
    pub k_prior: KPriorMode,
    pub k_weights: KWeightRule,
    /// Perturbation range: `K` is resampled over `ℓ..=ℓ+m`.
    pub m: usize,
    /// Largest `K` in the `Z_K` table.
    pub k_max: usize,
    pub zk_mc: usize,
    pub ztilde_mc: usize,
    pub k_init: usize,
    /// Hold every covariance at `fixed_lambda · I` instead of sampling it.
    pub fixed_lambda: Option<f64>,
    pub vn_tol: f64,
    pub max_attempts: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            form: RepulsionForm::MinPairwise,
            g0: 10.0,
            tau: 10.0,
            a0: 2.0,
            b0: 1.0,
            sigma_lo: 0.1,
            sigma_hi: 10.0,
            k_intensity: 1.0,
            k_prior: KPriorMode::Plain,
            k_weights: KWeightRule::Exact,
            m: 2,
            k_max: 30,
            zk_mc: 1_000_000,
            ztilde_mc: 2000,
            k_init: 10,
            fixed_lambda: None,
            vn_tol: 1e-12,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

pub const CONFIG_KEYS: [&str; 19] = [
    "beta",
    "form",
    "g0",
    "tau",
    "a0",
    "b0",
    "sigma_lo",
    "sigma_hi",
    "k_intensity",
    "k_prior",
    "k_weights",
    "m",
    "k_max",
    "zk_mc",
    "ztilde_mc",
    "k_init",
    "fixed_lambda",
    "vn_tol",
    "max_attempts",
];

fn parse_num<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{value}`")))
}

impl ModelConfig {
    pub fn spec(&self) -> RepulsionSpec {
        RepulsionSpec {
            form: self.form,
            g0: self.g0,
            tau: self.tau,
        }
    }

    pub fn lambda_lo(&self) -> f64 {
        self.sigma_lo * self.sigma_lo
    }

    pub fn lambda_hi(&self) -> f64 {
        self.sigma_hi * self.sigma_hi
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid(
                "beta",
                format!("must lie in (0, 1], got {}", self.beta),
            ));
        }
        RepulsionSpec::new(self.form, self.g0, self.tau)?;
        positive("a0", self.a0)?;
        positive("b0", self.b0)?;
        positive("sigma_lo", self.sigma_lo)?;
        positive("sigma_hi", self.sigma_hi)?;
        if self.sigma_lo >= self.sigma_hi {
            return Err(Error::EmptySupport {
                lo: self.lambda_lo(),
                hi: self.lambda_hi(),
            });
        }
        positive("k_intensity", self.k_intensity)?;
        if let Some(l) = self.fixed_lambda {
            positive("fixed_lambda", l)?;
        }
        if !(self.vn_tol > 0.0 && self.vn_tol < 1.0) {
            return Err(Error::invalid(
                "vn_tol",
                format!("must lie in (0, 1), got {}", self.vn_tol),
            ));
        }
        let at_least = |name: &'static str, v: usize, min: usize| {
            if v >= min {
                Ok(())
            } else {
                Err(Error::invalid(
                    name,
                    format!("must be at least {min}, got {v}"),
                ))
            }
        };
        at_least("k_max", self.k_max, 1)?;
        at_least("zk_mc", self.zk_mc, MIN_ZK_DRAWS)?;
        at_least("ztilde_mc", self.ztilde_mc, 1)?;
        at_least("k_init", self.k_init, 1)?;
        at_least("max_attempts", self.max_attempts, 1)?;
        Ok(())
    }

    /// Set one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "beta" => self.beta = parse_num("beta", value)?,
            "form" => self.form = value.parse()?,
            "g0" => self.g0 = parse_num("g0", value)?,
            "tau" => self.tau = parse_num("tau", value)?,
            "a0" => self.a0 = parse_num("a0", value)?,
            "b0" => self.b0 = parse_num("b0", value)?,
            "sigma_lo" => self.sigma_lo = parse_num("sigma_lo", value)?,
            "sigma_hi" => self.sigma_hi = parse_num("sigma_hi", value)?,
            "k_intensity" => self.k_intensity = parse_num("k_intensity", value)?,
            "k_prior" => self.k_prior = value.parse()?,
            "k_weights" => self.k_weights = value.parse()?,
            "m" => self.m = parse_num("m", value)?,
            "k_max" => self.k_max = parse_num("k_max", value)?,
            "zk_mc" => self.zk_mc = parse_num("zk_mc", value)?,
            "ztilde_mc" => self.ztilde_mc = parse_num("ztilde_mc", value)?,
            "k_init" => self.k_init = parse_num("k_init", value)?,
            "fixed_lambda" => {
                self.fixed_lambda = match value {
                    "none" | "" => None,
                    v => Some(parse_num("fixed_lambda", v)?),
                }
            }
            "vn_tol" => self.vn_tol = parse_num("vn_tol", value)?,
            "max_attempts" => self.max_attempts = parse_num("max_attempts", value)?,
            other => return Err(Error::invalid("config", format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parse `key = value` lines (`#` starts a comment). Returns the config and
    /// the keys that were left at their defaults.
    pub fn parse(text: &str, path: &Path) -> Result<(Self, Vec<&'static str>)> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let key = key.trim();
            if seen.contains(&key.to_string()) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            cfg.set(key, value.trim()).map_err(|e| err(e.to_string()))?;
            seen.push(key.to_string());
        }
        cfg.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: e.to_string(),
        })?;
        let missing = CONFIG_KEYS
            .iter()
            .copied()
            .filter(|k| !seen.iter().any(|s| s == k))
            .collect();
        Ok((cfg, missing))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<&'static str>)> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn value_of(&self, key: &str) -> Option<String> {
        Some(match key {
            "beta" => format!("{:?}", self.beta),
            "form" => self.form.name().to_string(),
            "g0" => format!("{:?}", self.g0),
            "tau" => format!("{:?}", self.tau),
            "a0" => format!("{:?}", self.a0),
            "b0" => format!("{:?}", self.b0),
            "sigma_lo" => format!("{:?}", self.sigma_lo),
            "sigma_hi" => format!("{:?}", self.sigma_hi),
            "k_intensity" => format!("{:?}", self.k_intensity),
            "k_prior" => self.k_prior.name().to_string(),
            "k_weights" => self.k_weights.name().to_string(),
            "m" => self.m.to_string(),
            "k_max" => self.k_max.to_string(),
            "zk_mc" => self.zk_mc.to_string(),
            "ztilde_mc" => self.ztilde_mc.to_string(),
            "k_init" => self.k_init.to_string(),
            "fixed_lambda" => self
                .fixed_lambda
                .map_or_else(|| "none".into(), |v| format!("{v:?}")),
            "vn_tol" => format!("{:?}", self.vn_tol),
            "max_attempts" => self.max_attempts.to_string(),
            _ => return None,
        })
    }

    /// Every key on its own line; parses back to an identical config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            writeln!(out, "{key} = {}", self.value_of(key).expect("known key")).unwrap();
        }
        out
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Key of the `Z_K` table: only the fields that determine it, plus the dimension.
    pub fn zk_key(&self, p: usize) -> String {
        let text = format!(
            "form={} g0={:?} tau={:?} p={p} k_max={} zk_mc={}",
            self.form.name(),
            self.g0,
            self.tau,
            self.k_max,
            self.zk_mc
        );
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Seed of the `Z_K` Monte Carlo, derived from [`ModelConfig::zk_key`] so a cached
    /// table is exactly what a fresh estimate would produce.
    pub fn zk_seed(&self, p: usize) -> u64 {
        u64::from_str_radix(&self.zk_key(p)[..16], 16).expect("hex digest")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ModelConfig {
            g0: 7.0,
            fixed_lambda: Some(1.0),
            k_prior: KPriorMode::ZkAdjusted,
            ..Default::default()
        };
        cfg.tau = 0.1 + 0.2;
        let (back, missing) = ModelConfig::parse(&cfg.to_text(), Path::new("x")).unwrap();
        assert_eq!(back, cfg);
        assert!(missing.is_empty());
        assert_eq!(back.content_hash(), cfg.content_hash());
    }

    #[test]
    fn missing_keys_default() {
        let (cfg, missing) = ModelConfig::parse("g0 = 3 # comment\n\n", Path::new("c")).unwrap();
        assert_eq!(cfg.g0, 3.0);
        assert_eq!(cfg.tau, 10.0);
        assert_eq!(missing.len(), CONFIG_KEYS.len() - 1);
        assert!(!missing.contains(&"g0"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let p = Path::new("c");
        assert!(matches!(
            ModelConfig::parse("g0 = 1\nbogus = 2\n", p),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            ModelConfig::parse("g0 1\n", p),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ModelConfig::parse("g0 = x\n", p),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ModelConfig::parse("g0 = 1\ng0 = 2\n", p),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(ModelConfig::parse("beta = 1.5\n", p).is_err());
        assert!(ModelConfig::parse("sigma_lo = 5\nsigma_hi = 1\n", p).is_err());
    }

    #[test]
    fn hashes_track_content() {
        let a = ModelConfig::default();
        let b = ModelConfig { m: 3, ..a.clone() };
        assert_ne!(a.content_hash(), b.content_hash());
        // m does not enter the Z_K table.
        assert_eq!(a.zk_key(2), b.zk_key(2));
        assert_ne!(a.zk_key(2), a.zk_key(3));
        assert_eq!(a.zk_seed(2), ModelConfig::default().zk_seed(2));
    }

    #[test]
    fn every_key_settable() {
        let cfg = ModelConfig::default();
        for key in CONFIG_KEYS {
            let mut c = cfg.clone();
            c.set(key, &cfg.value_of(key).unwrap()).unwrap();
            assert_eq!(c, cfg, "{key}");
        }
    }
}
