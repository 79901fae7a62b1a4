//! Experiment configuration and its `key = value` file format.
//!
//! Lines are `key = value`; `#` starts a comment. The instance vectors `c`,
//! `b` and `q` take comma-separated lists. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use super::Framework;
use crate::arma::ArmaConfig;
use crate::error::{BocoError, Result};
use crate::knapsack::{KnapsackInstance, DEFAULT_Z_CAP};
use crate::smc::SmcConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub framework: Framework,
    pub horizon: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// Chance level of the aggregated decision.
    pub alpha: f64,
    pub smc: SmcConfig,
    pub adam_lr0: f64,
    pub adam_decay: f64,
    pub score_k: usize,
    pub z_cap: u32,
    pub instance: KnapsackInstance,
    pub arma: ArmaConfig,
    pub out: PathBuf,
    /// Run trials on the rayon pool (ignored without the `parallel` feature).
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            framework: Framework::Bma,
            horizon: 1000,
            trials: 100,
            base_seed: 0,
            alpha: 0.9,
            smc: SmcConfig::default(),
            adam_lr0: 0.1,
            adam_decay: 0.99,
            score_k: 20,
            z_cap: DEFAULT_Z_CAP,
            instance: KnapsackInstance::default(),
            // Benchmark weights sit at level 1, inside the predictor's (0, 2) range.
            arma: ArmaConfig {
                shift: 1.0,
                ..ArmaConfig::default()
            },
            out: PathBuf::from("results"),
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BocoError::Argument(m));
        if self.trials == 0 {
            return bad("trials must be ≥ 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.score_k == 0 {
            return bad("score_k must be ≥ 1".into());
        }
        if !(self.adam_lr0.is_finite() && self.adam_decay.is_finite()) {
            return bad("Adam settings must be finite".into());
        }
        self.smc.validate()?;
        self.instance.validate()?;
        self.arma.validate()
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| BocoError::Config {
                line: i + 1,
                message: format!("expected `key = value`, found {line:?}"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|message| BocoError::Config { line: i + 1, message })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| BocoError::io(path, e))?;
        self.apply_text(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse {key} = {v:?}"))
        }
        fn list<const K: usize>(key: &str, v: &str) -> std::result::Result<[f64; K], String> {
            let parts: Vec<&str> = v.split(',').map(str::trim).collect();
            if parts.len() == 1 {
                return Ok([num(key, parts[0])?; K]);
            }
            if parts.len() != K {
                return Err(format!("{key} needs 1 or {K} values, found {}", parts.len()));
            }
            let mut out = [0.0; K];
            for (o, p) in out.iter_mut().zip(parts) {
                *o = num(key, p)?;
            }
            Ok(out)
        }
        fn flag(key: &str, v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(format!("cannot parse {key} = {v:?} as a boolean")),
            }
        }
        match key {
            "framework" => {
                self.framework = Framework::parse(value).ok_or_else(|| format!("unknown framework {value:?}"))?
            }
            "horizon" | "T" => self.horizon = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" | "base_seed" | "baseSeed" => self.base_seed = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "particles" | "N" => self.smc.particles = num(key, value)?,
            "lambda" => self.smc.lambda = num(key, value)?,
            "shrinkage" | "a" => self.smc.shrinkage = num(key, value)?,
            "ess_threshold" | "tau" => self.smc.ess_threshold = num(key, value)?,
            "mh_steps" | "L" => self.smc.mh_steps = num(key, value)?,
            "prior_std" | "priorStd" => self.smc.prior_std = num(key, value)?,
            "jitter_floor" | "jitterFloor" => self.smc.jitter_floor = num(key, value)?,
            "adam_lr0" | "adamLr0" => self.adam_lr0 = num(key, value)?,
            "adam_decay" | "adamDecay" => self.adam_decay = num(key, value)?,
            "score_k" | "scoreK" => self.score_k = num(key, value)?,
            "z_cap" | "zCap" => self.z_cap = num(key, value)?,
            "c" => self.instance.c = list(key, value)?,
            "b" => self.instance.b = list(key, value)?,
            "q" => self.instance.q = list(key, value)?,
            "arma_shift" => self.arma.shift = num(key, value)?,
            "arma_burn_in" => self.arma.burn_in = num(key, value)?,
            "out" | "out_path" | "outPath" => self.out = PathBuf::from(value),
            "parallel" => self.parallel = flag(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }
}
