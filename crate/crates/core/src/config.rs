//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors. The
//! resolved configuration is echoed verbatim into model files, so
//! [`RunConfig::to_text`] writes every key in a fixed order.

use std::fmt;
use std::str::FromStr;

use crate::network::ConvSpec;
use crate::training::{NetworkConfig, Variant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line number, when the error comes from a config file.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Network/training configuration plus dataset protocol settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub train_per_class: usize,
    pub test_per_class: Option<usize>,
    /// Dataset location: a class-directory root or `idx:<images>,<labels>`.
    pub data: Option<String>,
    pub save_best: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            network: NetworkConfig::default(),
            train_per_class: 500,
            test_per_class: None,
            data: None,
            save_best: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("invalid boolean {value:?} for {key}")),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError {
                line: Some(n + 1),
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            self.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(())
    }

    /// Sets one key; used for config-file lines and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let net = &mut self.network;
        match key {
            "variant" => net.variant = value.parse::<Variant>().map_err(|e| e.to_string())?,
            "loss" => net.loss = value.parse().map_err(|e: crate::Error| e.to_string())?,
            "epochs" => net.epochs = parse(key, value)?,
            "batch_size" => net.batch_size = parse(key, value)?,
            "lr" => net.lr = parse(key, value)?,
            "seed" => net.seed = parse(key, value)?,
            "keep_prob" => net.keep_prob = parse(key, value)?,
            "freeze_c1" => net.freeze_c1 = parse_bool(key, value)?,
            "gaussian_std" => net.gaussian_std = parse(key, value)?,
            "gabor_gain" => net.gabor_gain = parse(key, value)?,
            "init_gain" => net.init_gain = parse(key, value)?,
            "input_size" => net.arch.input_size = parse(key, value)?,
            "conv_maps" | "conv_kernels" => {
                let vals: Vec<usize> = parse_list(key, value)?;
                net.arch.convs.resize(vals.len(), ConvSpec { maps: 1, kernel: 1 });
                for (c, v) in net.arch.convs.iter_mut().zip(vals) {
                    if key == "conv_maps" {
                        c.maps = v;
                    } else {
                        c.kernel = v;
                    }
                }
            }
            "pool" => net.arch.pool = parse(key, value)?,
            "hidden" => net.arch.hidden = parse_list(key, value)?,
            "classes" => {
                net.arch.classes = parse(key, value)?;
                net.dbn.classes = net.arch.classes;
            }
            "gabor_orientations" => net.gabor.orientations = parse(key, value)?,
            "gabor_wavelengths" => net.gabor.wavelengths = parse_list(key, value)?,
            "gabor_phase" => net.gabor.phase = parse(key, value)?,
            "gabor_aspect" => net.gabor.aspect = parse(key, value)?,
            "gabor_sigma_ratio" => net.gabor.sigma_ratio = parse(key, value)?,
            "dbn_layers" => net.dbn.layer_sizes = parse_list(key, value)?,
            "pretrain_epochs" => net.dbn.pretrain_epochs = parse(key, value)?,
            "pretrain_lr" => net.dbn.pretrain.learning_rate = parse(key, value)?,
            "pretrain_momentum" => net.dbn.pretrain.momentum = parse(key, value)?,
            "pretrain_penalty" => net.dbn.pretrain.weight_penalty = parse(key, value)?,
            "pretrain_batch_size" => net.dbn.pretrain.batch_size = parse(key, value)?,
            "cd_k" => net.dbn.pretrain.k = parse(key, value)?,
            "binarize" => {
                net.dbn.binarize = match value {
                    "" | "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "train_per_class" => self.train_per_class = parse(key, value)?,
            "test_per_class" => {
                self.test_per_class = match value {
                    "" | "all" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "data" => self.data = (!value.is_empty()).then(|| value.to_string()),
            "save_best" => self.save_best = parse_bool(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let n = &self.network;
        let d = &n.dbn;
        let maps: Vec<usize> = n.arch.convs.iter().map(|c| c.maps).collect();
        let kernels: Vec<usize> = n.arch.convs.iter().map(|c| c.kernel).collect();
        let lines = [
            ("variant", n.variant.to_string()),
            ("loss", n.loss.name().to_string()),
            ("epochs", n.epochs.to_string()),
            ("batch_size", n.batch_size.to_string()),
            ("lr", n.lr.to_string()),
            ("seed", n.seed.to_string()),
            ("keep_prob", n.keep_prob.to_string()),
            ("freeze_c1", n.freeze_c1.to_string()),
            ("gaussian_std", n.gaussian_std.to_string()),
            ("gabor_gain", n.gabor_gain.to_string()),
            ("init_gain", n.init_gain.to_string()),
            ("input_size", n.arch.input_size.to_string()),
            ("conv_maps", join(&maps)),
            ("conv_kernels", join(&kernels)),
            ("pool", n.arch.pool.to_string()),
            ("hidden", join(&n.arch.hidden)),
            ("classes", n.arch.classes.to_string()),
            ("gabor_orientations", n.gabor.orientations.to_string()),
            ("gabor_wavelengths", join(&n.gabor.wavelengths)),
            ("gabor_phase", n.gabor.phase.to_string()),
            ("gabor_aspect", n.gabor.aspect.to_string()),
            ("gabor_sigma_ratio", n.gabor.sigma_ratio.to_string()),
            ("dbn_layers", join(&d.layer_sizes)),
            ("pretrain_epochs", d.pretrain_epochs.to_string()),
            ("pretrain_lr", d.pretrain.learning_rate.to_string()),
            ("pretrain_momentum", d.pretrain.momentum.to_string()),
            ("pretrain_penalty", d.pretrain.weight_penalty.to_string()),
            ("pretrain_batch_size", d.pretrain.batch_size.to_string()),
            ("cd_k", d.pretrain.k.to_string()),
            ("binarize", d.binarize.map_or("none".into(), |t| t.to_string())),
            ("train_per_class", self.train_per_class.to_string()),
            ("test_per_class", self.test_per_class.map_or("all".into(), |t| t.to_string())),
            ("data", self.data.clone().unwrap_or_default()),
            ("save_best", self.save_best.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
