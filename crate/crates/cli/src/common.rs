//! Exit codes, config resolution, data loading, and the worker pool.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use hbdr::config::RunConfig;
use hbdr::dataio::{self, LabeledDataset};
use hbdr::model_file::{ModelFile, ModelKind};
use hbdr::synthetic::synthetic_digits;
use hbdr::{Exec, Model};

use crate::args::RunArgs;

pub const INPUT_ERROR: u8 = 2;
pub const RUNTIME_ERROR: u8 = 1;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult<T = ()> = Result<T, Failure>;

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: RUNTIME_ERROR,
            error,
        }
    }
}

impl From<hbdr::Error> for Failure {
    fn from(e: hbdr::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

/// Marks an error as caused by user input (exit status 2).
pub trait InputError<T> {
    fn input(self, context: impl Display) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> InputError<T> for Result<T, E> {
    fn input(self, context: impl Display) -> CmdResult<T> {
        self.map_err(|e| Failure {
            code: INPUT_ERROR,
            error: e.into().context(context.to_string()),
        })
    }
}

pub fn input_error(message: impl Display) -> Failure {
    Failure {
        code: INPUT_ERROR,
        error: anyhow!(message.to_string()),
    }
}

#[cfg(feature = "parallel")]
pub fn executor(threads: Option<u16>) -> CmdResult<Exec> {
    match threads {
        Some(1) => Ok(Exec::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build_global()
                .context("starting worker threads")?;
            Ok(Exec::Parallel)
        }
        None => Ok(Exec::Parallel),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn executor(_threads: Option<u16>) -> CmdResult<Exec> {
    Ok(Exec::Sequential)
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
pub fn resolve_config(args: &RunArgs) -> CmdResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).input(format!("cannot read config {}", path.display()))?;
        cfg.apply_text(&text).input(format!("invalid config {}", path.display()))?;
    }
    let mut overrides: Vec<(String, String)> = Vec::new();
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| input_error(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        overrides.push((k.trim().into(), v.trim().into()));
    }
    let mut flag = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            overrides.push((key.into(), v));
        }
    };
    flag("variant", args.variant.clone());
    flag("epochs", args.epochs.map(|v| v.to_string()));
    flag("batch_size", args.batch_size.map(|v| v.to_string()));
    flag("lr", args.lr.map(|v| v.to_string()));
    flag("seed", args.seed.map(|v| v.to_string()));
    flag("train_per_class", args.train_per_class.map(|v| v.to_string()));
    flag("test_per_class", args.test_per_class.map(|v| v.to_string()));
    flag("keep_prob", args.keep_prob.map(|v| v.to_string()));
    flag("freeze_c1", args.freeze_c1.then(|| "true".into()));
    flag("binarize", args.binarize.map(|v| v.to_string()));
    flag("loss", args.loss.clone());
    flag("data", args.data.clone());
    for (k, v) in overrides {
        cfg.set(&k, &v).map_err(|e| input_error(format!("--{k}: {e}")))?;
    }
    if cfg.data.is_none() {
        cfg.data = std::env::var("HBDR_DATA").ok().filter(|s| !s.is_empty());
    }
    Ok(cfg)
}

const NO_DATA: &str = "no dataset given: pass --data <dir|idx:images,labels|synthetic:N> or set HBDR_DATA. \
CMATERdb 3.1.1 is not downloaded automatically; unpack it as <root>/<digit>/<image>.(pgm|png)";

pub fn load_source(source: Option<&str>, exec: Exec) -> CmdResult<LabeledDataset> {
    let source = source.ok_or_else(|| input_error(NO_DATA))?;
    let ds = if let Some(rest) = source.strip_prefix("idx:") {
        let (img, lbl) = rest
            .split_once(',')
            .ok_or_else(|| input_error(format!("expected idx:<images>,<labels>, got {source:?}")))?;
        dataio::load_idx(Path::new(img), Path::new(lbl))
    } else if let Some(n) = source.strip_prefix("synthetic:") {
        let n: usize = n.parse().input(format!("invalid synthetic size in {source:?}"))?;
        synthetic_digits(n, 0)
    } else {
        let root = PathBuf::from(source);
        if !root.is_dir() {
            return Err(input_error(format!("dataset directory {} does not exist. {NO_DATA}", root.display())));
        }
        dataio::load_dir(&root, exec)
    };
    ds.input(format!("cannot load dataset {source:?}"))
}

/// Loads, optionally binarizes, and splits the dataset a config describes.
pub fn load_split(cfg: &RunConfig, exec: Exec) -> CmdResult<LabeledDataset> {
    let mut ds = load_source(cfg.data.as_deref(), exec)?;
    if let Some(t) = cfg.network.dbn.binarize {
        ds = ds.binarized(t);
    }
    dataio::stratified_split(&ds, cfg.train_per_class, cfg.test_per_class, cfg.network.seed)
        .input("cannot split dataset")
}

pub fn load_model(path: &Path) -> CmdResult<ModelFile> {
    ModelFile::load(path).input(format!("cannot read model {}", path.display()))
}

pub fn model_config(file: &ModelFile) -> CmdResult<RunConfig> {
    RunConfig::parse(&file.config).input("model file carries an invalid config")
}

/// A trained classifier from a `cnn` or `dbn` model file.
pub fn classifier(file: &ModelFile, cfg: &RunConfig) -> CmdResult<Box<dyn Model<f32>>> {
    match file.kind {
        ModelKind::Cnn => Ok(Box::new(
            file.to_cnn(&cfg.network.arch, cfg.network.loss)
                .input("model tensors do not match the recorded architecture")?,
        )),
        ModelKind::Dbn => Ok(Box::new(file.to_dbn().input("invalid DBN model")?)),
        ModelKind::RbmStack => Err(input_error(
            "an rbm-stack has no classifier; fine-tune it with `train --variant dbn --stack`",
        )),
    }
}

pub fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(Failure::from)
}

pub fn write(dir: &Path, name: &str, contents: &str) -> CmdResult {
    let path = dir.join(name);
    fs::write(&path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::from)
}
