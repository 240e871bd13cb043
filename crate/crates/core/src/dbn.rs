//! Deep belief networks: greedy layer-wise RBM pretraining, then a softmax
//! head and supervised fine-tuning of the unrolled stack by backpropagation.

use crate::dataio::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::layers::{FcLayer, LossHead};
use crate::network::FeedForward;
use crate::rbm::{CdConfig, RbmGrad, RbmParams};
use crate::real::Real;
use crate::rng::Rng;
use crate::tensor::Tensor;
use crate::training::{self, EpochStats, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq)]
pub struct DbnConfig {
    /// Visible size followed by each hidden layer size.
    pub layer_sizes: Vec<usize>,
    pub pretrain: CdConfig,
    /// CD epochs per RBM.
    pub pretrain_epochs: usize,
    /// Threshold pixels to {0, 1} before pretraining instead of using them as
    /// probabilities.
    pub binarize: Option<f32>,
    pub classes: usize,
}

impl Default for DbnConfig {
    fn default() -> Self {
        DbnConfig {
            layer_sizes: vec![1024, 100, 100],
            pretrain: CdConfig::default(),
            pretrain_epochs: 10,
            binarize: None,
            classes: 10,
        }
    }
}

impl DbnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) || self.classes == 0 {
            return Err(Error::InvalidArgument(format!(
                "DBN needs a visible layer and at least one hidden layer, got {:?}",
                self.layer_sizes
            )));
        }
        self.pretrain.validate()
    }
}

/// Freshly initialized RBMs for every adjacent pair of layer sizes.
pub fn init_stack<T: Real>(cfg: &DbnConfig, rng: &mut Rng) -> Result<Vec<RbmParams<T>>> {
    cfg.validate()?;
    cfg.layer_sizes
        .windows(2)
        .map(|w| RbmParams::init(w[0], w[1], rng))
        .collect()
}

/// Greedy pretraining; see [`greedy_pretrain_observed`].
pub fn greedy_pretrain<T: Real>(data: &[&[T]], cfg: &DbnConfig, seed: u64, exec: Exec) -> Result<Vec<RbmParams<T>>> {
    greedy_pretrain_observed(data, cfg, seed, exec, |_, _, _| {})
}

/// Trains RBM 1 on `data`, then RBM `l+1` on the hidden probabilities of
/// RBM `l` over the same data. `observe(layer, inputs, stack)` is called
/// before each layer trains with the exact rows it will be trained on and
/// the stack trained so far.
pub fn greedy_pretrain_observed<T: Real>(
    data: &[&[T]],
    cfg: &DbnConfig,
    seed: u64,
    exec: Exec,
    mut observe: impl FnMut(usize, &[Vec<T>], &[RbmParams<T>]),
) -> Result<Vec<RbmParams<T>>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("no pretraining data".into()));
    }
    let mut inputs: Vec<Vec<T>> = data
        .iter()
        .map(|row| match cfg.binarize {
            Some(t) => row
                .iter()
                .map(|&x| if x.as_f64() >= t as f64 { T::one() } else { T::zero() })
                .collect(),
            None => row.to_vec(),
        })
        .collect();
    let mut stack: Vec<RbmParams<T>> = Vec::new();
    for (layer, w) in cfg.layer_sizes.windows(2).enumerate() {
        if inputs[0].len() != w[0] {
            return Err(Error::ShapeMismatch(format!(
                "layer {} expects {} visible units, data rows have {}",
                layer + 1,
                w[0],
                inputs[0].len()
            )));
        }
        observe(layer, &inputs, &stack);
        let mut rbm = RbmParams::init(w[0], w[1], &mut Rng::indexed(seed, "rbm-init", &[layer as u64]))?;
        let mut velocity = RbmGrad::zeros(w[0], w[1]);
        let mut rng = Rng::indexed(seed, "gibbs", &[layer as u64]);
        let rows: Vec<&[T]> = inputs.iter().map(|r| r.as_slice()).collect();
        for _ in 0..cfg.pretrain_epochs {
            rbm.train_epoch(&rows, &cfg.pretrain, &mut rng, &mut velocity, exec)?;
        }
        let next = rbm.hidden_probs_batch(&rows, exec)?;
        stack.push(rbm);
        inputs = next;
    }
    Ok(stack)
}

/// Unrolls a stack into sigmoid dense layers (`W = w^T`, bias = hidden bias)
/// and adds a `classes`-way score layer with `N(0, 1/fan_in)` weights.
pub fn classifier_from_stack<T: Real>(stack: &[RbmParams<T>], classes: usize, rng: &mut Rng) -> Result<FeedForward<T>> {
    let mut layers = Vec::with_capacity(stack.len() + 1);
    for rbm in stack {
        layers.push(FcLayer::new(rbm.w.transpose()?, rbm.b.clone())?);
    }
    let top = stack
        .last()
        .map(|r| r.n_hidden())
        .ok_or_else(|| Error::InvalidArgument("empty RBM stack".into()))?;
    let head = FcLayer::new(
        Tensor::rand_normal(&[classes, top], 0.0, 1.0 / (top as f64).sqrt(), rng)?,
        Tensor::zeros(&[classes])?,
    )?;
    layers.push(head);
    FeedForward::new(layers, LossHead::SoftmaxCrossEntropy)
}

/// Supervised fine-tuning by backpropagation through the whole unrolled
/// stack (or only the head when `freeze_stack`). The head is initialized from
/// the `"head"` sub-stream of `cfg.seed`.
pub fn finetune(
    stack: &[RbmParams<f32>],
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    classes: usize,
    freeze_stack: bool,
    exec: Exec,
) -> Result<(FeedForward<f32>, TrainReport)> {
    finetune_observed(stack, ds, cfg, classes, freeze_stack, exec, |_, _| {})
}

/// [`finetune`] with a per-epoch callback, as in [`training::train_observed`].
pub fn finetune_observed(
    stack: &[RbmParams<f32>],
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    classes: usize,
    freeze_stack: bool,
    exec: Exec,
    on_epoch: impl FnMut(&FeedForward<f32>, &EpochStats),
) -> Result<(FeedForward<f32>, TrainReport)> {
    if stack.first().map(|r| r.n_visible()) != Some(ds.pixels()) {
        return Err(Error::ShapeMismatch(format!(
            "stack input {:?} does not match {} pixels per image",
            stack.first().map(|r| r.n_visible()),
            ds.pixels()
        )));
    }
    let mut net = classifier_from_stack(stack, classes, &mut Rng::substream(cfg.seed, "head"))?;
    if freeze_stack {
        net.frozen_layers = stack.len();
    }
    let report = training::train_observed(&mut net, ds, cfg, exec, on_epoch)?;
    Ok((net, report))
}

/// Class label (argmax, ties to the lowest index) and probabilities.
pub fn predict<T: Real>(dbn: &FeedForward<T>, image: &[T]) -> Result<(usize, Vec<T>)> {
    use crate::network::Model;
    dbn.predict(image)
}
