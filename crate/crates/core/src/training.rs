//! Network assembly, the minibatch SGD loop, evaluation and reports.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::dataio::LabeledDataset;
use crate::dbn::{self, DbnConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::filters::{gabor_bank, gaussian_bank, GaborSpec};
use crate::layers::{argmax, LossHead};
use crate::network::{Cnn, CnnArch, FeedForward, LayerParams, Model};
use crate::real::{axpy, Real};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// The recognizer variants. `Cnn`/`CnnDropout` are the plain CNN, whose
/// first layer is randomly (Gaussian) initialized, so they build the same
/// network as `CnnGaussian`/`CnnGaussianDropout`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Dbn,
    Cnn,
    CnnDropout,
    CnnGaussian,
    CnnGabor,
    CnnGaussianDropout,
    CnnGaborDropout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstLayerInit {
    Gaussian,
    Gabor,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Dbn,
        Variant::Cnn,
        Variant::CnnDropout,
        Variant::CnnGaussian,
        Variant::CnnGabor,
        Variant::CnnGaussianDropout,
        Variant::CnnGaborDropout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dbn => "dbn",
            Variant::Cnn => "cnn",
            Variant::CnnDropout => "cnn-dropout",
            Variant::CnnGaussian => "cnn-gaussian",
            Variant::CnnGabor => "cnn-gabor",
            Variant::CnnGaussianDropout => "cnn-gaussian-dropout",
            Variant::CnnGaborDropout => "cnn-gabor-dropout",
        }
    }

    pub fn is_cnn(self) -> bool {
        self != Variant::Dbn
    }

    pub fn uses_dropout(self) -> bool {
        matches!(
            self,
            Variant::CnnDropout | Variant::CnnGaussianDropout | Variant::CnnGaborDropout
        )
    }

    pub fn first_layer_init(self) -> FirstLayerInit {
        match self {
            Variant::CnnGabor | Variant::CnnGaborDropout => FirstLayerInit::Gabor,
            _ => FirstLayerInit::Gaussian,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

/// Everything needed to build and train one recognizer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub variant: Variant,
    pub arch: CnnArch,
    pub loss: LossHead,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Keep probability at the dropout sites of dropout variants.
    pub keep_prob: f64,
    pub freeze_c1: bool,
    /// Standard deviation of the Gaussian first-layer bank.
    pub gaussian_std: f64,
    pub gabor: GaborSpec,
    /// L2 norm of each Gabor first-layer filter.
    pub gabor_gain: f64,
    /// Multiplier on the `1/sqrt(fan_in)` standard deviation of the weights
    /// feeding sigmoid units after C1 (the score layer keeps gain 1).
    pub init_gain: f64,
    pub dbn: DbnConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            variant: Variant::CnnGaborDropout,
            arch: CnnArch::default(),
            loss: LossHead::SoftmaxCrossEntropy,
            lr: 0.5,
            batch_size: 50,
            epochs: 30,
            seed: 1,
            keep_prob: 0.5,
            freeze_c1: false,
            gaussian_std: 1.0,
            gabor: GaborSpec::default(),
            gabor_gain: 5.0,
            init_gain: 4.0,
            dbn: DbnConfig::default(),
        }
    }
}

impl NetworkConfig {
    pub fn for_variant(variant: Variant) -> Self {
        NetworkConfig {
            variant,
            ..Self::default()
        }
    }

    /// Keep probability actually applied during training (`None` when the
    /// variant has no dropout).
    pub fn dropout(&self) -> Option<f64> {
        self.variant.uses_dropout().then_some(self.keep_prob)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            keep_prob: self.dropout(),
        }
    }
}

/// Either kind of trained recognizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Cnn(Cnn<f32>),
    Dbn(FeedForward<f32>),
}

impl Network {
    pub fn as_model(&self) -> &dyn Model<f32> {
        match self {
            Network::Cnn(n) => n,
            Network::Dbn(n) => n,
        }
    }
}

fn fan_in_normal(shape: &[usize], fan_in: usize, gain: f64, rng: &mut Rng) -> Result<Tensor<f32>> {
    Tensor::rand_normal(shape, 0.0, gain / (fan_in as f64).sqrt(), rng)
}

/// Builds and initializes a CNN. C1 comes from the variant's filter bank,
/// hidden weights are `N(0, init_gain²/fan_in)`, score weights are
/// `N(0, 1/fan_in)`, and biases start at zero.
pub fn build_cnn(cfg: &NetworkConfig, rng: &mut Rng) -> Result<Cnn<f32>> {
    let mut net = Cnn::zeros(cfg.arch.clone(), cfg.loss)?;
    net.freeze_first = cfg.freeze_c1;
    for (i, conv) in net.convs.iter_mut().enumerate() {
        let shape = conv.kernels.shape().to_vec();
        let (out, inp, k) = (shape[0], shape[1], shape[2]);
        conv.kernels = if i == 0 {
            match cfg.variant.first_layer_init() {
                FirstLayerInit::Gabor => {
                    let mut bank = gabor_bank(out, k, &cfg.gabor, true)?;
                    bank.scale(cfg.gabor_gain as f32);
                    bank
                }
                FirstLayerInit::Gaussian => gaussian_bank(out, k, cfg.gaussian_std, rng)?,
            }
        } else {
            fan_in_normal(&shape, inp * k * k, cfg.init_gain, rng)?
        };
        if conv.kernels.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "first-layer bank {:?} does not fit C1 {shape:?}",
                conv.kernels.shape()
            )));
        }
    }
    let last = net.fcs.len() - 1;
    for (i, fc) in net.fcs.iter_mut().enumerate() {
        let gain = if i == last { 1.0 } else { cfg.init_gain };
        fc.weights = fan_in_normal(fc.weights.shape(), fc.inputs(), gain, rng)?;
    }
    Ok(net)
}

/// Network for `cfg.variant`. DBN variants get an untrained stack (RBM
/// initialization) under a fresh softmax head.
pub fn build_network(cfg: &NetworkConfig, rng: &mut Rng) -> Result<Network> {
    if cfg.variant.is_cnn() {
        Ok(Network::Cnn(build_cnn(cfg, rng)?))
    } else {
        let stack = dbn::init_stack(&cfg.dbn, rng)?;
        Ok(Network::Dbn(dbn::classifier_from_stack(&stack, cfg.dbn.classes, rng)?))
    }
}

/// Layer-table parameter count.
pub fn param_count(network: &dyn Model<f32>) -> usize {
    network.layer_params().iter().map(|l| l.count).sum()
}

pub fn layer_param_counts(network: &dyn Model<f32>) -> Vec<LayerParams> {
    network.layer_params()
}

/// `p -= lr * g` for every parameter whose mask entry is set.
pub fn sgd_step<T: Real>(params: &mut [&mut Tensor<T>], grads: &[Tensor<T>], lr: T, trainable: &[bool]) -> Result<()> {
    if params.len() != grads.len() || params.len() != trainable.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} mask entries",
            params.len(),
            grads.len(),
            trainable.len()
        )));
    }
    for ((p, g), &t) in params.iter_mut().zip(grads).zip(trainable) {
        p.same_shape(g)?;
        if t {
            axpy(-lr, g.data(), p.data_mut());
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub keep_prob: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.5,
            batch_size: 50,
            epochs: 30,
            seed: 1,
            keep_prob: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
    pub seconds: f64,
}

/// Predictions of a model on a set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u32>>,
    /// `(sample index, true class, predicted class)`.
    pub misclassified: Vec<(usize, usize, usize)>,
}

impl Evaluation {
    pub fn from_predictions(classes: usize, samples: &[(usize, usize, usize)]) -> Self {
        let mut confusion = vec![vec![0u32; classes]; classes];
        let mut misclassified = Vec::new();
        for &(i, t, p) in samples {
            confusion[t][p] += 1;
            if t != p {
                misclassified.push((i, t, p));
            }
        }
        let correct: u32 = (0..classes).map(|c| confusion[c][c]).sum();
        let accuracy = if samples.is_empty() {
            0.0
        } else {
            correct as f64 / samples.len() as f64
        };
        Evaluation {
            accuracy,
            confusion,
            misclassified,
        }
    }

    /// Recall of every class; `None` for classes absent from the set.
    pub fn per_class_recall(&self) -> Vec<Option<f64>> {
        self.confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let total: u32 = row.iter().sum();
                (total > 0).then(|| row[c] as f64 / total as f64)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub confusion: Vec<Vec<u32>>,
    pub misclassified: Vec<(usize, usize, usize)>,
}

impl TrainReport {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test_accuracy)
    }

    pub fn best_epoch(&self) -> Option<&EpochStats> {
        self.epochs
            .iter()
            .fold(None, |best: Option<&EpochStats>, e| match best {
                Some(b) if b.test_accuracy >= e.test_accuracy => Some(b),
                _ => Some(e),
            })
    }

    /// `epoch,train_loss,test_accuracy` rows (wall-clock time is left out so
    /// the file is reproducible).
    pub fn report_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,test_accuracy\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{:.6},{:.6}\n", e.epoch, e.train_loss, e.test_accuracy));
        }
        s
    }

    pub fn confusion_csv(&self) -> String {
        confusion_csv(&self.confusion)
    }

    pub fn misclassified_csv(&self) -> String {
        let mut s = String::from("index,true,predicted\n");
        for (i, t, p) in &self.misclassified {
            s.push_str(&format!("{i},{t},{p}\n"));
        }
        s
    }
}

pub fn confusion_csv(confusion: &[Vec<u32>]) -> String {
    confusion
        .iter()
        .map(|row| row.iter().map(u32::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect()
}

/// Classifies `indices` of `ds`; evaluation is inference mode (no dropout).
pub fn evaluate<M: Model<f32> + ?Sized>(model: &M, ds: &LabeledDataset, indices: &[usize], exec: Exec) -> Result<Evaluation> {
    check_input(model, ds)?;
    let preds = exec.map_range(indices.len(), |k| {
        let i = indices[k];
        let scores = model.scores(ds.image(i))?;
        Ok((i, ds.label(i), argmax(&scores)))
    });
    let preds: Vec<(usize, usize, usize)> = preds.into_iter().collect::<Result<_>>()?;
    Ok(Evaluation::from_predictions(model.classes(), &preds))
}

fn check_input<M: Model<f32> + ?Sized>(model: &M, ds: &LabeledDataset) -> Result<()> {
    let want: usize = model.input_shape().iter().product();
    if want != ds.pixels() {
        return Err(Error::ShapeMismatch(format!(
            "model expects inputs of shape {:?}, dataset images are {:?}",
            model.input_shape(),
            ds.image_shape()
        )));
    }
    Ok(())
}

/// Mean loss and mean gradients over `batch` (dataset indices). Per-sample
/// results are reduced in sample order via [`Exec::fold_ordered`].
pub fn batch_gradients<M: Model<f32> + ?Sized>(
    model: &M,
    ds: &LabeledDataset,
    batch: &[usize],
    keep_prob: Option<f64>,
    dropout_seed: (u64, u64),
    exec: Exec,
) -> Result<(f64, Vec<Tensor<f32>>)> {
    let shapes: Vec<Vec<usize>> = model.params().iter().map(|p| p.shape().to_vec()).collect();
    let zeros = || -> Result<(f64, Vec<Tensor<f32>>)> {
        Ok((0.0, shapes.iter().map(|s| Tensor::zeros(s)).collect::<Result<_>>()?))
    };
    let total = exec.fold_ordered(
        batch.len(),
        zeros,
        |acc, k| {
            let Ok((loss_sum, grads)) = acc else { return };
            let i = batch[k];
            let mut rng = Rng::indexed(dropout_seed.0, "dropout", &[dropout_seed.1, k as u64]);
            let dropout = keep_prob.map(|p| (p, &mut rng));
            match model.loss_and_grads(ds.image(i), ds.label(i), dropout) {
                Ok((loss, g)) => {
                    *loss_sum += loss as f64;
                    for (a, b) in grads.iter_mut().zip(&g) {
                        axpy(1.0, b.data(), a.data_mut());
                    }
                }
                Err(e) => *acc = Err(e),
            }
        },
        |a, b| match (a.as_mut(), b) {
            (Ok((la, ga)), Ok((lb, gb))) => {
                *la += lb;
                for (x, y) in ga.iter_mut().zip(&gb) {
                    axpy(1.0, y.data(), x.data_mut());
                }
            }
            (Ok(_), Err(e)) => *a = Err(e),
            _ => {}
        },
    );
    let (loss, mut grads) = total.ok_or_else(|| Error::InvalidArgument("empty batch".into()))??;
    let inv = 1.0 / batch.len() as f32;
    grads.iter_mut().for_each(|g| g.scale(inv));
    Ok((loss / batch.len() as f64, grads))
}

/// Minibatch SGD over the training split, evaluating on the test split after
/// every epoch. `on_epoch` sees the model and stats after each epoch.
pub fn train_observed<M: Model<f32>>(
    model: &mut M,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
    exec: Exec,
    mut on_epoch: impl FnMut(&M, &EpochStats),
) -> Result<TrainReport> {
    let train = ds.train_indices()?.to_vec();
    let test = ds.test_indices()?.to_vec();
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("train and test splits must be non-empty".into()));
    }
    if cfg.batch_size == 0 || !(cfg.lr >= 0.0) {
        return Err(Error::InvalidArgument(format!("invalid training configuration {cfg:?}")));
    }
    check_input(model, ds)?;
    let trainable = model.trainable_mask();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut last_eval = None;
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let perm = Rng::indexed(cfg.seed, "shuffle", &[epoch as u64]).permutation(train.len());
        let order: Vec<usize> = perm.into_iter().map(|k| train[k]).collect();
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let step = (epoch as u64) << 32 | b as u64;
            let (loss, grads) = batch_gradients(&*model, ds, batch, cfg.keep_prob, (cfg.seed, step), exec)?;
            loss_sum += loss * batch.len() as f64;
            sgd_step(&mut model.params_mut(), &grads, cfg.lr as f32, &trainable)?;
        }
        let eval = evaluate(&*model, ds, &test, exec)?;
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            test_accuracy: eval.accuracy,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(model, &stats);
        epochs.push(stats);
        last_eval = Some(eval);
    }
    let eval = match last_eval {
        Some(e) => e,
        None => evaluate(&*model, ds, &test, exec)?,
    };
    Ok(TrainReport {
        epochs,
        confusion: eval.confusion,
        misclassified: eval.misclassified,
    })
}

pub fn train<M: Model<f32>>(model: &mut M, ds: &LabeledDataset, cfg: &TrainConfig, exec: Exec) -> Result<TrainReport> {
    train_observed(model, ds, cfg, exec, |_, _| {})
}
