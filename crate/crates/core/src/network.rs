//! Network containers and the [`Model`] trait the training loop drives.

use crate::error::{Error, Result};
use crate::layers::{
    dropout_apply, Activation, ConvCache, ConvLayer, DropoutMask, FcCache, FcLayer, LossHead,
    MaxPoolLayer, Mode, PoolCache,
};
use crate::real::Real;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Trainable-parameter accounting for one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    pub name: String,
    pub count: usize,
}

/// A classifier with a flat, ordered list of parameter tensors.
pub trait Model<T: Real>: Sync {
    fn params(&self) -> Vec<&Tensor<T>>;
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;
    fn param_names(&self) -> Vec<String>;
    /// Whether each parameter (same order as `params`) receives updates.
    fn trainable_mask(&self) -> Vec<bool> {
        vec![true; self.params().len()]
    }
    /// Per-layer parameter accounting, in the convention of the layer table
    /// the architecture is described by.
    fn layer_params(&self) -> Vec<LayerParams>;
    fn input_shape(&self) -> Vec<usize>;
    fn classes(&self) -> usize;
    fn head(&self) -> LossHead;
    /// Raw class scores in inference mode.
    fn scores(&self, input: &[T]) -> Result<Vec<T>>;
    /// Loss and parameter gradients for one labeled sample. `dropout` carries
    /// the keep probability and the sample's generator when training with
    /// dropout.
    fn loss_and_grads(&self, input: &[T], label: usize, dropout: Option<(f64, &mut Rng)>) -> Result<(T, Vec<Tensor<T>>)>;

    fn probabilities(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.head().probabilities(&self.scores(input)?))
    }

    /// Argmax class (ties to the lowest index) and class probabilities.
    fn predict(&self, input: &[T]) -> Result<(usize, Vec<T>)> {
        let p = self.probabilities(input)?;
        Ok((crate::layers::argmax(&p), p))
    }
}

/// Sum of the per-layer accounting of a model.
pub fn param_count<T: Real, M: Model<T> + ?Sized>(model: &M) -> usize {
    model.layer_params().iter().map(|l| l.count).sum()
}

/// Number of scalars actually stored in the parameter tensors.
pub fn stored_param_count<T: Real, M: Model<T> + ?Sized>(model: &M) -> usize {
    model.params().iter().map(|t| t.len()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub maps: usize,
    pub kernel: usize,
}

/// Architecture of a conv/pool stack followed by fully connected layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnnArch {
    /// Side of the square single-channel input.
    pub input_size: usize,
    pub convs: Vec<ConvSpec>,
    pub pool: usize,
    /// Widths of the hidden fully connected layers.
    pub hidden: Vec<usize>,
    pub classes: usize,
}

impl Default for CnnArch {
    /// 32x32 -> C1 32@5x5 -> S1 -> C2 64@5x5 -> S2 -> F1 312 -> F2 10.
    fn default() -> Self {
        CnnArch {
            input_size: 32,
            convs: vec![ConvSpec { maps: 32, kernel: 5 }, ConvSpec { maps: 64, kernel: 5 }],
            pool: 2,
            hidden: vec![312],
            classes: 10,
        }
    }
}

impl CnnArch {
    /// Output shape of every layer: conv, pool pairs then the dense layers.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let pool = MaxPoolLayer::new(self.pool)?;
        let mut shape = vec![1, self.input_size, self.input_size];
        let mut out = Vec::new();
        for c in &self.convs {
            let (h, w) = (shape[1], shape[2]);
            if h < c.kernel || w < c.kernel || c.kernel % 2 == 0 {
                return Err(Error::ShapeMismatch(format!(
                    "{}x{} kernel does not fit a {h}x{w} input",
                    c.kernel, c.kernel
                )));
            }
            shape = vec![c.maps, h - c.kernel + 1, w - c.kernel + 1];
            out.push(shape.clone());
            shape = pool.output_shape(&shape)?.to_vec();
            out.push(shape.clone());
        }
        for &h in self.hidden.iter().chain([&self.classes]) {
            out.push(vec![h]);
        }
        Ok(out)
    }

    pub fn flat_features(&self) -> Result<usize> {
        let shapes = self.layer_shapes()?;
        Ok(match self.convs.len() {
            0 => self.input_size * self.input_size,
            n => shapes[2 * n - 1].iter().product(),
        })
    }

    pub fn feature_map_shape(&self) -> Result<Vec<usize>> {
        let shapes = self.layer_shapes()?;
        Ok(match self.convs.len() {
            0 => vec![1, self.input_size, self.input_size],
            n => shapes[2 * n - 1].clone(),
        })
    }
}

/// Convolutional classifier: sigmoid conv layers each followed by max-pooling,
/// sigmoid hidden dense layers, and a linear score layer read by the loss head.
#[derive(Debug, Clone, PartialEq)]
pub struct Cnn<T = f32> {
    pub arch: CnnArch,
    pub convs: Vec<ConvLayer<T>>,
    pub pool: MaxPoolLayer,
    pub fcs: Vec<FcLayer<T>>,
    pub head: LossHead,
    /// Keeps the first convolution layer fixed during training.
    pub freeze_first: bool,
}

struct CnnTrace<T> {
    conv: Vec<(ConvCache<T>, PoolCache)>,
    fc: Vec<(Option<DropoutMask<T>>, FcCache<T>)>,
    feature_shape: Vec<usize>,
    scores: Vec<T>,
}

impl<T: Real> Cnn<T> {
    /// All-zero parameters with shapes taken from `arch`.
    pub fn zeros(arch: CnnArch, head: LossHead) -> Result<Self> {
        arch.layer_shapes()?;
        let mut convs = Vec::new();
        let mut in_maps = 1;
        for c in &arch.convs {
            convs.push(ConvLayer::zeros(c.maps, in_maps, c.kernel, c.kernel)?);
            in_maps = c.maps;
        }
        let mut fcs = Vec::new();
        let mut fan_in = arch.flat_features()?;
        for &h in arch.hidden.iter().chain([&arch.classes]) {
            fcs.push(FcLayer::zeros(h, fan_in)?);
            fan_in = h;
        }
        Ok(Cnn {
            pool: MaxPoolLayer::new(arch.pool)?,
            arch,
            convs,
            fcs,
            head,
            freeze_first: false,
        })
    }

    /// Assembles a network from explicit layers, checking they chain.
    pub fn from_layers(arch: CnnArch, convs: Vec<ConvLayer<T>>, fcs: Vec<FcLayer<T>>, head: LossHead) -> Result<Self> {
        let template = Self::zeros(arch, head)?;
        let check = |what: &str, a: &[usize], b: &[usize]| {
            if a != b {
                Err(Error::ShapeMismatch(format!("{what}: expected {b:?}, got {a:?}")))
            } else {
                Ok(())
            }
        };
        if convs.len() != template.convs.len() || fcs.len() != template.fcs.len() {
            return Err(Error::ShapeMismatch("layer count does not match architecture".into()));
        }
        for (i, (c, t)) in convs.iter().zip(&template.convs).enumerate() {
            check(&format!("C{} kernels", i + 1), c.kernels.shape(), t.kernels.shape())?;
        }
        for (i, (f, t)) in fcs.iter().zip(&template.fcs).enumerate() {
            check(&format!("F{} weights", i + 1), f.weights.shape(), t.weights.shape())?;
        }
        Ok(Cnn {
            convs,
            fcs,
            ..template
        })
    }

    fn run(&self, input: &[T], mut dropout: Option<(f64, &mut Rng)>) -> Result<CnnTrace<T>> {
        let side = self.arch.input_size;
        let mut x = Tensor::from_vec(&[1, side, side], input.to_vec()).map_err(|_| {
            Error::ShapeMismatch(format!(
                "network expects a 1x{side}x{side} image ({} values), got {}",
                side * side,
                input.len()
            ))
        })?;
        let mut conv = Vec::with_capacity(self.convs.len());
        for layer in &self.convs {
            let (y, cc) = layer.forward(&x, Activation::Sigmoid)?;
            let (p, pc) = self.pool.forward(&y)?;
            conv.push((cc, pc));
            x = p;
        }
        let feature_shape = x.shape().to_vec();
        let last = self.fcs.len().saturating_sub(1);
        let mut fc = Vec::with_capacity(self.fcs.len());
        for (i, layer) in self.fcs.iter().enumerate() {
            let mask = match dropout.as_mut() {
                Some((keep, rng)) => {
                    let (gated, mask) = dropout_apply(&x, *keep, rng, Mode::Training)?;
                    x = gated;
                    Some(mask)
                }
                None => None,
            };
            let act = if i == last { Activation::Identity } else { Activation::Sigmoid };
            let (y, cache) = layer.forward(&x, act)?;
            fc.push((mask, cache));
            x = y;
        }
        Ok(CnnTrace {
            conv,
            fc,
            feature_shape,
            scores: x.into_data(),
        })
    }

    /// Output shapes of every layer for one forward pass of `input`.
    pub fn trace_shapes(&self, input: &[T]) -> Result<Vec<Vec<usize>>> {
        let side = self.arch.input_size;
        let mut x = Tensor::from_vec(&[1, side, side], input.to_vec())?;
        let mut shapes = Vec::new();
        for layer in &self.convs {
            let (y, _) = layer.forward(&x, Activation::Sigmoid)?;
            shapes.push(y.shape().to_vec());
            let (p, _) = self.pool.forward(&y)?;
            shapes.push(p.shape().to_vec());
            x = p;
        }
        for (i, layer) in self.fcs.iter().enumerate() {
            let act = if i + 1 == self.fcs.len() { Activation::Identity } else { Activation::Sigmoid };
            let (y, _) = layer.forward(&x, act)?;
            shapes.push(y.shape().to_vec());
            x = y;
        }
        Ok(shapes)
    }
}

impl<T: Real> Model<T> for Cnn<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        let mut v = Vec::new();
        for c in &self.convs {
            v.push(&c.kernels);
            v.push(&c.bias);
        }
        for f in &self.fcs {
            v.push(&f.weights);
            v.push(&f.bias);
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = Vec::new();
        for c in &mut self.convs {
            v.push(&mut c.kernels);
            v.push(&mut c.bias);
        }
        for f in &mut self.fcs {
            v.push(&mut f.weights);
            v.push(&mut f.bias);
        }
        v
    }

    fn param_names(&self) -> Vec<String> {
        let mut v = Vec::new();
        for i in 1..=self.convs.len() {
            v.push(format!("c{i}.kernels"));
            v.push(format!("c{i}.bias"));
        }
        for i in 1..=self.fcs.len() {
            v.push(format!("f{i}.weights"));
            v.push(format!("f{i}.bias"));
        }
        v
    }

    fn trainable_mask(&self) -> Vec<bool> {
        let mut m = vec![true; self.params().len()];
        if self.freeze_first && !self.convs.is_empty() {
            m[0] = false;
            m[1] = false;
        }
        m
    }

    /// Convolutions count `(kernel area + 1)` per input/output map pair; a
    /// dense layer fed by a stack of `h x w` maps counts `(h*w + 1)` per map
    /// and output, and one fed by a vector counts `(inputs + 1)` per output.
    fn layer_params(&self) -> Vec<LayerParams> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            let (kh, kw) = c.kernel_size();
            out.push(LayerParams {
                name: format!("C{}", i + 1),
                count: (kh * kw + 1) * c.in_maps() * c.out_maps(),
            });
            out.push(LayerParams {
                name: format!("S{}", i + 1),
                count: 0,
            });
        }
        let fmap = self.arch.feature_map_shape().unwrap_or_default();
        for (i, f) in self.fcs.iter().enumerate() {
            let count = match fmap.as_slice() {
                [maps, h, w] if i == 0 && h * w > 1 => f.outputs() * maps * (h * w + 1),
                _ => f.outputs() * (f.inputs() + 1),
            };
            out.push(LayerParams {
                name: format!("F{}", i + 1),
                count,
            });
        }
        out
    }

    fn input_shape(&self) -> Vec<usize> {
        vec![1, self.arch.input_size, self.arch.input_size]
    }

    fn classes(&self) -> usize {
        self.arch.classes
    }

    fn head(&self) -> LossHead {
        self.head
    }

    fn scores(&self, input: &[T]) -> Result<Vec<T>> {
        Ok(self.run(input, None)?.scores)
    }

    fn loss_and_grads(&self, input: &[T], label: usize, dropout: Option<(f64, &mut Rng)>) -> Result<(T, Vec<Tensor<T>>)> {
        if label >= self.arch.classes {
            return Err(Error::InvalidArgument(format!("label {label} out of range")));
        }
        let trace = self.run(input, dropout)?;
        let (loss, g) = self.head.loss_and_grad(&trace.scores, label);
        let mut g = Tensor::from_vec(&[g.len()], g)?;

        let mut fc_grads = Vec::with_capacity(self.fcs.len());
        for (i, (layer, (mask, cache))) in self.fcs.iter().zip(&trace.fc).enumerate().rev() {
            let want_input = i > 0 || !self.convs.is_empty();
            let fg = layer.backward(&g, cache, want_input)?;
            if let Some(gx) = fg.input {
                g = match mask {
                    Some(m) => m.backward(&gx)?,
                    None => gx,
                };
            }
            fc_grads.push((fg.weights, fg.bias));
        }
        fc_grads.reverse();

        let mut g = g.reshape(&trace.feature_shape)?;
        let mut conv_grads = Vec::with_capacity(self.convs.len());
        for (i, (layer, (cc, pc))) in self.convs.iter().zip(&trace.conv).enumerate().rev() {
            let gy = self.pool.backward(&g, pc)?;
            let want_input = i > 0;
            let cg = layer.backward(&gy, cc, want_input)?;
            if let Some(gx) = cg.input {
                g = gx;
            }
            conv_grads.push((cg.kernels, cg.bias));
        }
        conv_grads.reverse();

        let mut grads = Vec::with_capacity(2 * (self.convs.len() + self.fcs.len()));
        for (k, b) in conv_grads.into_iter().chain(fc_grads) {
            grads.push(k);
            grads.push(b);
        }
        Ok((loss, grads))
    }
}

/// Fully connected stack: sigmoid hidden layers and a linear score layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward<T = f32> {
    pub layers: Vec<FcLayer<T>>,
    pub head: LossHead,
    /// Number of leading layers held fixed during training.
    pub frozen_layers: usize,
}

impl<T: Real> FeedForward<T> {
    pub fn new(layers: Vec<FcLayer<T>>, head: LossHead) -> Result<Self> {
        for w in layers.windows(2) {
            if w[0].outputs() != w[1].inputs() {
                return Err(Error::ShapeMismatch(format!(
                    "layer with {} outputs feeds layer with {} inputs",
                    w[0].outputs(),
                    w[1].inputs()
                )));
            }
        }
        Ok(FeedForward {
            layers,
            head,
            frozen_layers: 0,
        })
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs())
    }

    /// Activations of every hidden layer (sigmoid), excluding the score layer.
    pub fn hidden_activations(&self, input: &[T]) -> Result<Vec<Vec<T>>> {
        let mut x = input.to_vec();
        let mut out = Vec::new();
        for layer in self.layers.iter().take(self.layers.len().saturating_sub(1)) {
            x = layer.forward_slice(&x, Activation::Sigmoid)?;
            out.push(x.clone());
        }
        Ok(out)
    }
}

impl<T: Real> Model<T> for FeedForward<T> {
    fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| [&l.weights, &l.bias]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    fn param_names(&self) -> Vec<String> {
        (1..=self.layers.len())
            .flat_map(|i| [format!("l{i}.weights"), format!("l{i}.bias")])
            .collect()
    }

    fn trainable_mask(&self) -> Vec<bool> {
        (0..self.layers.len())
            .flat_map(|i| {
                let t = i >= self.frozen_layers;
                [t, t]
            })
            .collect()
    }

    fn layer_params(&self) -> Vec<LayerParams> {
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| LayerParams {
                name: format!("L{}", i + 1),
                count: l.outputs() * (l.inputs() + 1),
            })
            .collect()
    }

    fn input_shape(&self) -> Vec<usize> {
        vec![self.input_len()]
    }

    fn classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs())
    }

    fn head(&self) -> LossHead {
        self.head
    }

    fn scores(&self, input: &[T]) -> Result<Vec<T>> {
        let mut x = input.to_vec();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let act = if i == last { Activation::Identity } else { Activation::Sigmoid };
            x = layer.forward_slice(&x, act)?;
        }
        Ok(x)
    }

    fn loss_and_grads(&self, input: &[T], label: usize, mut dropout: Option<(f64, &mut Rng)>) -> Result<(T, Vec<Tensor<T>>)> {
        if label >= self.classes() {
            return Err(Error::InvalidArgument(format!("label {label} out of range")));
        }
        let mut x = Tensor::from_vec(&[input.len()], input.to_vec())?;
        let last = self.layers.len().saturating_sub(1);
        let mut trace = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            // Dropout gates the inputs of every layer above the first.
            let mask = match dropout.as_mut() {
                Some((keep, rng)) if i > 0 => {
                    let (gated, mask) = dropout_apply(&x, *keep, rng, Mode::Training)?;
                    x = gated;
                    Some(mask)
                }
                _ => None,
            };
            let act = if i == last { Activation::Identity } else { Activation::Sigmoid };
            let (y, cache) = layer.forward(&x, act)?;
            trace.push((mask, cache));
            x = y;
        }
        let (loss, g) = self.head.loss_and_grad(x.data(), label);
        let mut g = Tensor::from_vec(&[g.len()], g)?;
        let mut grads = Vec::with_capacity(2 * self.layers.len());
        for (i, (layer, (mask, cache))) in self.layers.iter().zip(&trace).enumerate().rev() {
            let lg = layer.backward(&g, cache, i > 0)?;
            if let Some(gx) = lg.input {
                g = gx;
            }
            if let Some(m) = mask {
                g = m.backward(&g)?;
            }
            grads.push(lg.bias);
            grads.push(lg.weights);
        }
        grads.reverse();
        Ok((loss, grads))
    }
}
