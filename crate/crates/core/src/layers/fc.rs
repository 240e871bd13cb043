use crate::error::{Error, Result};
use crate::layers::Activation;
use crate::real::{axpy, dot, Real};
use crate::tensor::Tensor;

/// Fully connected layer, `out = f(W x + b)` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct FcCache<T> {
    input: Vec<T>,
    output: Vec<T>,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> FcLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let &[out, _] = weights.shape() else {
            return Err(Error::ShapeMismatch(format!(
                "fully connected weights must be rank 2, got {:?}",
                weights.shape()
            )));
        };
        if bias.shape() != [out] {
            return Err(Error::ShapeMismatch(format!(
                "bias {:?} does not match {out} outputs",
                bias.shape()
            )));
        }
        Ok(FcLayer { weights, bias })
    }

    pub fn zeros(out: usize, inputs: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[out, inputs])?, Tensor::zeros(&[out])?)
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    /// Accepts any input tensor with `inputs()` elements; feature maps are
    /// flattened in row-major order.
    pub fn forward(&self, input: &Tensor<T>, activation: Activation) -> Result<(Tensor<T>, FcCache<T>)> {
        let out = self.forward_slice(input.data(), activation)?;
        let cache = FcCache {
            input: input.data().to_vec(),
            output: out.clone(),
            activation,
        };
        Ok((Tensor::from_vec(&[self.outputs()], out)?, cache))
    }

    pub(crate) fn forward_slice(&self, x: &[T], activation: Activation) -> Result<Vec<T>> {
        let n_in = self.inputs();
        if x.len() != n_in {
            return Err(Error::ShapeMismatch(format!(
                "fully connected layer expects {n_in} inputs, got {}",
                x.len()
            )));
        }
        let w = self.weights.data();
        let mut out: Vec<T> = (0..self.outputs())
            .map(|o| dot(&w[o * n_in..(o + 1) * n_in], x) + self.bias[o])
            .collect();
        activation.apply_in_place(&mut out);
        Ok(out)
    }

    pub fn backward(&self, grad_out: &Tensor<T>, cache: &FcCache<T>, want_input: bool) -> Result<FcGrads<T>> {
        if cache.output.is_empty() {
            return Err(Error::MissingCache("fully connected"));
        }
        if grad_out.len() != self.outputs() || cache.input.len() != self.inputs() {
            return Err(Error::ShapeMismatch(format!(
                "fully connected grad {:?} / cached input {} vs layer {}x{}",
                grad_out.shape(),
                cache.input.len(),
                self.outputs(),
                self.inputs()
            )));
        }
        let n_in = self.inputs();
        let mut delta = grad_out.data().to_vec();
        cache.activation.backprop_in_place(&cache.output, &mut delta);

        let mut gw = vec![T::zero(); self.weights.len()];
        for (o, &d) in delta.iter().enumerate() {
            if d != T::zero() {
                axpy(d, &cache.input, &mut gw[o * n_in..(o + 1) * n_in]);
            }
        }
        let input = if want_input {
            let w = self.weights.data();
            let mut gx = vec![T::zero(); n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != T::zero() {
                    axpy(d, &w[o * n_in..(o + 1) * n_in], &mut gx);
                }
            }
            Some(Tensor::from_vec(&[n_in], gx)?)
        } else {
            None
        };
        Ok(FcGrads {
            input,
            weights: Tensor::from_vec(self.weights.shape(), gw)?,
            bias: Tensor::from_vec(&[self.outputs()], delta)?,
        })
    }
}
