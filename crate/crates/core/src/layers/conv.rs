use crate::error::{Error, Result};
use crate::layers::Activation;
use crate::real::{axpy, dot, Real};
use crate::tensor::Tensor;

/// Valid (unpadded), stride-1 cross-correlation layer.
///
/// `kernels` is `[out_maps, in_maps, kh, kw]`, `bias` is `[out_maps]`. Output
/// map `j` is `f(sum_i xcorr(input_i, kernel_ji) + bias_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T = f32> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Values saved by [`ConvLayer::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    input_shape: [usize; 3],
    /// im2col matrix `[in_maps*kh*kw, oh*ow]`.
    cols: Vec<T>,
    output: Tensor<T>,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Option<Tensor<T>>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvLayer<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let &[out_maps, _, kh, kw] = kernels.shape() else {
            return Err(Error::ShapeMismatch(format!(
                "convolution kernels must be rank 4, got {:?}",
                kernels.shape()
            )));
        };
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel size {kh}x{kw} must be odd"
            )));
        }
        if bias.shape() != [out_maps] {
            return Err(Error::ShapeMismatch(format!(
                "bias {:?} does not match {out_maps} output maps",
                bias.shape()
            )));
        }
        Ok(ConvLayer { kernels, bias })
    }

    pub fn zeros(out_maps: usize, in_maps: usize, kh: usize, kw: usize) -> Result<Self> {
        Self::new(
            Tensor::zeros(&[out_maps, in_maps, kh, kw])?,
            Tensor::zeros(&[out_maps])?,
        )
    }

    pub fn out_maps(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_maps(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernels.shape()[2], self.kernels.shape()[3])
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let (kh, kw) = self.kernel_size();
        match *input {
            [c, h, w] if c == self.in_maps() && h >= kh && w >= kw => {
                Ok([self.out_maps(), h - kh + 1, w - kw + 1])
            }
            _ => Err(Error::ShapeMismatch(format!(
                "convolution with {} input maps and {kh}x{kw} kernels cannot take input {input:?}",
                self.in_maps()
            ))),
        }
    }

    pub fn forward(&self, input: &Tensor<T>, activation: Activation) -> Result<(Tensor<T>, ConvCache<T>)> {
        let [out_maps, oh, ow] = self.output_shape(input.shape())?;
        let [c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2]];
        let (kh, kw) = self.kernel_size();
        let spatial = oh * ow;
        let patch = c * kh * kw;

        let x = input.data();
        let mut cols = vec![T::zero(); patch * spatial];
        for i in 0..c {
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = &mut cols[((i * kh + ky) * kw + kx) * spatial..][..spatial];
                    for y in 0..oh {
                        let src = &x[(i * h + y + ky) * w + kx..][..ow];
                        row[y * ow..(y + 1) * ow].copy_from_slice(src);
                    }
                }
            }
        }

        let k = self.kernels.data();
        let mut out = vec![T::zero(); out_maps * spatial];
        for j in 0..out_maps {
            let row = &mut out[j * spatial..(j + 1) * spatial];
            row.fill(self.bias[j]);
            for p in 0..patch {
                axpy(k[j * patch + p], &cols[p * spatial..(p + 1) * spatial], row);
            }
        }
        activation.apply_in_place(&mut out);
        let output = Tensor::from_vec(&[out_maps, oh, ow], out)?;
        let cache = ConvCache {
            input_shape: [c, h, w],
            cols,
            output: output.clone(),
            activation,
        };
        Ok((output, cache))
    }

    /// Gradients of the forward map. `want_input` skips the input gradient
    /// when false (first layer of a network).
    pub fn backward(&self, grad_out: &Tensor<T>, cache: &ConvCache<T>, want_input: bool) -> Result<ConvGrads<T>> {
        if cache.cols.is_empty() {
            return Err(Error::MissingCache("convolution"));
        }
        if grad_out.shape() != cache.output.shape() {
            return Err(Error::ShapeMismatch(format!(
                "convolution grad {:?} does not match forward output {:?}",
                grad_out.shape(),
                cache.output.shape()
            )));
        }
        let [c, h, w] = cache.input_shape;
        let (kh, kw) = self.kernel_size();
        let out_maps = self.out_maps();
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        let spatial = oh * ow;
        let patch = c * kh * kw;

        let mut delta = grad_out.data().to_vec();
        cache
            .activation
            .backprop_in_place(cache.output.data(), &mut delta);

        let mut gk = vec![T::zero(); out_maps * patch];
        let mut gb = vec![T::zero(); out_maps];
        for j in 0..out_maps {
            let dj = &delta[j * spatial..(j + 1) * spatial];
            gb[j] = dj.iter().copied().sum();
            for p in 0..patch {
                gk[j * patch + p] = dot(dj, &cache.cols[p * spatial..(p + 1) * spatial]);
            }
        }

        let input = if want_input {
            let k = self.kernels.data();
            let mut gcols = vec![T::zero(); patch * spatial];
            for j in 0..out_maps {
                let dj = &delta[j * spatial..(j + 1) * spatial];
                for p in 0..patch {
                    axpy(k[j * patch + p], dj, &mut gcols[p * spatial..(p + 1) * spatial]);
                }
            }
            let mut gx = vec![T::zero(); c * h * w];
            for i in 0..c {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let row = &gcols[((i * kh + ky) * kw + kx) * spatial..][..spatial];
                        for y in 0..oh {
                            let dst = &mut gx[(i * h + y + ky) * w + kx..][..ow];
                            for (d, &g) in dst.iter_mut().zip(&row[y * ow..(y + 1) * ow]) {
                                *d += g;
                            }
                        }
                    }
                }
            }
            Some(Tensor::from_vec(&[c, h, w], gx)?)
        } else {
            None
        };

        Ok(ConvGrads {
            input,
            kernels: Tensor::from_vec(self.kernels.shape(), gk)?,
            bias: Tensor::from_vec(&[out_maps], gb)?,
        })
    }
}
