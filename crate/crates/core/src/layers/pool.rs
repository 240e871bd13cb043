use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Non-overlapping `n x n` max-pooling with no trainable parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPoolLayer {
    pub window: usize,
}

impl Default for MaxPoolLayer {
    fn default() -> Self {
        MaxPoolLayer { window: 2 }
    }
}

/// Flat input index of the selected maximum for every output cell.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoolCache {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

impl MaxPoolLayer {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("pooling window must be >= 1".into()));
        }
        Ok(MaxPoolLayer { window })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 3]> {
        let n = self.window;
        match *input {
            [c, h, w] if h % n == 0 && w % n == 0 => Ok([c, h / n, w / n]),
            _ => Err(Error::ShapeMismatch(format!(
                "max-pool window {n} does not divide input {input:?}"
            ))),
        }
    }

    /// Ties go to the first maximum in row-major window order.
    pub fn forward<T: Real>(&self, input: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
        let [c, oh, ow] = self.output_shape(input.shape())?;
        let n = self.window;
        let (h, w) = (oh * n, ow * n);
        let x = input.data();
        let mut out = Vec::with_capacity(c * oh * ow);
        let mut argmax = Vec::with_capacity(c * oh * ow);
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = (ch * h + oy * n) * w + ox * n;
                    for dy in 0..n {
                        for dx in 0..n {
                            let idx = (ch * h + oy * n + dy) * w + ox * n + dx;
                            if x[idx] > x[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        let cache = PoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        };
        Ok((Tensor::from_vec(&[c, oh, ow], out)?, cache))
    }

    /// Routes each output gradient to its cached argmax; zeros elsewhere.
    pub fn backward<T: Real>(&self, grad_out: &Tensor<T>, cache: &PoolCache) -> Result<Tensor<T>> {
        if cache.argmax.is_empty() {
            return Err(Error::MissingCache("max-pool"));
        }
        if grad_out.len() != cache.argmax.len() {
            return Err(Error::ShapeMismatch(format!(
                "max-pool grad {:?} does not match {} cached cells",
                grad_out.shape(),
                cache.argmax.len()
            )));
        }
        let mut gx = Tensor::zeros(&cache.input_shape)?;
        for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
            gx[idx] += g;
        }
        Ok(gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_pool_shape() {
        let pool = MaxPoolLayer::default();
        let (out, _) = pool.forward(&Tensor::<f32>::zeros(&[32, 28, 28]).unwrap()).unwrap();
        assert_eq!(out.shape(), &[32, 14, 14]);
    }

    #[test]
    fn picks_max_and_records_position() {
        let pool = MaxPoolLayer::default();
        let x = Tensor::<f64>::from_vec(&[1, 2, 2], vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        let (out, cache) = pool.forward(&x).unwrap();
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(cache.argmax, vec![2]);
    }

    #[test]
    fn ties_break_to_first_in_window() {
        let pool = MaxPoolLayer::default();
        let x = Tensor::<f64>::full(&[2, 4, 6], 0.25).unwrap();
        let (out, cache) = pool.forward(&x).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.25));
        for (cell, &idx) in cache.argmax.iter().enumerate() {
            let (ch, rest) = (cell / 6, cell % 6);
            let (oy, ox) = (rest / 3, rest % 3);
            assert_eq!(idx, (ch * 4 + oy * 2) * 6 + ox * 2);
        }
    }

    #[test]
    fn routing_and_errors() {
        let pool = MaxPoolLayer::default();
        let x = Tensor::<f64>::from_vec(
            &[1, 2, 4],
            vec![0.0, 5.0, 1.0, 2.0, 3.0, -1.0, 7.0, 0.5],
        )
        .unwrap();
        let (out, cache) = pool.forward(&x).unwrap();
        let gx = pool
            .backward(&Tensor::full(out.shape(), 1.0).unwrap(), &cache)
            .unwrap();
        assert_eq!(gx.data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let gz = pool.backward(&Tensor::<f64>::zeros(out.shape()).unwrap(), &cache).unwrap();
        assert!(gz.data().iter().all(|&v| v == 0.0));

        assert!(pool.forward(&Tensor::<f64>::zeros(&[1, 3, 4]).unwrap()).is_err());
        assert!(matches!(
            pool.backward(&out, &PoolCache::default()),
            Err(Error::MissingCache(_))
        ));
    }
}
