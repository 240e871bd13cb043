use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

/// Inverted-dropout gate. `mask` is `None` when the gate is the identity
/// (inference mode or `keep_prob == 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T> {
    pub keep_prob: f64,
    pub mode: Mode,
    pub mask: Option<Tensor<T>>,
}

impl<T: Real> DropoutMask<T> {
    pub fn backward(&self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        match &self.mask {
            None => Ok(grad.clone()),
            Some(m) => {
                if m.len() != grad.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "dropout mask {:?} vs gradient {:?}",
                        m.shape(),
                        grad.shape()
                    )));
                }
                let data = grad.data().iter().zip(m.data()).map(|(&g, &k)| g * k).collect();
                Tensor::from_vec(grad.shape(), data)
            }
        }
    }
}

/// Zeroes each unit with probability `1 - keep_prob` and scales survivors by
/// `1 / keep_prob` in training mode. Inference mode is the identity and
/// never touches `rng`.
pub fn dropout_apply<T: Real>(
    activations: &Tensor<T>,
    keep_prob: f64,
    rng: &mut Rng,
    mode: Mode,
) -> Result<(Tensor<T>, DropoutMask<T>)> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep probability must be in (0, 1], got {keep_prob}"
        )));
    }
    if mode == Mode::Inference || keep_prob == 1.0 {
        return Ok((
            activations.clone(),
            DropoutMask {
                keep_prob,
                mode,
                mask: None,
            },
        ));
    }
    let scale = T::of(1.0 / keep_prob);
    let mask: Vec<T> = (0..activations.len())
        .map(|_| if rng.bernoulli(keep_prob) { scale } else { T::zero() })
        .collect();
    let gated = activations
        .data()
        .iter()
        .zip(&mask)
        .map(|(&a, &k)| a * k)
        .collect();
    Ok((
        Tensor::from_vec(activations.shape(), gated)?,
        DropoutMask {
            keep_prob,
            mode,
            mask: Some(Tensor::from_vec(activations.shape(), mask)?),
        },
    ))
}
