//! Forward and backward passes for the CNN building blocks.
//!
//! Every layer is a pure function of `(input, parameters)` that returns its
//! output plus a per-call cache; backward consumes that cache. Nothing is
//! stored on the layer itself, so a layer can be shared across threads that
//! process different samples.

mod conv;
mod dropout;
mod fc;
mod loss;
mod pool;

pub use conv::{ConvCache, ConvGrads, ConvLayer};
pub use dropout::{dropout_apply, DropoutMask, Mode};
pub use fc::{FcCache, FcGrads, FcLayer};
pub use loss::{argmax, softmax, LossHead};
pub use pool::{MaxPoolLayer, PoolCache};

use crate::real::{sigmoid, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub(crate) fn apply_in_place<T: Real>(self, xs: &mut [T]) {
        match self {
            Activation::Identity => {}
            Activation::Sigmoid => xs.iter_mut().for_each(|x| *x = sigmoid(*x)),
            Activation::Softmax => loss::softmax_in_place(xs),
        }
    }

    /// Turns `dL/d(output)` into `dL/d(pre-activation)` given the activated
    /// output, in place.
    pub(crate) fn backprop_in_place<T: Real>(self, output: &[T], grad: &mut [T]) {
        match self {
            Activation::Identity => {}
            Activation::Sigmoid => {
                for (g, &y) in grad.iter_mut().zip(output) {
                    *g *= y * (T::one() - y);
                }
            }
            Activation::Softmax => {
                let gs: T = grad.iter().zip(output).map(|(&g, &s)| g * s).sum();
                for (g, &s) in grad.iter_mut().zip(output) {
                    *g = s * (*g - gs);
                }
            }
        }
    }
}
