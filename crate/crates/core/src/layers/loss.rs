use std::str::FromStr;

use crate::error::{Error, Result};
use crate::real::{sigmoid, Real};

pub(crate) fn softmax_in_place<T: Real>(xs: &mut [T]) {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x = *x / total;
    }
}

pub fn softmax<T: Real>(xs: &[T]) -> Vec<T> {
    let mut out = xs.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Output head applied to the raw scores of the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossHead {
    /// Softmax probabilities with cross-entropy loss.
    #[default]
    SoftmaxCrossEntropy,
    /// Sigmoid outputs with mean squared error against one-hot targets.
    SigmoidMse,
}

impl LossHead {
    /// Loss and `dL/dscores` for one sample.
    pub fn loss_and_grad<T: Real>(self, scores: &[T], label: usize) -> (T, Vec<T>) {
        match self {
            LossHead::SoftmaxCrossEntropy => {
                let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
                let lse = max + scores.iter().map(|&s| (s - max).exp()).sum::<T>().ln();
                let mut grad = softmax(scores);
                grad[label] -= T::one();
                (lse - scores[label], grad)
            }
            LossHead::SigmoidMse => {
                let k = T::of(scores.len() as f64);
                let mut loss = T::zero();
                let grad = scores
                    .iter()
                    .enumerate()
                    .map(|(c, &s)| {
                        let o = sigmoid(s);
                        let target = if c == label { T::one() } else { T::zero() };
                        let e = o - target;
                        loss += e * e;
                        T::of(2.0) * e * o * (T::one() - o) / k
                    })
                    .collect();
                (loss / k, grad)
            }
        }
    }

    /// Class probabilities from raw scores. For the MSE head these are the
    /// sigmoid outputs renormalized to sum to one.
    pub fn probabilities<T: Real>(self, scores: &[T]) -> Vec<T> {
        match self {
            LossHead::SoftmaxCrossEntropy => softmax(scores),
            LossHead::SigmoidMse => {
                let o: Vec<T> = scores.iter().map(|&s| sigmoid(s)).collect();
                let total: T = o.iter().copied().sum();
                o.into_iter().map(|v| v / total).collect()
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossHead::SoftmaxCrossEntropy => "xent",
            LossHead::SigmoidMse => "mse",
        }
    }
}

impl FromStr for LossHead {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xent" => Ok(LossHead::SoftmaxCrossEntropy),
            "mse" => Ok(LossHead::SigmoidMse),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss head {other:?} (expected xent or mse)"
            ))),
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
