//! Dense row-major arrays of rank 1 to 4.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::real::{self, Real};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > 4 || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Square identity matrix.
    pub fn identity(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        Ok(t)
    }

    /// I.i.d. normal draws. `std == 0` yields exactly `mean` everywhere.
    pub fn rand_normal(shape: &[usize], mean: f64, std: f64, rng: &mut Rng) -> Result<Self> {
        if !(std >= 0.0) || !std.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "standard deviation must be finite and non-negative, got {std}"
            )));
        }
        let n = check_shape(shape)?;
        let data = (0..n).map(|_| T::of(mean + std * rng.normal())).collect();
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Row-major flat offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank");
        let mut off = 0;
        for (i, (&ix, &dim)) in index.iter().zip(&self.shape).enumerate() {
            assert!(ix < dim, "index {ix} out of bounds for axis {i} of size {dim}");
            off = off * dim + ix;
        }
        off
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn map_sigmoid(&self) -> Self {
        self.map(real::sigmoid)
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| U::of(x.as_f64())).collect(),
        }
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn scale(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    /// `self += alpha * other`; shapes must agree.
    pub fn add_scaled(&mut self, alpha: T, other: &Tensor<T>) -> Result<()> {
        self.same_shape(other)?;
        real::axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn norm_sq(&self) -> T {
        real::dot(&self.data, &self.data)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn same_shape(&self, other: &Tensor<T>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.as_matrix()?;
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::from_vec(&[c, r], out)
    }

    fn as_matrix(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::ShapeMismatch(format!(
                "expected a rank-2 tensor, got {:?}",
                self.shape
            ))),
        }
    }

    /// Standard matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Self> {
        let (m, k) = self.as_matrix()?;
        let (k2, n) = other.as_matrix()?;
        if k != k2 {
            return Err(Error::ShapeMismatch(format!(
                "matmul inner dimensions {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a != T::zero() {
                    real::axpy(a, &other.data[p * n..(p + 1) * n], row);
                }
            }
        }
        Tensor::from_vec(&[m, n], out)
    }
}

impl<T> Index<usize> for Tensor<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for Tensor<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}
