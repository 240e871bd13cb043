//! Kernel banks used to initialize the first convolution layer.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Parameters of a real (cosine-phase) Gabor filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborSpec {
    /// Number of orientations, evenly spaced as `k * pi / orientations`.
    pub orientations: usize,
    /// Wavelengths in pixels per cycle.
    pub wavelengths: Vec<f64>,
    /// Phase offset in radians.
    pub phase: f64,
    /// Spatial aspect ratio of the envelope.
    pub aspect: f64,
    /// Envelope width as a multiple of the wavelength.
    pub sigma_ratio: f64,
}

impl Default for GaborSpec {
    fn default() -> Self {
        GaborSpec {
            orientations: 8,
            wavelengths: vec![2.0, 3.0, 4.0, 5.0],
            phase: 0.0,
            aspect: 0.5,
            sigma_ratio: 0.56,
        }
    }
}

impl GaborSpec {
    pub fn bank_size(&self) -> usize {
        self.orientations * self.wavelengths.len()
    }

    fn validate(&self) -> Result<()> {
        if self.orientations == 0 || self.wavelengths.is_empty() {
            return Err(Error::InvalidArgument("empty Gabor bank".into()));
        }
        if let Some(l) = self.wavelengths.iter().find(|&&l| !(l >= 2.0)) {
            return Err(Error::InvalidArgument(format!(
                "Gabor wavelength {l} is below two pixels per cycle"
            )));
        }
        if !(self.sigma_ratio > 0.0) || !(self.aspect > 0.0) {
            return Err(Error::InvalidArgument(
                "Gabor envelope width and aspect must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Samples one Gabor filter on the centered integer grid. Rows run along +y.
pub fn gabor_kernel(size: usize, theta: f64, wavelength: f64, spec: &GaborSpec) -> Vec<f64> {
    let half = (size / 2) as f64;
    let sigma = spec.sigma_ratio * wavelength;
    let (s, c) = theta.sin_cos();
    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        for col in 0..size {
            let x = col as f64 - half;
            let y = r as f64 - half;
            let xr = x * c + y * s;
            let yr = -x * s + y * c;
            let env = (-(xr * xr + spec.aspect * spec.aspect * yr * yr) / (2.0 * sigma * sigma)).exp();
            out.push(env * (2.0 * PI * xr / wavelength + spec.phase).cos());
        }
    }
    out
}

/// `[count, 1, size, size]` bank ordered wavelength-major: filter
/// `l * orientations + k` has wavelength `l` and orientation `k`.
///
/// With `normalize`, each filter is mean-subtracted and scaled to unit L2 norm.
pub fn gabor_bank<T: Real>(count: usize, size: usize, spec: &GaborSpec, normalize: bool) -> Result<Tensor<T>> {
    spec.validate()?;
    if size % 2 == 0 || size == 0 {
        return Err(Error::InvalidArgument(format!("filter size {size} must be odd")));
    }
    if count != spec.bank_size() {
        return Err(Error::InvalidArgument(format!(
            "bank of {count} filters is not {} orientations x {} wavelengths",
            spec.orientations,
            spec.wavelengths.len()
        )));
    }
    let mut data = Vec::with_capacity(count * size * size);
    for &lambda in &spec.wavelengths {
        for k in 0..spec.orientations {
            let theta = k as f64 * PI / spec.orientations as f64;
            let mut g = gabor_kernel(size, theta, lambda, spec);
            if normalize {
                let mean = g.iter().sum::<f64>() / g.len() as f64;
                g.iter_mut().for_each(|v| *v -= mean);
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    g.iter_mut().for_each(|v| *v /= norm);
                }
            }
            data.extend(g.into_iter().map(T::of));
        }
    }
    Tensor::from_vec(&[count, 1, size, size], data)
}

/// `[count, 1, size, size]` bank of i.i.d. `N(0, std^2)` entries.
pub fn gaussian_bank<T: Real>(count: usize, size: usize, std: f64, rng: &mut Rng) -> Result<Tensor<T>> {
    if !(std > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Gaussian filter std must be positive, got {std}"
        )));
    }
    Tensor::rand_normal(&[count, 1, size, size], 0.0, std, rng)
}
