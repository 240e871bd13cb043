//! Enumeration oracles for small RBMs, shared by the core tests and the
//! acceptance suite.

#![allow(dead_code)]

use hbdr::rbm::{bars_and_stripes_2x2, bits, CdConfig, RbmGrad, RbmParams};
use hbdr::{Exec, Rng, Tensor};

pub fn random_rbm(nv: usize, nh: usize, std: f64, rng: &mut Rng) -> RbmParams<f64> {
    let mut t = |shape: &[usize]| Tensor::rand_normal(shape, 0.0, std, rng).unwrap();
    let (w, a, b) = (t(&[nv, nh]), t(&[nv]), t(&[nh]));
    RbmParams::from_tensors(w, a, b).unwrap()
}

pub fn flat(r: &RbmParams<f64>) -> Vec<f64> {
    r.w.data().iter().chain(r.a.data()).chain(r.b.data()).copied().collect()
}

pub fn set_flat(r: &mut RbmParams<f64>, theta: &[f64]) {
    let (nw, na) = (r.w.len(), r.a.len());
    r.w.data_mut().copy_from_slice(&theta[..nw]);
    r.a.data_mut().copy_from_slice(&theta[nw..nw + na]);
    r.b.data_mut().copy_from_slice(&theta[nw + na..]);
}

pub fn random_binary(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect()
}

/// Worst `|Σ_{v,h} p(v,h) - 1|` and worst disagreement between the marginal
/// and the summed joint, over random RBMs with up to 7 visible and 6 hidden
/// units.
pub fn normalization_worst(trials: usize, seed: u64) -> (f64, f64) {
    let mut rng = Rng::new(seed);
    let (mut sum_err, mut marginal_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..trials {
        let nv = 1 + rng.below(7);
        let nh = 1 + rng.below(6);
        let rbm = random_rbm(nv, nh, 1.0, &mut rng);
        let mut total = 0.0;
        for sv in 0..1usize << nv {
            let v = bits(sv, nv);
            let from_joint: f64 = (0..1usize << nh)
                .map(|sh| rbm.exact_joint_probability(&v, &bits(sh, nh)).unwrap())
                .sum();
            let marginal = rbm.exact_marginal(&v).unwrap();
            assert!(marginal > 0.0 && marginal <= 1.0);
            marginal_err = marginal_err.max((marginal - from_joint).abs());
            total += from_joint;
        }
        sum_err = sum_err.max((total - 1.0).abs());
    }
    (sum_err, marginal_err)
}

/// Worst relative error of `exact_gradient` against central differences of
/// `exact_log_likelihood`.
pub fn gradient_fd_worst(trials: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let nv = 2 + rng.below(4);
        let nh = 1 + rng.below(4);
        let mut rbm = random_rbm(nv, nh, 0.8, &mut rng);
        let data: Vec<Vec<f64>> = (0..1 + rng.below(5)).map(|_| random_binary(nv, &mut rng)).collect();
        let analytic = rbm.exact_gradient(&data).unwrap().flatten();
        let theta = flat(&rbm);
        let mut numeric = Vec::with_capacity(theta.len());
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] = theta[i] + h;
            set_flat(&mut rbm, &t);
            let up = rbm.exact_log_likelihood(&data).unwrap();
            t[i] = theta[i] - h;
            set_flat(&mut rbm, &t);
            let down = rbm.exact_log_likelihood(&data).unwrap();
            numeric.push((up - down) / (2.0 * h));
        }
        set_flat(&mut rbm, &theta);
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
        let scale = analytic.iter().chain(&numeric).map(|v| v.abs()).fold(1e-8, f64::max);
        worst = worst.max(diff / scale);
    }
    worst
}

pub fn train_cd(rbm: &mut RbmParams<f64>, data: &[Vec<f64>], cfg: &CdConfig, epochs: usize, seed: u64) {
    let rows: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
    let mut rng = Rng::new(seed);
    let mut vel = RbmGrad::zeros(rbm.n_visible(), rbm.n_hidden());
    for _ in 0..epochs {
        rbm.train_epoch(&rows, cfg, &mut rng, &mut vel, Exec::Sequential).unwrap();
    }
}

/// Mean exact log-likelihood of 2×2 bars-and-stripes under a 4×4 RBM before
/// and after 100 epochs of CD-1 with the default hyperparameters.
pub fn bars_and_stripes_cd1(seed: u64) -> (f64, f64) {
    let data = bars_and_stripes_2x2();
    let mut rbm = RbmParams::<f64>::init(4, 4, &mut Rng::new(seed)).unwrap();
    let before = rbm.exact_log_likelihood(&data).unwrap();
    train_cd(&mut rbm, &data, &CdConfig::default(), 100, seed);
    (before, rbm.exact_log_likelihood(&data).unwrap())
}
