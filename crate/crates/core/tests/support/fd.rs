//! Finite-difference gradient oracles shared by the core tests and the
//! acceptance suite. Each check returns the worst max-norm relative error
//! over `INSTANCES` random instances.

use hbdr::layers::{dropout_apply, Activation, ConvLayer, FcLayer, LossHead, MaxPoolLayer, Mode};
use hbdr::network::{CnnArch, ConvSpec};
use hbdr::rbm::RbmParams;
use hbdr::{dbn, Cnn, Model, Rng, Tensor};

pub const INSTANCES: usize = 100;
const STEP: f64 = 1e-6;

/// Max-norm relative error between analytic and numeric gradients.
fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(1e-8, f64::max);
    diff / scale
}

fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + STEP;
            let up = f(&xp);
            xp[i] = x[i] - STEP;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn randn(shape: &[usize], rng: &mut Rng) -> Tensor<f64> {
    Tensor::rand_normal(shape, 0.0, 1.0, rng).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn with_data(t: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), data.to_vec()).unwrap()
}

pub fn conv_layer() -> f64 {
    let mut rng = Rng::new(11);
    let mut worst: f64 = 0.0;
    for n in 0..INSTANCES {
        let in_maps = 1 + rng.below(3);
        let out_maps = 1 + rng.below(3);
        let h = 1 + rng.below(6);
        let w = 1 + rng.below(6);
        let sizes: Vec<usize> = [1, 3, 5].into_iter().filter(|&k| k <= h.min(w)).collect();
        let k = sizes[rng.below(sizes.len())];
        let act = if n % 2 == 0 { Activation::Sigmoid } else { Activation::Identity };
        let input = randn(&[in_maps, h, w], &mut rng);
        let layer = ConvLayer::new(randn(&[out_maps, in_maps, k, k], &mut rng), randn(&[out_maps], &mut rng)).unwrap();
        let (out, cache) = layer.forward(&input, act).unwrap();
        let proj = randn(out.shape(), &mut rng);
        let grads = layer.backward(&proj, &cache, true).unwrap();

        let loss = |l: &ConvLayer<f64>, x: &Tensor<f64>| dot(l.forward(x, act).unwrap().0.data(), proj.data());
        let num_in = numeric_grad(input.data(), |d| loss(&layer, &with_data(&input, d)));
        let num_k = numeric_grad(layer.kernels.data(), |d| {
            let l = ConvLayer::new(with_data(&layer.kernels, d), layer.bias.clone()).unwrap();
            loss(&l, &input)
        });
        let num_b = numeric_grad(layer.bias.data(), |d| {
            let l = ConvLayer::new(layer.kernels.clone(), with_data(&layer.bias, d)).unwrap();
            loss(&l, &input)
        });
        worst = worst
            .max(rel_err(grads.input.as_ref().unwrap().data(), &num_in))
            .max(rel_err(grads.kernels.data(), &num_k))
            .max(rel_err(grads.bias.data(), &num_b));
    }
    worst
}

/// Random input whose window maxima beat the runner-up by a clear margin, so
/// finite differences never cross a tie.
fn untied_pool_input(maps: usize, side: usize, window: usize, rng: &mut Rng) -> Tensor<f64> {
    loop {
        let t = randn(&[maps, side, side], rng);
        let ok = (0..maps).all(|m| {
            (0..side / window).all(|oy| {
                (0..side / window).all(|ox| {
                    let mut vals: Vec<f64> = (0..window * window)
                        .map(|q| t[t.offset(&[m, oy * window + q / window, ox * window + q % window])])
                        .collect();
                    vals.sort_by(|a, b| b.total_cmp(a));
                    vals.len() < 2 || vals[0] - vals[1] > 1e-3
                })
            })
        });
        if ok {
            return t;
        }
    }
}

pub fn maxpool() -> f64 {
    let mut rng = Rng::new(12);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let window = 1 + rng.below(3);
        let side = window * (1 + rng.below(6 / window));
        let maps = 1 + rng.below(3);
        let pool = MaxPoolLayer::new(window).unwrap();
        let input = untied_pool_input(maps, side, window, &mut rng);
        let (out, cache) = pool.forward(&input).unwrap();
        let proj = randn(out.shape(), &mut rng);
        let grad = pool.backward(&proj, &cache).unwrap();
        assert!((grad.sum() - proj.sum()).abs() < 1e-12);
        let num = numeric_grad(input.data(), |d| dot(pool.forward(&with_data(&input, d)).unwrap().0.data(), proj.data()));
        worst = worst.max(rel_err(grad.data(), &num));
    }
    worst
}

pub fn fc_layer() -> f64 {
    let mut rng = Rng::new(13);
    let mut worst: f64 = 0.0;
    let acts = [Activation::Identity, Activation::Sigmoid, Activation::Softmax];
    for n in 0..INSTANCES {
        let act = acts[n % 3];
        let inputs = 1 + rng.below(8);
        let outputs = 1 + rng.below(6);
        let input = randn(&[inputs], &mut rng);
        let layer = FcLayer::new(randn(&[outputs, inputs], &mut rng), randn(&[outputs], &mut rng)).unwrap();
        let (out, cache) = layer.forward(&input, act).unwrap();
        let proj = randn(out.shape(), &mut rng);
        let grads = layer.backward(&proj, &cache, true).unwrap();
        let loss = |l: &FcLayer<f64>, x: &Tensor<f64>| dot(l.forward(x, act).unwrap().0.data(), proj.data());
        let num_in = numeric_grad(input.data(), |d| loss(&layer, &with_data(&input, d)));
        let num_w = numeric_grad(layer.weights.data(), |d| {
            loss(&FcLayer::new(with_data(&layer.weights, d), layer.bias.clone()).unwrap(), &input)
        });
        let num_b = numeric_grad(layer.bias.data(), |d| {
            loss(&FcLayer::new(layer.weights.clone(), with_data(&layer.bias, d)).unwrap(), &input)
        });
        worst = worst
            .max(rel_err(grads.input.as_ref().unwrap().data(), &num_in))
            .max(rel_err(grads.weights.data(), &num_w))
            .max(rel_err(grads.bias.data(), &num_b));
    }
    worst
}

pub fn loss_heads() -> f64 {
    let mut rng = Rng::new(14);
    let mut worst: f64 = 0.0;
    for n in 0..INSTANCES {
        let head = if n % 2 == 0 { LossHead::SoftmaxCrossEntropy } else { LossHead::SigmoidMse };
        let k = 2 + rng.below(9);
        let label = rng.below(k);
        let scores: Vec<f64> = (0..k).map(|_| 3.0 * rng.normal()).collect();
        let (_, g) = head.loss_and_grad(&scores, label);
        let num = numeric_grad(&scores, |s| head.loss_and_grad(s, label).0);
        worst = worst.max(rel_err(&g, &num));
    }
    worst
}

pub fn dropout() -> f64 {
    let mut rng = Rng::new(15);
    let mut worst: f64 = 0.0;
    for n in 0..INSTANCES {
        let len = 1 + rng.below(20);
        let keep = [0.5, 0.8, 1.0][n % 3];
        let seed = rng.next_u64();
        let x = randn(&[len], &mut rng);
        let proj = randn(&[len], &mut rng);
        let (_, mask) = dropout_apply(&x, keep, &mut Rng::new(seed), Mode::Training).unwrap();
        let grad = mask.backward(&proj).unwrap();
        let num = numeric_grad(x.data(), |d| {
            let (y, _) = dropout_apply(&with_data(&x, d), keep, &mut Rng::new(seed), Mode::Training).unwrap();
            dot(y.data(), proj.data())
        });
        worst = worst.max(rel_err(grad.data(), &num));
    }
    worst
}

fn shrunken_arch() -> CnnArch {
    CnnArch {
        input_size: 8,
        convs: vec![ConvSpec { maps: 2, kernel: 5 }, ConvSpec { maps: 4, kernel: 1 }],
        pool: 2,
        hidden: vec![6],
        classes: 3,
    }
}

/// Checks every parameter gradient of `model` against finite differences of
/// the same loss, with dropout masks pinned by reseeding.
fn model_worst<M: Model<f64>>(model: &mut M, input: &[f64], label: usize, dropout: Option<(f64, u64)>) -> f64 {
    let loss = |m: &M| {
        let mut r = dropout.map(|(_, s)| Rng::new(s));
        let d = dropout.map(|(p, _)| p).zip(r.as_mut());
        m.loss_and_grads(input, label, d).unwrap().0
    };
    let mut r = dropout.map(|(_, s)| Rng::new(s));
    let (_, grads) = model.loss_and_grads(input, label, dropout.map(|(p, _)| p).zip(r.as_mut())).unwrap();
    let mut worst: f64 = 0.0;
    for (p, g) in grads.iter().enumerate() {
        let base = model.params()[p].data().to_vec();
        let mut num = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            model.params_mut()[p].data_mut()[i] = base[i] + STEP;
            let up = loss(model);
            model.params_mut()[p].data_mut()[i] = base[i] - STEP;
            let down = loss(model);
            model.params_mut()[p].data_mut()[i] = base[i];
            num.push((up - down) / (2.0 * STEP));
        }
        worst = worst.max(rel_err(g.data(), &num));
    }
    worst
}

pub fn shrunken_cnn() -> f64 {
    let mut rng = Rng::new(16);
    let mut worst: f64 = 0.0;
    for n in 0..INSTANCES {
        let head = if n % 4 == 3 { LossHead::SigmoidMse } else { LossHead::SoftmaxCrossEntropy };
        let mut cnn = Cnn::<f64>::zeros(shrunken_arch(), head).unwrap();
        for p in cnn.params_mut() {
            *p = Tensor::rand_normal(p.shape(), 0.0, 0.7, &mut rng).unwrap();
        }
        let input: Vec<f64> = (0..64).map(|_| rng.uniform()).collect();
        let dropout = (n % 2 == 1).then(|| (0.5, rng.next_u64()));
        worst = worst.max(model_worst(&mut cnn, &input, rng.below(3), dropout));
    }
    worst
}

pub fn unrolled_dbn() -> f64 {
    let mut rng = Rng::new(17);
    let mut worst: f64 = 0.0;
    for n in 0..INSTANCES {
        let stack: Vec<RbmParams<f64>> = [(8, 5), (5, 4)]
            .iter()
            .map(|&(v, h)| {
                RbmParams::from_tensors(randn(&[v, h], &mut rng), randn(&[v], &mut rng), randn(&[h], &mut rng)).unwrap()
            })
            .collect();
        let mut net = dbn::classifier_from_stack(&stack, 3, &mut rng).unwrap();
        let input: Vec<f64> = (0..8).map(|_| rng.uniform()).collect();
        let dropout = (n % 2 == 1).then(|| (0.5, rng.next_u64()));
        worst = worst.max(model_worst(&mut net, &input, rng.below(3), dropout));
    }
    worst
}
