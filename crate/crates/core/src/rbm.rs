//! Bernoulli-Bernoulli restricted Boltzmann machines.
//!
//! Energy of a joint state is
//! `E(v, h) = -sum_i a_i v_i - sum_j b_j h_j - sum_ij v_i h_j w_ij`.
//! Training uses CD-k with momentum and an L2 weight penalty. For models with
//! at most [`ENUMERATION_LIMIT`] units the partition function, the
//! log-likelihood and its gradient are also available exactly, by brute-force
//! enumeration; those oracles are what the CD implementation is tested
//! against.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::real::{axpy, dot, sigmoid, Real};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Largest `n_visible + n_hidden` the exact oracles will enumerate.
pub const ENUMERATION_LIMIT: usize = 20;

/// Weights `w: [n_visible, n_hidden]`, visible biases `a`, hidden biases `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams<T = f32> {
    pub w: Tensor<T>,
    pub a: Tensor<T>,
    pub b: Tensor<T>,
}

/// CD-k hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CdConfig {
    pub k: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 penalty on weights (not biases).
    pub weight_penalty: f64,
    pub batch_size: usize,
}

impl Default for CdConfig {
    fn default() -> Self {
        CdConfig {
            k: 1,
            learning_rate: 0.1,
            momentum: 0.5,
            weight_penalty: 2e-4,
            batch_size: 50,
        }
    }
}

impl CdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k >= 1
            && self.learning_rate >= 0.0
            && self.batch_size >= 1
            && self.weight_penalty >= 0.0
            && (0.0..1.0).contains(&self.momentum);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid CD configuration {self:?}")))
        }
    }
}

/// Gradient-shaped triple, also used as the momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmGrad<T = f32> {
    pub w: Vec<T>,
    pub a: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> RbmGrad<T> {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        RbmGrad {
            w: vec![T::zero(); n_visible * n_hidden],
            a: vec![T::zero(); n_visible],
            b: vec![T::zero(); n_hidden],
        }
    }

    fn add(&mut self, other: &RbmGrad<T>) {
        axpy(T::one(), &other.w, &mut self.w);
        axpy(T::one(), &other.a, &mut self.a);
        axpy(T::one(), &other.b, &mut self.b);
    }

    pub fn flatten(&self) -> Vec<T> {
        self.w.iter().chain(&self.a).chain(&self.b).copied().collect()
    }
}

/// Result of one alternating Gibbs sweep `v -> h -> v'`.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSample<T> {
    pub h_sample: Vec<T>,
    pub v_sample: Vec<T>,
    pub h_probs: Vec<T>,
    pub v_probs: Vec<T>,
}

fn check_unit_interval<T: Real>(xs: &[T]) -> Result<()> {
    if let Some(x) = xs.iter().find(|&&x| !(x >= T::zero() && x <= T::one())) {
        return Err(Error::InvalidArgument(format!(
            "RBM visible data must lie in [0, 1], found {x}"
        )));
    }
    Ok(())
}

fn sample_bernoulli<T: Real>(probs: &[T], rng: &mut Rng) -> Vec<T> {
    probs
        .iter()
        .map(|&p| if rng.uniform() < p.as_f64() { T::one() } else { T::zero() })
        .collect()
}

impl<T: Real> RbmParams<T> {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Result<Self> {
        Ok(RbmParams {
            w: Tensor::zeros(&[n_visible, n_hidden])?,
            a: Tensor::zeros(&[n_visible])?,
            b: Tensor::zeros(&[n_hidden])?,
        })
    }

    /// Weights `N(0, 0.01^2)`, biases zero.
    pub fn init(n_visible: usize, n_hidden: usize, rng: &mut Rng) -> Result<Self> {
        Ok(RbmParams {
            w: Tensor::rand_normal(&[n_visible, n_hidden], 0.0, 0.01, rng)?,
            ..Self::zeros(n_visible, n_hidden)?
        })
    }

    pub fn from_tensors(w: Tensor<T>, a: Tensor<T>, b: Tensor<T>) -> Result<Self> {
        match *w.shape() {
            [nv, nh] if a.shape() == [nv] && b.shape() == [nh] => Ok(RbmParams { w, a, b }),
            _ => Err(Error::ShapeMismatch(format!(
                "RBM weights {:?} with visible bias {:?} and hidden bias {:?}",
                w.shape(),
                a.shape(),
                b.shape()
            ))),
        }
    }

    pub fn n_visible(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn n_hidden(&self) -> usize {
        self.w.shape()[1]
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::ShapeMismatch(format!(
                "{what} has {got} units, RBM expects {want}"
            )));
        }
        Ok(())
    }

    pub fn energy(&self, v: &[T], h: &[T]) -> Result<T> {
        self.check_len("visible vector", v.len(), self.n_visible())?;
        self.check_len("hidden vector", h.len(), self.n_hidden())?;
        let nh = self.n_hidden();
        let mut e = -dot(self.a.data(), v) - dot(self.b.data(), h);
        for (i, &vi) in v.iter().enumerate() {
            if vi != T::zero() {
                e -= vi * dot(&self.w.data()[i * nh..(i + 1) * nh], h);
            }
        }
        Ok(e)
    }

    /// `p(h_j = 1 | v) = sigmoid(b_j + sum_i v_i w_ij)`.
    pub fn prob_h_given_v(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_len("visible vector", v.len(), self.n_visible())?;
        let nh = self.n_hidden();
        let mut act = self.b.data().to_vec();
        for (i, &vi) in v.iter().enumerate() {
            if vi != T::zero() {
                axpy(vi, &self.w.data()[i * nh..(i + 1) * nh], &mut act);
            }
        }
        act.iter_mut().for_each(|x| *x = sigmoid(*x));
        Ok(act)
    }

    /// `p(v_i = 1 | h) = sigmoid(a_i + sum_j h_j w_ij)`.
    pub fn prob_v_given_h(&self, h: &[T]) -> Result<Vec<T>> {
        self.check_len("hidden vector", h.len(), self.n_hidden())?;
        let nh = self.n_hidden();
        Ok((0..self.n_visible())
            .map(|i| sigmoid(self.a[i] + dot(&self.w.data()[i * nh..(i + 1) * nh], h)))
            .collect())
    }

    pub fn gibbs_step(&self, v: &[T], rng: &mut Rng) -> Result<GibbsSample<T>> {
        let h_probs = self.prob_h_given_v(v)?;
        let h_sample = sample_bernoulli(&h_probs, rng);
        let v_probs = self.prob_v_given_h(&h_sample)?;
        let v_sample = sample_bernoulli(&v_probs, rng);
        Ok(GibbsSample {
            h_sample,
            v_sample,
            h_probs,
            v_probs,
        })
    }

    /// CD-k statistics for one visible vector, summed into `acc`:
    /// `v h^T` with hidden probabilities on the data side minus the same
    /// statistic at the end of a k-step chain started from sampled hiddens.
    /// Intermediate visible states are probabilities; hiddens are sampled
    /// except at the last step.
    fn accumulate_cd(&self, v: &[T], k: usize, rng: &mut Rng, acc: &mut RbmGrad<T>) -> Result<()> {
        let nh = self.n_hidden();
        let h_data = self.prob_h_given_v(v)?;
        let mut h = sample_bernoulli(&h_data, rng);
        let mut v_recon = Vec::new();
        let mut h_recon = Vec::new();
        for step in 1..=k {
            v_recon = self.prob_v_given_h(&h)?;
            h_recon = self.prob_h_given_v(&v_recon)?;
            if step < k {
                h = sample_bernoulli(&h_recon, rng);
            }
        }
        for i in 0..self.n_visible() {
            let row = &mut acc.w[i * nh..(i + 1) * nh];
            if v[i] != T::zero() {
                axpy(v[i], &h_data, row);
            }
            axpy(-v_recon[i], &h_recon, row);
        }
        for i in 0..self.n_visible() {
            acc.a[i] += v[i] - v_recon[i];
        }
        for j in 0..nh {
            acc.b[j] += h_data[j] - h_recon[j];
        }
        Ok(())
    }

    /// Mean CD-k gradient estimate over a batch (no momentum, no penalty).
    ///
    /// Each sample's chain draws from its own generator derived from one
    /// draw of `rng`, so the result does not depend on execution order.
    pub fn cd_gradient(&self, batch: &[&[T]], k: usize, rng: &mut Rng, exec: Exec) -> Result<RbmGrad<T>> {
        for v in batch {
            self.check_len("visible vector", v.len(), self.n_visible())?;
            check_unit_interval(v)?;
        }
        let batch_seed = rng.next_u64();
        let (nv, nh) = (self.n_visible(), self.n_hidden());
        let total = exec.fold_ordered(
            batch.len(),
            || Ok(RbmGrad::zeros(nv, nh)),
            |acc: &mut Result<RbmGrad<T>>, i| {
                if let Ok(g) = acc {
                    let mut r = Rng::indexed(batch_seed, "gibbs", &[i as u64]);
                    if let Err(e) = self.accumulate_cd(batch[i], k, &mut r, g) {
                        *acc = Err(e);
                    }
                }
            },
            |a, b| match (a.as_mut(), b) {
                (Ok(x), Ok(y)) => x.add(&y),
                (Ok(_), Err(e)) => *a = Err(e),
                _ => {}
            },
        );
        let mut g = match total {
            Some(r) => r?,
            None => return Err(Error::InvalidArgument("empty CD batch".into())),
        };
        let inv = T::one() / T::of(batch.len() as f64);
        g.w.iter_mut().chain(&mut g.a).chain(&mut g.b).for_each(|x| *x *= inv);
        Ok(g)
    }

    /// One momentum-smoothed CD-k step on a batch:
    /// `vel = momentum * vel + lr * (grad - penalty * w)`, `theta += vel`.
    pub fn cd_update(&mut self, batch: &[&[T]], cfg: &CdConfig, rng: &mut Rng, velocity: &mut RbmGrad<T>, exec: Exec) -> Result<()> {
        cfg.validate()?;
        let g = self.cd_gradient(batch, cfg.k, rng, exec)?;
        let (m, lr, pen) = (T::of(cfg.momentum), T::of(cfg.learning_rate), T::of(cfg.weight_penalty));
        for ((vel, w), gw) in velocity.w.iter_mut().zip(self.w.data_mut()).zip(&g.w) {
            *vel = m * *vel + lr * (*gw - pen * *w);
            *w += *vel;
        }
        for ((vel, a), ga) in velocity.a.iter_mut().zip(self.a.data_mut()).zip(&g.a) {
            *vel = m * *vel + lr * *ga;
            *a += *vel;
        }
        for ((vel, b), gb) in velocity.b.iter_mut().zip(self.b.data_mut()).zip(&g.b) {
            *vel = m * *vel + lr * *gb;
            *b += *vel;
        }
        Ok(())
    }

    /// One epoch of CD over `data` (rows of `n_visible` values) in a
    /// seed-determined shuffled order.
    pub fn train_epoch(&mut self, data: &[&[T]], cfg: &CdConfig, rng: &mut Rng, velocity: &mut RbmGrad<T>, exec: Exec) -> Result<()> {
        let order = rng.permutation(data.len());
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[T]> = chunk.iter().map(|&i| data[i]).collect();
            self.cd_update(&batch, cfg, rng, velocity, exec)?;
        }
        Ok(())
    }

    /// Hidden probabilities for every row of `data`, row-major `[N, n_hidden]`.
    pub fn hidden_probs_batch(&self, data: &[&[T]], exec: Exec) -> Result<Vec<Vec<T>>> {
        exec.map_range(data.len(), |i| self.prob_h_given_v(data[i]))
            .into_iter()
            .collect()
    }

    fn guard(&self) -> Result<()> {
        let (nv, nh) = (self.n_visible(), self.n_hidden());
        if nv + nh > ENUMERATION_LIMIT {
            return Err(Error::EnumerationGuard {
                visible: nv,
                hidden: nh,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(())
    }

    /// `(v, h, -E(v, h))` for every joint binary state, in f64.
    fn joint_states(&self) -> Result<Vec<(Vec<f64>, Vec<f64>, f64)>> {
        self.guard()?;
        let p = self.to_f64();
        let (nv, nh) = (self.n_visible(), self.n_hidden());
        let mut out = Vec::with_capacity(1 << (nv + nh));
        for vs in 0..1usize << nv {
            let v = bits(vs, nv);
            for hs in 0..1usize << nh {
                let h = bits(hs, nh);
                let e = p.energy(&v, &h)?;
                out.push((v.clone(), h, -e));
            }
        }
        Ok(out)
    }

    fn to_f64(&self) -> RbmParams<f64> {
        RbmParams {
            w: self.w.cast(),
            a: self.a.cast(),
            b: self.b.cast(),
        }
    }

    /// `log Z` by enumeration (log-sum-exp).
    pub fn exact_log_partition(&self) -> Result<f64> {
        let states = self.joint_states()?;
        Ok(log_sum_exp(states.iter().map(|s| s.2)))
    }

    /// `Z = sum_{v,h} exp(-E(v,h))` by enumeration.
    pub fn exact_partition(&self) -> Result<f64> {
        let states = self.joint_states()?;
        Ok(states.iter().map(|s| s.2.exp()).sum())
    }

    /// `p(v, h) = exp(-E(v,h)) / Z`.
    pub fn exact_joint_probability(&self, v: &[f64], h: &[f64]) -> Result<f64> {
        let log_z = self.exact_log_partition()?;
        Ok((-self.to_f64().energy(v, h)? - log_z).exp())
    }

    /// `log p(v) = log sum_h exp(-E(v,h)) - log Z`.
    fn log_marginal(&self, v: &[f64], log_z: f64) -> Result<f64> {
        let p = self.to_f64();
        let nh = self.n_hidden();
        let mut terms = Vec::with_capacity(1 << nh);
        for hs in 0..1usize << nh {
            terms.push(-p.energy(v, &bits(hs, nh))?);
        }
        Ok(log_sum_exp(terms.into_iter()) - log_z)
    }

    pub fn exact_marginal(&self, v: &[f64]) -> Result<f64> {
        Ok(self.log_marginal(v, self.exact_log_partition()?)?.exp())
    }

    /// Mean `log p(v)` over a dataset of binary vectors.
    pub fn exact_log_likelihood(&self, data: &[Vec<f64>]) -> Result<f64> {
        let log_z = self.exact_log_partition()?;
        let mut total = 0.0;
        for v in data {
            self.check_len("visible vector", v.len(), self.n_visible())?;
            total += self.log_marginal(v, log_z)?;
        }
        Ok(total / data.len() as f64)
    }

    /// Gradient of [`exact_log_likelihood`](Self::exact_log_likelihood):
    /// data statistics (hidden units at their conditional means) minus model
    /// statistics from full enumeration of the joint distribution.
    pub fn exact_gradient(&self, data: &[Vec<f64>]) -> Result<RbmGrad<f64>> {
        let states = self.joint_states()?;
        let (nv, nh) = (self.n_visible(), self.n_hidden());
        let p = self.to_f64();
        let n = data.len() as f64;
        let mut g = RbmGrad::<f64>::zeros(nv, nh);
        for v in data {
            self.check_len("visible vector", v.len(), nv)?;
            let ph = p.prob_h_given_v(v)?;
            for i in 0..nv {
                g.a[i] += v[i] / n;
                for j in 0..nh {
                    g.w[i * nh + j] += v[i] * ph[j] / n;
                }
            }
            for j in 0..nh {
                g.b[j] += ph[j] / n;
            }
        }
        let log_z = log_sum_exp(states.iter().map(|s| s.2));
        for (v, h, neg_e) in &states {
            let pr = (neg_e - log_z).exp();
            for i in 0..nv {
                g.a[i] -= pr * v[i];
                for j in 0..nh {
                    g.w[i * nh + j] -= pr * v[i] * h[j];
                }
            }
            for j in 0..nh {
                g.b[j] -= pr * h[j];
            }
        }
        Ok(g)
    }
}

/// Binary expansion of `state` into `n` units, least significant bit first.
pub fn bits(state: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((state >> i) & 1) as f64).collect()
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// The six 2x2 bars-and-stripes patterns (blank, full, two rows, two columns).
pub fn bars_and_stripes_2x2() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 0.0, 0.0, 0.0],
        vec![1.0, 1.0, 1.0, 1.0],
        vec![1.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0, 1.0],
        vec![1.0, 0.0, 1.0, 0.0],
        vec![0.0, 1.0, 0.0, 1.0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(nv: usize, nh: usize, w: &[f64], a: &[f64], b: &[f64]) -> RbmParams<f64> {
        RbmParams::from_tensors(
            Tensor::from_vec(&[nv, nh], w.to_vec()).unwrap(),
            Tensor::from_vec(&[nv], a.to_vec()).unwrap(),
            Tensor::from_vec(&[nh], b.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn energy_examples() {
        let z = RbmParams::<f64>::zeros(3, 2).unwrap();
        assert_eq!(z.energy(&[1.0, 0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);

        let p = params(1, 1, &[2.0], &[0.5], &[0.25]);
        assert_eq!(p.energy(&[1.0], &[1.0]).unwrap(), -2.75);

        let p = params(2, 2, &[1.0, -3.0, 0.5, 2.0], &[0.7, -0.2], &[0.4, -1.1]);
        let e = p.energy(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((e - -(0.4 - 1.1)).abs() < 1e-15);
        assert!(p.energy(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn conditional_examples() {
        let z = RbmParams::<f64>::zeros(3, 2).unwrap();
        assert!(z.prob_h_given_v(&[1.0, 0.0, 1.0]).unwrap().iter().all(|&p| p == 0.5));
        assert!(z.prob_v_given_h(&[1.0, 0.0]).unwrap().iter().all(|&p| p == 0.5));

        let sat = params(1, 1, &[0.0], &[1000.0], &[1000.0]);
        assert!((sat.prob_h_given_v(&[0.0]).unwrap()[0] - 1.0).abs() <= f64::EPSILON);
        assert!((sat.prob_v_given_h(&[0.0]).unwrap()[0] - 1.0).abs() <= f64::EPSILON);

        // sigmoid(-1 + 1*1 + 0*5) = 0.5
        let p = params(2, 1, &[1.0, 5.0], &[0.0, 0.0], &[-1.0]);
        assert_eq!(p.prob_h_given_v(&[1.0, 0.0]).unwrap(), vec![0.5]);
        // sigmoid(-1 + 1*1 + 0*5) = 0.5 with the roles swapped
        let p = params(1, 2, &[1.0, 5.0], &[-1.0], &[0.0, 0.0]);
        assert_eq!(p.prob_v_given_h(&[1.0, 0.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn gibbs_determinism_and_saturation() {
        let z = RbmParams::<f64>::zeros(6, 5).unwrap();
        let v = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let a = z.gibbs_step(&v, &mut Rng::new(4)).unwrap();
        let b = z.gibbs_step(&v, &mut Rng::new(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.h_probs.iter().chain(&a.v_probs).all(|&p| p == 0.5));

        let sat = params(2, 2, &[0.0; 4], &[-1000.0, 1000.0], &[1000.0, -1000.0]);
        for seed in 0..5 {
            let s = sat.gibbs_step(&[1.0, 1.0], &mut Rng::new(seed)).unwrap();
            assert_eq!(s.h_sample, vec![1.0, 0.0]);
            assert_eq!(s.v_sample, vec![0.0, 1.0]);
        }
    }

    #[test]
    fn gibbs_hidden_frequency_matches_conditional() {
        let mut rng = Rng::new(17);
        let p = RbmParams::<f64>::init(4, 3, &mut rng).unwrap();
        let p = RbmParams {
            w: p.w.map(|x| x * 80.0),
            ..p
        };
        let v = [1.0, 0.0, 1.0, 1.0];
        let expect = p.prob_h_given_v(&v).unwrap();
        let mut counts = [0.0; 3];
        let n = 10_000;
        for _ in 0..n {
            let s = p.gibbs_step(&v, &mut rng).unwrap();
            for j in 0..3 {
                counts[j] += s.h_sample[j];
            }
        }
        for j in 0..3 {
            assert!((counts[j] / n as f64 - expect[j]).abs() <= 0.02);
        }
    }

    #[test]
    fn cd_fixed_point_and_zero_rate() {
        // Saturated model reproduces its data exactly: only the penalty acts.
        let mut p = params(2, 2, &[30.0, -30.0, -30.0, 30.0], &[-15.0, -15.0], &[-15.0, -15.0]);
        let batch: Vec<&[f64]> = vec![&[1.0, 0.0], &[0.0, 1.0]];
        let g = p.cd_gradient(&batch, 1, &mut Rng::new(1), Exec::Sequential).unwrap();
        assert!(g.flatten().iter().all(|x| x.abs() < 1e-6), "{g:?}");

        let cfg = CdConfig {
            momentum: 0.0,
            ..CdConfig::default()
        };
        let before = p.clone();
        let mut vel = RbmGrad::zeros(2, 2);
        p.cd_update(&batch, &cfg, &mut Rng::new(1), &mut vel, Exec::Sequential).unwrap();
        for (w1, w0) in p.w.data().iter().zip(before.w.data()) {
            let shrink = -0.1 * 2e-4 * w0;
            assert!((w1 - w0 - shrink).abs() < 1e-6);
        }

        let cfg = CdConfig {
            learning_rate: 0.0,
            ..CdConfig::default()
        };
        let mut q = RbmParams::<f64>::init(3, 2, &mut Rng::new(2)).unwrap();
        let before = q.clone();
        let batch: Vec<&[f64]> = vec![&[1.0, 0.0, 1.0]];
        let mut vel = RbmGrad::zeros(3, 2);
        for _ in 0..3 {
            q.cd_update(&batch, &cfg, &mut Rng::new(3), &mut vel, Exec::Sequential).unwrap();
        }
        assert_eq!(q, before);
    }

    #[test]
    fn rejects_non_unit_data_and_bad_config() {
        let mut p = RbmParams::<f64>::zeros(2, 1).unwrap();
        let mut vel = RbmGrad::zeros(2, 1);
        let batch: Vec<&[f64]> = vec![&[1.5, 0.0]];
        assert!(p
            .cd_update(&batch, &CdConfig::default(), &mut Rng::new(0), &mut vel, Exec::Sequential)
            .is_err());
        let bad = CdConfig {
            k: 0,
            ..CdConfig::default()
        };
        let batch: Vec<&[f64]> = vec![&[1.0, 0.0]];
        assert!(p.cd_update(&batch, &bad, &mut Rng::new(0), &mut vel, Exec::Sequential).is_err());
    }

    #[test]
    fn partition_examples() {
        let z = RbmParams::<f64>::zeros(2, 1).unwrap();
        assert!((z.exact_partition().unwrap() - 8.0).abs() < 1e-12);
        let p = params(1, 1, &[2f64.ln()], &[0.0], &[0.0]);
        assert!((p.exact_partition().unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(
            RbmParams::<f64>::zeros(12, 9).unwrap().exact_partition(),
            Err(Error::EnumerationGuard { .. })
        ));
    }

    #[test]
    fn uniform_model_likelihood() {
        let z = RbmParams::<f64>::zeros(4, 3).unwrap();
        let ll = z.exact_log_likelihood(&bars_and_stripes_2x2()).unwrap();
        assert!((ll + 4.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cd_is_reproducible_and_thread_independent() {
        let data = bars_and_stripes_2x2();
        let rows: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
        let run = |exec| {
            let mut p = RbmParams::<f64>::init(4, 3, &mut Rng::new(5)).unwrap();
            let mut vel = RbmGrad::zeros(4, 3);
            let mut rng = Rng::new(6);
            for _ in 0..10 {
                p.train_epoch(&rows, &CdConfig::default(), &mut rng, &mut vel, exec).unwrap();
            }
            p
        };
        let a = run(Exec::Sequential);
        assert_eq!(a, run(Exec::Sequential));
        assert_eq!(a, run(Exec::Parallel));
    }
}
