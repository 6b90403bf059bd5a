//! Dense ReLU network with a single sigmoid output unit.
//!
//! Parameters live in one flat vector. Layer `l` maps `dims[l]` inputs to
//! `dims[l + 1]` outputs and stores its weights input-major
//! (`w[i * out + o]`) followed by its `out` biases. Input-major storage makes
//! the first layer cheap for sparse inputs: only rows of active features are
//! touched.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{params_hash, Bce, Classifier, Objective, Prediction, TrainConfig};
use crate::data::{Dataset, SparseVec};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    dims: Vec<usize>,
    params: Vec<T>,
    train_fingerprint: String,
}

/// Activations of one forward pass; `hidden[l]` is the ReLU output of
/// hidden layer `l`.
pub(crate) struct Trace<T> {
    hidden: Vec<Vec<T>>,
    logit: T,
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl<T: Scalar> MlpModel<T> {
    pub fn from_parts(dims: Vec<usize>, params: Vec<T>, train_fingerprint: String) -> Result<Self> {
        if dims.len() < 2 || *dims.last().unwrap() != 1 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("invalid layer dims {dims:?}")));
        }
        if params.len() != param_count(&dims) {
            return Err(Error::LengthMismatch { left: param_count(&dims), right: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("mlp parameters must be finite".into()));
        }
        Ok(Self { dims, params, train_fingerprint })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(dims: &[usize], seed: u64, train_fingerprint: String) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::glorot_with(dims, &mut rng, train_fingerprint)
    }

    fn glorot_with(dims: &[usize], rng: &mut impl Rng, train_fingerprint: String) -> Self {
        let mut params = Vec::with_capacity(param_count(dims));
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| T::of(rng.random_range(-limit..limit))));
            params.extend((0..fan_out).map(|_| T::zero()));
        }
        Self { dims: dims.to_vec(), params, train_fingerprint }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), params: vec![T::zero(); param_count(dims)], train_fingerprint: String::new() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn train_fingerprint(&self) -> &str {
        &self.train_fingerprint
    }

    pub(crate) fn set_train_fingerprint(&mut self, fp: String) {
        self.train_fingerprint = fp;
    }

    fn offsets(&self, layer: usize) -> (usize, usize) {
        let start: usize = self.dims[..=layer].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        (start, start + self.dims[layer] * self.dims[layer + 1])
    }

    pub(crate) fn forward(&self, x: &SparseVec<T>) -> Trace<T> {
        let n_layers = self.dims.len() - 1;
        let mut hidden: Vec<Vec<T>> = Vec::with_capacity(n_layers - 1);
        let mut logit = T::zero();
        for l in 0..n_layers {
            let out = self.dims[l + 1];
            let (w, b) = self.offsets(l);
            let mut z: Vec<T> = self.params[b..b + out].to_vec();
            if l == 0 {
                for (i, v) in x.iter() {
                    let row = &self.params[w + i * out..w + (i + 1) * out];
                    z.iter_mut().zip(row).for_each(|(zo, &wo)| *zo = *zo + v * wo);
                }
            } else {
                for (i, &a) in hidden[l - 1].iter().enumerate() {
                    if a == T::zero() {
                        continue;
                    }
                    let row = &self.params[w + i * out..w + (i + 1) * out];
                    z.iter_mut().zip(row).for_each(|(zo, &wo)| *zo = *zo + a * wo);
                }
            }
            if l + 1 == n_layers {
                logit = z[0];
            } else {
                z.iter_mut().for_each(|v| *v = v.max(T::zero()));
                hidden.push(z);
            }
        }
        Trace { hidden, logit }
    }

    pub fn logit(&self, x: &SparseVec<T>) -> T {
        self.forward(x).logit
    }

    /// Adds `d(loss)/d(params)` to `grad` given `d(loss)/d(logit)`.
    pub(crate) fn backward(&self, x: &SparseVec<T>, trace: &Trace<T>, d_logit: T, grad: &mut [T]) {
        let n_layers = self.dims.len() - 1;
        let mut delta = vec![d_logit];
        for l in (0..n_layers).rev() {
            let out = self.dims[l + 1];
            let (w, b) = self.offsets(l);
            grad[b..b + out].iter_mut().zip(&delta).for_each(|(g, &d)| *g = *g + d);
            if l == 0 {
                for (i, v) in x.iter() {
                    let g = &mut grad[w + i * out..w + (i + 1) * out];
                    g.iter_mut().zip(&delta).for_each(|(gi, &d)| *gi = *gi + v * d);
                }
            } else {
                let input = &trace.hidden[l - 1];
                let mut prev = vec![T::zero(); input.len()];
                for (i, &a) in input.iter().enumerate() {
                    if a == T::zero() {
                        // ReLU is flat here: no weight gradient contribution
                        // and no signal propagates further down.
                        continue;
                    }
                    let row = &self.params[w + i * out..w + (i + 1) * out];
                    let g = &mut grad[w + i * out..w + (i + 1) * out];
                    let mut back = T::zero();
                    for o in 0..out {
                        g[o] = g[o] + a * delta[o];
                        back = back + row[o] * delta[o];
                    }
                    prev[i] = back;
                }
                delta = prev;
            }
        }
    }

    /// Mean objective over `batch` (indices into `ds`) and its gradient.
    pub fn loss_and_grad(&self, ds: &Dataset<T>, batch: &[usize], loss: &dyn Objective<T>) -> (T, Vec<T>) {
        let mut grad = vec![T::zero(); self.params.len()];
        let value = self.accumulate(ds, batch, loss, &mut grad);
        (value, grad)
    }

    fn accumulate(&self, ds: &Dataset<T>, batch: &[usize], loss: &dyn Objective<T>, grad: &mut [T]) -> T {
        let scale = T::one() / T::of_usize(batch.len());
        let mut value = T::zero();
        for &i in batch {
            let x = ds.row(i);
            let trace = self.forward(x);
            let (l, dl) = loss.logit_loss(i, ds.labels()[i], trace.logit);
            value = value + l;
            self.backward(x, &trace, dl * scale, grad);
        }
        value * scale
    }

    pub fn loss(&self, ds: &Dataset<T>, batch: &[usize], loss: &dyn Objective<T>) -> T {
        let scale = T::one() / T::of_usize(batch.len());
        batch
            .iter()
            .map(|&i| loss.logit_loss(i, ds.labels()[i], self.logit(ds.row(i))).0)
            .fold(T::zero(), |a, l| a + l)
            * scale
    }
}

impl<T: Scalar> Classifier<T> for MlpModel<T> {
    fn n_features(&self) -> usize {
        self.dims[0]
    }

    fn score(&self, x: &SparseVec<T>) -> Result<T> {
        self.check_dim(x)?;
        Ok(sigmoid(self.logit(x)))
    }

    fn predict(&self, x: &SparseVec<T>) -> Result<Prediction<T>> {
        let score = self.score(x)?;
        Ok(Prediction { label: u8::from(score > T::of(0.5)), score })
    }

    fn fingerprint(&self) -> String {
        params_hash("mlp", &self.params)
    }
}

/// Minibatch SGD with momentum (`v = mu v + g; theta -= lr v`) on binary
/// cross entropy, or on `custom_loss` when given.
pub fn train_mlp<T: Scalar>(
    ds: &Dataset<T>,
    cfg: &TrainConfig,
    custom_loss: Option<&dyn Objective<T>>,
) -> Result<MlpModel<T>> {
    let [neg, pos] = ds.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass);
    }
    let model = train_mlp_with(ds, cfg, custom_loss.unwrap_or(&Bce))?;
    Ok(model)
}

pub fn train_mlp_with<T: Scalar>(ds: &Dataset<T>, cfg: &TrainConfig, loss: &dyn Objective<T>) -> Result<MlpModel<T>> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    let mut dims = vec![ds.n_features()];
    dims.extend(&cfg.hidden_layers);
    dims.push(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fingerprint = format!("{};mlp{:?};seed={}", ds.fingerprint(), cfg.hidden_layers, cfg.seed);
    let mut model = MlpModel::glorot_with(&dims, &mut rng, fingerprint);
    let lr = T::of(cfg.learning_rate);
    let mu = T::of(cfg.momentum);
    let mut velocity = vec![T::zero(); model.params.len()];
    let mut grad = vec![T::zero(); model.params.len()];
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            model.accumulate(ds, batch, loss, &mut grad);
            for ((p, v), &g) in model.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = mu * *v + g;
                *p = *p - lr * *v;
            }
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
    }
    Ok(model)
}
