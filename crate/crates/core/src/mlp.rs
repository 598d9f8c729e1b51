//! Feed-forward binary classifier: ReLU hidden layers, logistic output,
//! cross-entropy loss with L2 penalty, trained with Adam.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::rng::seeded_rng;

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            hidden: vec![500, 300, 150, 50],
            batch_size: 200,
            learning_rate: 1e-3,
            l2: 1e-4,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(GraspError::Config("hidden layer sizes must be positive".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(GraspError::Config("batch_size and max_epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.l2 >= 0.0) {
            return Err(GraspError::Config("learning_rate must be positive and l2 non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(GraspError::Config("validation_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// Shape `(inputs, outputs)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Multilayer perceptron with a single logistic output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Cross-entropy of a logistic output given its logit, computed stably.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl Mlp {
    /// Glorot-uniform initialisation (bound `sqrt(6 / (fan_in + fan_out))`).
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-bound..bound)),
                    bias: Array1::from_shape_simple_fn(w[1], || rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut v = vec![self.input_dim()];
        v.extend(self.layers.iter().map(|l| l.weights.ncols()));
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Activations of every layer; the last entry holds output logits.
    fn forward_all(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let input = if k == 0 { x } else { acts[k - 1].view() };
            let mut z = input.dot(&layer.weights);
            z += &layer.bias;
            if k < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Output logits, one per row of `x`.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let out = self.forward_all(x).pop().expect("at least one layer");
        out.column(0).to_owned()
    }

    /// Positive-class probabilities, one per row of `x`.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.logits(x).mapv(sigmoid)
    }

    fn l2_term(&self, l2: f64, n: usize) -> f64 {
        let sq: f64 = self.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum();
        0.5 * l2 * sq / n as f64
    }

    /// Mean cross-entropy plus `0.5 * l2 * |W|² / n`.
    pub fn loss(&self, x: ArrayView2<f64>, y: &[f64], l2: f64) -> f64 {
        let z = self.logits(x);
        let n = y.len();
        let data: f64 = z.iter().zip(y).map(|(&z, &y)| bce_from_logit(z, y)).sum::<f64>() / n as f64;
        data + self.l2_term(l2, n)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, y: &[f64], l2: f64) -> (f64, Vec<Dense>) {
        let n = y.len();
        let acts = self.forward_all(x);
        let z = acts.last().expect("output layer");
        let mut data = 0.0;
        let mut delta = Array2::<f64>::zeros((n, 1));
        for i in 0..n {
            let zi = z[[i, 0]];
            data += bce_from_logit(zi, y[i]);
            delta[[i, 0]] = (sigmoid(zi) - y[i]) / n as f64;
        }
        let loss = data / n as f64 + self.l2_term(l2, n);

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let input = if k == 0 { x } else { acts[k - 1].view() };
            let mut gw = input.t().dot(&delta);
            gw.scaled_add(l2 / n as f64, &self.layers[k].weights);
            let gb = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weights.t());
                Zip::from(&mut back).and(&acts[k - 1]).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense { weights: gw, bias: gb });
        }
        grads.reverse();
        (loss, grads)
    }
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &Mlp, lr: f64) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| Dense {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect::<Vec<_>>()
        };
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, model: &mut Mlp, grads: &[Dense]) {
        self.t += 1;
        let lr = self.lr * (1.0 - Self::BETA2.powi(self.t)).sqrt() / (1.0 - Self::BETA1.powi(self.t));
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * *m / (v.sqrt() + Self::EPS);
        };
        for (k, layer) in model.layers.iter_mut().enumerate() {
            Zip::from(&mut layer.weights)
                .and(&mut self.m[k].weights)
                .and(&mut self.v[k].weights)
                .and(&grads[k].weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut self.m[k].bias)
                .and(&mut self.v[k].bias)
                .and(&grads[k].bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

/// Summary of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub train_accuracy: f64,
}

fn gather(x: &Array2<f64>, y: &[f64], idx: &[usize]) -> (Array2<f64>, Vec<f64>) {
    (x.select(Axis(0), idx), idx.iter().map(|&i| y[i]).collect())
}

/// Binary accuracy at threshold 0.5.
pub fn accuracy(model: &Mlp, x: ArrayView2<f64>, y: &[f64]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let p = model.predict_proba(x);
    let hits = p.iter().zip(y).filter(|(&p, &y)| (p >= 0.5) == (y >= 0.5)).count();
    hits as f64 / y.len() as f64
}

/// Train a classifier on rows of `x` with 0/1 targets `y`. A
/// `validation_fraction` of the rows is held out for early stopping and the
/// parameters with the lowest validation loss are returned.
pub fn train(x: &Array2<f64>, y: &[f64], params: &TrainParams) -> Result<(Mlp, TrainReport)> {
    params.validate()?;
    let n = y.len();
    if n == 0 || x.nrows() != n {
        return Err(GraspError::DegenerateInput(format!(
            "training data has {} rows and {} targets",
            x.nrows(),
            n
        )));
    }
    let mut rng = seeded_rng(params.seed);
    let mut sizes = vec![x.ncols()];
    sizes.extend(&params.hidden);
    sizes.push(1);
    let mut model = Mlp::new(&sizes, &mut rng);

    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let n_val = ((n as f64) * params.validation_fraction).round() as usize;
    let n_val = if n - n_val == 0 { 0 } else { n_val };
    let (val_idx, train_idx) = idx.split_at(n_val);
    let (xt, yt) = gather(x, y, train_idx);
    let (xv, yv) = gather(x, y, val_idx);

    let mut adam = Adam::new(&model, params.learning_rate);
    let mut order: Vec<usize> = (0..yt.len()).collect();
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut epochs_run = 0;
    for epoch in 0..params.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.batch_size) {
            let xb = xt.select(Axis(0), chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| yt[i]).collect();
            let (_, grads) = model.loss_and_grad(xb.view(), &yb, params.l2);
            adam.step(&mut model, &grads);
        }
        epochs_run = epoch + 1;
        let monitor = if yv.is_empty() {
            model.loss(xt.view(), &yt, params.l2)
        } else {
            model.loss(xv.view(), &yv, params.l2)
        };
        if !monitor.is_finite() {
            break;
        }
        if monitor < best_loss {
            best_loss = monitor;
            best = model.clone();
            best_epoch = epoch + 1;
        } else if epoch + 1 - best_epoch >= params.patience {
            break;
        }
    }
    let train_accuracy = accuracy(&best, xt.view(), &yt);
    Ok((
        best,
        TrainReport {
            epochs_run,
            best_epoch,
            best_validation_loss: best_loss,
            train_accuracy,
        },
    ))
}

/// Rows `lo..hi` of `x` as a view; a small convenience for batched inference.
pub fn rows(x: &Array2<f64>, lo: usize, hi: usize) -> ArrayView2<'_, f64> {
    x.slice(s![lo..hi, ..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded_rng(1);
        let model = Mlp::new(&[6, 7, 5, 1], &mut rng);
        let x = Array2::from_shape_simple_fn((9, 6), || StandardNormal.sample(&mut rng));
        let y: Vec<f64> = (0..9).map(|i| (i % 2) as f64).collect();
        let l2 = 1e-2;
        let (_, grads) = model.loss_and_grad(x.view(), &y, l2);
        for (k, layer) in model.layers.iter().enumerate() {
            for ((i, j), _) in layer.weights.indexed_iter() {
                let h = 1e-6;
                let mut plus = model.clone();
                plus.layers[k].weights[[i, j]] += h;
                let mut minus = model.clone();
                minus.layers[k].weights[[i, j]] -= h;
                let fd = (plus.loss(x.view(), &y, l2) - minus.loss(x.view(), &y, l2)) / (2.0 * h);
                let an = grads[k].weights[[i, j]];
                assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "layer {k} ({i},{j}): {fd} vs {an}");
            }
        }
    }

    #[test]
    fn separable_blobs_are_learned() {
        let mut rng = seeded_rng(2);
        let n = 200;
        let x = Array2::from_shape_fn((n, 4), |(i, _)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * 0.3 + if i % 2 == 0 { 1.5 } else { -1.5 }
        });
        let y: Vec<f64> = (0..n).map(|i| (i % 2 == 0) as u8 as f64).collect();
        let params = TrainParams {
            hidden: vec![16, 8],
            batch_size: 32,
            max_epochs: 50,
            ..TrainParams::default()
        };
        let (model, report) = train(&x, &y, &params).unwrap();
        assert!(report.train_accuracy >= 0.99);
        assert!(accuracy(&model, x.view(), &y) >= 0.99);
        let (again, _) = train(&x, &y, &params).unwrap();
        assert_eq!(model, again);
    }
}
