//! Prediction functions with exact per-example cross-entropy gradients.
//!
//! Binary tasks use a single logit and a sigmoid; more classes use softmax.
//! Parameters are stored flat. Logistic regression lays out `W (out × d)` then
//! `b (out)`; the MLP lays out `W1 (h × d)`, `b1 (h)`, `W2 (out × h)`, `b2 (out)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{dot, log_sum_exp, sigmoid, softmax, softplus, Matrix, RngStream, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Arch {
    Logreg {
        dim: usize,
        classes: usize,
    },
    /// One hidden tanh layer.
    Mlp {
        dim: usize,
        hidden: usize,
        classes: usize,
    },
}

impl Arch {
    pub fn dim(&self) -> usize {
        match *self {
            Arch::Logreg { dim, .. } | Arch::Mlp { dim, .. } => dim,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Arch::Logreg { classes, .. } | Arch::Mlp { classes, .. } => classes,
        }
    }

    fn outputs(&self) -> usize {
        match self.classes() {
            2 => 1,
            k => k,
        }
    }

    pub fn num_params(&self) -> usize {
        let out = self.outputs();
        match *self {
            Arch::Logreg { dim, .. } => out * (dim + 1),
            Arch::Mlp { dim, hidden, .. } => hidden * (dim + 1) + out * (hidden + 1),
        }
    }
}

/// Per-example gradients, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSampleGrads<T>(pub Matrix<T>);

impl<T: Scalar> PerSampleGrads<T> {
    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.0.row(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub arch: Arch,
    pub theta: Vec<T>,
}

struct Forward<T> {
    hidden: Vec<T>,
    logits: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(arch: Arch) -> Self {
        Self {
            arch,
            theta: vec![T::zero(); arch.num_params()],
        }
    }

    pub fn from_theta(arch: Arch, theta: Vec<T>) -> Result<Self> {
        if theta.len() != arch.num_params() {
            return Err(Error::Dimension {
                expected: arch.num_params(),
                got: theta.len(),
            });
        }
        Ok(Self { arch, theta })
    }

    /// Logistic regression starts at zero; MLP weights are drawn from
    /// N(0, 1/fan_in) with zero biases.
    pub fn init(arch: Arch, rng: &mut RngStream) -> Self {
        let mut p = Self::zeros(arch);
        if let Arch::Mlp { dim, hidden, .. } = arch {
            let out = arch.outputs();
            let s1 = 1.0 / (dim.max(1) as f64).sqrt();
            let s2 = 1.0 / (hidden.max(1) as f64).sqrt();
            for w in &mut p.theta[..hidden * dim] {
                *w = T::of(rng.normal() * s1);
            }
            let w2 = hidden * (dim + 1);
            for w in &mut p.theta[w2..w2 + out * hidden] {
                *w = T::of(rng.normal() * s2);
            }
        }
        p
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.arch.dim() {
            return Err(Error::Dimension {
                expected: self.arch.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn forward(&self, x: &[T]) -> Forward<T> {
        let out = self.arch.outputs();
        match self.arch {
            Arch::Logreg { dim, .. } => {
                let (w, b) = self.theta.split_at(out * dim);
                let logits = (0..out)
                    .map(|o| dot(&w[o * dim..(o + 1) * dim], x) + b[o])
                    .collect();
                Forward {
                    hidden: Vec::new(),
                    logits,
                }
            }
            Arch::Mlp { dim, hidden, .. } => {
                let (w1, rest) = self.theta.split_at(hidden * dim);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(out * hidden);
                let h: Vec<T> = (0..hidden)
                    .map(|j| (dot(&w1[j * dim..(j + 1) * dim], x) + b1[j]).tanh())
                    .collect();
                let logits = (0..out)
                    .map(|o| dot(&w2[o * hidden..(o + 1) * hidden], &h) + b2[o])
                    .collect();
                Forward { hidden: h, logits }
            }
        }
    }

    /// Class probabilities; sums to one.
    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_dim(x)?;
        let f = self.forward(x);
        Ok(if self.arch.classes() == 2 {
            let p1 = sigmoid(f.logits[0]);
            vec![T::one() - p1, p1]
        } else {
            softmax(&f.logits)
        })
    }

    /// Probability of class 1 for binary models.
    pub fn predict_positive(&self, x: &[T]) -> Result<T> {
        if self.arch.classes() != 2 {
            return Err(Error::Parameter(
                "positive-class probability needs a binary model".into(),
            ));
        }
        self.check_dim(x)?;
        Ok(sigmoid(self.forward(x).logits[0]))
    }

    /// Arg-max class, ties to the lowest index.
    pub fn predict(&self, x: &[T]) -> Result<usize> {
        self.check_dim(x)?;
        let f = self.forward(x);
        Ok(if self.arch.classes() == 2 {
            usize::from(f.logits[0] > T::zero())
        } else {
            let mut best = 0;
            for (k, &z) in f.logits.iter().enumerate() {
                if z > f.logits[best] {
                    best = k;
                }
            }
            best
        })
    }

    /// Cross-entropy and d(loss)/d(logits).
    fn loss_and_dlogits(&self, logits: &[T], y: usize) -> (T, Vec<T>) {
        if self.arch.classes() == 2 {
            let z = logits[0];
            let yt = if y == 1 { T::one() } else { T::zero() };
            (softplus(z) - yt * z, vec![sigmoid(z) - yt])
        } else {
            let loss = log_sum_exp(logits) - logits[y];
            let mut d = softmax(logits);
            d[y] = d[y] - T::one();
            (loss, d)
        }
    }

    pub fn loss(&self, x: &[T], y: usize) -> Result<T> {
        self.check_dim(x)?;
        let f = self.forward(x);
        Ok(self.loss_and_dlogits(&f.logits, y).0)
    }

    /// Cross-entropy loss and its exact gradient in θ for one example.
    pub fn loss_and_grad(&self, x: &[T], y: usize) -> Result<(T, Vec<T>)> {
        self.check_dim(x)?;
        let f = self.forward(x);
        let (loss, dz) = self.loss_and_dlogits(&f.logits, y);
        let mut grad = vec![T::zero(); self.theta.len()];
        let out = dz.len();
        match self.arch {
            Arch::Logreg { dim, .. } => {
                for (o, &d) in dz.iter().enumerate() {
                    for (g, &xi) in grad[o * dim..(o + 1) * dim].iter_mut().zip(x) {
                        *g = d * xi;
                    }
                    grad[out * dim + o] = d;
                }
            }
            Arch::Mlp { dim, hidden, .. } => {
                let w2_off = hidden * (dim + 1);
                let b2_off = w2_off + out * hidden;
                let w2 = &self.theta[w2_off..b2_off];
                let h = &f.hidden;
                let mut da = vec![T::zero(); hidden];
                for (o, &d) in dz.iter().enumerate() {
                    for j in 0..hidden {
                        grad[w2_off + o * hidden + j] = d * h[j];
                        da[j] = da[j] + w2[o * hidden + j] * d;
                    }
                    grad[b2_off + o] = d;
                }
                for j in 0..hidden {
                    let a = da[j] * (T::one() - h[j] * h[j]);
                    for (g, &xi) in grad[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                        *g = a * xi;
                    }
                    grad[hidden * dim + j] = a;
                }
            }
        }
        Ok((loss, grad))
    }

    /// Gradient of the loss with respect to the input `x`.
    pub fn input_grad(&self, x: &[T], y: usize) -> Result<Vec<T>> {
        self.check_dim(x)?;
        let f = self.forward(x);
        let (_, dz) = self.loss_and_dlogits(&f.logits, y);
        let mut gx = vec![T::zero(); x.len()];
        match self.arch {
            Arch::Logreg { dim, .. } => {
                for (o, &d) in dz.iter().enumerate() {
                    for (g, &w) in gx.iter_mut().zip(&self.theta[o * dim..(o + 1) * dim]) {
                        *g = *g + d * w;
                    }
                }
            }
            Arch::Mlp { dim, hidden, .. } => {
                let w2_off = hidden * (dim + 1);
                let w2 = &self.theta[w2_off..w2_off + dz.len() * hidden];
                for j in 0..hidden {
                    let dh = dz
                        .iter()
                        .enumerate()
                        .fold(T::zero(), |acc, (o, &d)| acc + w2[o * hidden + j] * d);
                    let a = dh * (T::one() - f.hidden[j] * f.hidden[j]);
                    for (g, &w) in gx.iter_mut().zip(&self.theta[j * dim..(j + 1) * dim]) {
                        *g = *g + a * w;
                    }
                }
            }
        }
        Ok(gx)
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            arch: self.arch,
            theta: self.theta.iter().map(|&v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Losses and gradients for the rows `idx` of `ds` (repeats allowed).
pub fn per_sample_loss_grads<T: Scalar>(
    p: &ModelParams<T>,
    ds: &Dataset<T>,
    idx: &[usize],
) -> Result<(Vec<T>, PerSampleGrads<T>)> {
    if idx.is_empty() {
        return Err(Error::Parameter("batch is empty".into()));
    }
    let mut losses = Vec::with_capacity(idx.len());
    let mut grads = Matrix::zeros(idx.len(), p.num_params());
    for (r, &i) in idx.iter().enumerate() {
        let (l, g) = p.loss_and_grad(ds.x(i), ds.labels()[i])?;
        losses.push(l);
        grads.row_mut(r).copy_from_slice(&g);
    }
    Ok((losses, PerSampleGrads(grads)))
}

/// Mean cross-entropy over the whole dataset.
pub fn mean_loss<T: Scalar>(p: &ModelParams<T>, ds: &Dataset<T>) -> Result<T> {
    let mut total = T::zero();
    for i in 0..ds.len() {
        total = total + p.loss(ds.x(i), ds.labels()[i])?;
    }
    Ok(total / T::of(ds.len() as f64))
}

/// Misclassification rate of the arg-max prediction.
pub fn zero_one_loss<T: Scalar>(p: &ModelParams<T>, ds: &Dataset<T>) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Parameter("dataset is empty".into()));
    }
    let mut wrong = 0usize;
    for i in 0..ds.len() {
        if p.predict(ds.x(i))? != ds.labels()[i] {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / ds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: Arch,
    pub seed: u64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    header: CheckpointHeader,
    theta: Vec<f64>,
}

pub fn save_checkpoint<T: Scalar>(
    path: &Path,
    p: &ModelParams<T>,
    seed: u64,
    step: usize,
) -> Result<()> {
    let ck = Checkpoint {
        header: CheckpointHeader {
            arch: p.arch,
            seed,
            step,
        },
        theta: p.theta.iter().map(|v| v.as_f64()).collect(),
    };
    std::fs::write(path, serde_json::to_string(&ck)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(ModelParams<T>, CheckpointHeader)> {
    let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let theta = ck.theta.into_iter().map(T::of).collect();
    Ok((ModelParams::from_theta(ck.header.arch, theta)?, ck.header))
}
