//! Training loops: plain, importance-sampled and importance-weighted SGD with
//! optional gradient noise, DP-SGD and DP-IS-SGD with per-example clipping and
//! Poisson subsampling, and PGD adversarial training.
//!
//! Every run derives separate random streams for initialization, batch
//! selection, gradient noise and attack starts from one [`RngStream`], so two
//! algorithms that agree on the batch law consume identical batches.
//! Updates are descent steps `θ ← θ − η (ĝ + λθ)` with weight decay λ.

mod adversarial;
mod config;
pub mod presets;
mod record;

pub use adversarial::{pgd_attack, pgd_attack_rng};
pub use config::{Algorithm, ModelSpec, NoiseConvention, PgdConfig, TrainConfig};
pub use record::{EvalPoint, RunRecord, SplitMetrics};

use crate::data::Dataset;
use crate::error::{param_err, Error, Result};
use crate::metrics::{cgap_binned, disparity, group_report, robust_accuracy};
use crate::models::ModelParams;
use crate::numerics::{axpy, gaussian_vector, norm2, RngStream, Scalar};
use crate::privacy::PrivacyReport;
use crate::sampling::{
    importance_weights, is_sampling_probs, poisson_sample, uniform_batch, ImportanceSampler,
    SamplingPlan,
};

/// Keys of the streams a run derives from its root: parameter init, batch
/// selection, gradient noise and attack random starts.
pub const INIT_STREAM: u64 = 0;
pub const BATCH_STREAM: u64 = 1;
pub const NOISE_STREAM: u64 = 2;
pub const ATTACK_STREAM: u64 = 3;

/// Training split plus an optional held-out split for logging.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a, T> {
    pub train: &'a Dataset<T>,
    pub eval: Option<&'a Dataset<T>>,
}

impl<'a, T> TrainData<'a, T> {
    pub fn new(train: &'a Dataset<T>, eval: Option<&'a Dataset<T>>) -> Self {
        Self { train, eval }
    }
}

/// Scales `g` by 1/max(1, ‖g‖₂/C).
pub fn clip_grad<T: Scalar>(g: &[T], c: T) -> Vec<T> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, c);
    out
}

fn clip_in_place<T: Scalar>(g: &mut [T], c: T) {
    let norm = norm2(g);
    if norm > c {
        let f = c / norm;
        for v in g.iter_mut() {
            *v = *v * f;
        }
    }
}

enum Batches {
    Uniform {
        size: usize,
    },
    Importance {
        sampler: ImportanceSampler,
        size: usize,
    },
    Poisson(SamplingPlan),
}

impl Batches {
    fn draw(&self, n: usize, rng: &mut RngStream) -> Vec<usize> {
        match self {
            Batches::Uniform { size } => uniform_batch(n, *size, rng),
            Batches::Importance { sampler, size } => sampler.sample(*size, rng),
            Batches::Poisson(plan) => poisson_sample(plan, rng),
        }
    }
}

fn check_algorithm(cfg: &TrainConfig, allowed: &[Algorithm]) -> Result<()> {
    if allowed.contains(&cfg.algorithm) {
        Ok(())
    } else {
        param_err(format!(
            "config algorithm {} does not match the trainer called",
            cfg.algorithm.name()
        ))
    }
}

/// Uniform with-replacement minibatches, mean gradient, optional N(0, σ_n² I) noise.
pub fn sgd<T: Scalar>(
    data: TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &RngStream,
) -> Result<(ModelParams<T>, RunRecord)> {
    check_algorithm(cfg, &[Algorithm::Sgd])?;
    train(data, cfg, rng)
}

/// Minibatches drawn with probability ∝ 1/(m·q_g), unweighted loss.
pub fn is_sgd<T: Scalar>(
    data: TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &RngStream,
) -> Result<(ModelParams<T>, RunRecord)> {
    check_algorithm(cfg, &[Algorithm::IsSgd])?;
    train(data, cfg, rng)
}

/// Uniform minibatches, per-example loss weighted by 1/(m·q_g).
pub fn iw_sgd<T: Scalar>(
    data: TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &RngStream,
) -> Result<(ModelParams<T>, RunRecord)> {
    check_algorithm(cfg, &[Algorithm::IwSgd])?;
    train(data, cfg, rng)
}

/// Uniform Poisson subsampling at rate pbar, clipping and Gaussian noise.
pub fn dp_sgd<T: Scalar>(
    data: TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &RngStream,
) -> Result<(ModelParams<T>, RunRecord)> {
    check_algorithm(cfg, &[Algorithm::DpSgd])?;
    train(data, cfg, rng)
}

/// Poisson subsampling with p(z) = pbar/(m·q_g), clipping and Gaussian noise.
pub fn dp_is_sgd<T: Scalar>(
    data: TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &RngStream,
) -> Result<(ModelParams<T>, RunRecord)> {
    check_algorithm(cfg, &[Algorithm::DpIsSgd])?;
    train(data, cfg, rng)
}

/// Minibatches replaced by their PGD adversarial examples before each step.
pub fn adv_train<T: Scalar>(
    data: TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &RngStream,
) -> Result<(ModelParams<T>, RunRecord)> {
    check_algorithm(cfg, &[Algorithm::AdvPgd])?;
    train(data, cfg, rng)
}

/// Runs whichever algorithm `cfg` names.
pub fn train<T: Scalar>(
    data: TrainData<'_, T>,
    cfg: &TrainConfig,
    rng: &RngStream,
) -> Result<(ModelParams<T>, RunRecord)> {
    cfg.validate()?;
    let ds = data.train;
    let n = ds.len();
    if n == 0 {
        return param_err("training set is empty");
    }
    if let Some(ev) = data.eval {
        if ev.dim() != ds.dim()
            || ev.num_groups() != ds.num_groups()
            || ev.num_classes() != ds.num_classes()
        {
            return param_err("evaluation split does not match the training split");
        }
    }
    let q = ds.group_probs_or_empirical();
    let alg = cfg.algorithm;

    let batches = match alg {
        Algorithm::Sgd | Algorithm::IwSgd | Algorithm::AdvPgd => Batches::Uniform {
            size: cfg.batch_size.unwrap_or(1),
        },
        Algorithm::IsSgd => Batches::Importance {
            sampler: ImportanceSampler::new(ds.groups(), &q)?,
            size: cfg.batch_size.unwrap_or(1),
        },
        Algorithm::DpSgd => Batches::Poisson(SamplingPlan::uniform(n, cfg.pbar.unwrap_or(0.0))?),
        Algorithm::DpIsSgd => {
            Batches::Poisson(is_sampling_probs(ds.groups(), &q, cfg.pbar.unwrap_or(0.0))?)
        }
    };
    let weights: Option<Vec<T>> = match alg {
        Algorithm::IwSgd => Some(
            importance_weights(ds.groups(), &q)?
                .into_iter()
                .map(T::of)
                .collect(),
        ),
        _ => None,
    };

    let arch = cfg.model.arch(ds.dim(), ds.num_classes());
    let mut p = ModelParams::<T>::init(arch, &mut rng.derive(INIT_STREAM));
    let mut batch_rng = rng.derive(BATCH_STREAM);
    let mut noise_rng = rng.derive(NOISE_STREAM);
    let mut attack_rng = rng.derive(ATTACK_STREAM);
    let d = p.num_params();
    let lr = T::of(cfg.lr);
    let wd = T::of(cfg.weight_decay);

    let mut trajectory = Vec::new();
    let mut grad = vec![T::zero(); d];
    for t in 1..=cfg.steps {
        let idx = batches.draw(n, &mut batch_rng);
        grad.iter_mut().for_each(|g| *g = T::zero());
        if alg.is_dp() {
            let c = T::of(cfg.clip.unwrap_or(f64::INFINITY));
            let divisor = T::of(cfg.pbar.unwrap_or(1.0) * n as f64);
            for &i in &idx {
                let (_, mut g) = p.loss_and_grad(ds.x(i), ds.labels()[i])?;
                clip_in_place(&mut g, c);
                debug_assert!(norm2(&g) <= c + T::of(1e-9));
                axpy(T::one(), &g, &mut grad);
            }
            let std = cfg.sigma.unwrap_or(0.0) * cfg.clip.unwrap_or(0.0);
            let noise = gaussian_vector(&mut noise_rng, d, T::of(std));
            match cfg.noise_convention {
                NoiseConvention::Averaged => {
                    grad.iter_mut().for_each(|g| *g = *g / divisor);
                    axpy(T::one(), &noise, &mut grad);
                }
                NoiseConvention::Summed => {
                    axpy(T::one(), &noise, &mut grad);
                    grad.iter_mut().for_each(|g| *g = *g / divisor);
                }
            }
        } else {
            for &i in &idx {
                let y = ds.labels()[i];
                let g = match (&cfg.pgd, alg) {
                    (Some(pgd), Algorithm::AdvPgd) => {
                        let adv = pgd_attack_rng(&p, ds.x(i), y, pgd, &mut attack_rng)?;
                        p.loss_and_grad(&adv, y)?.1
                    }
                    _ => p.loss_and_grad(ds.x(i), y)?.1,
                };
                let w = weights.as_ref().map_or(T::one(), |w| w[i]);
                axpy(w, &g, &mut grad);
            }
            let b = T::of(idx.len() as f64);
            grad.iter_mut().for_each(|g| *g = *g / b);
            if let Some(s) = cfg.sigma_n {
                let noise = gaussian_vector(&mut noise_rng, d, T::of(s));
                axpy(T::one(), &noise, &mut grad);
            }
        }
        if cfg.weight_decay > 0.0 {
            axpy(wd, &p.theta, &mut grad);
        }
        axpy(-lr, &grad, &mut p.theta);
        if !p.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        if cfg.is_eval_step(t) {
            trajectory.push(evaluate(&p, data, cfg, t)?);
        }
    }

    let privacy = match (&batches, cfg.sigma) {
        (Batches::Poisson(plan), Some(sigma)) if sigma > 0.0 => {
            let delta = cfg.delta.unwrap_or(1.0 / (2.0 * n as f64));
            Some(PrivacyReport::for_gaussian_run(
                plan.p_star(),
                plan.pbar(),
                sigma,
                cfg.steps,
                delta,
            )?)
        }
        _ => None,
    };
    let record = RunRecord {
        config: cfg.clone(),
        seed: rng.seed(),
        noise_convention: cfg.noise_convention,
        trajectory,
        privacy,
    };
    Ok((p, record))
}

fn split_metrics<T: Scalar>(
    p: &ModelParams<T>,
    ds: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<SplitMetrics> {
    let groups = group_report(p, ds)?;
    let worst_group_accuracy = groups.worst_group_accuracy().ok();
    let disparity = disparity(&groups).ok();
    let cgap = if ds.num_classes() == 2 {
        Some(cgap_binned(p, ds, cfg.cgap_tau)?)
    } else {
        None
    };
    let robust_accuracy = match (cfg.algorithm, &cfg.pgd) {
        (Algorithm::AdvPgd, Some(pgd)) => Some(robust_accuracy(p, ds, pgd)?),
        _ => None,
    };
    Ok(SplitMetrics {
        accuracy: groups.overall_accuracy,
        groups,
        worst_group_accuracy,
        disparity,
        cgap,
        robust_accuracy,
    })
}

/// Train and held-out metrics of `p` at `step`.
pub fn evaluate<T: Scalar>(
    p: &ModelParams<T>,
    data: TrainData<'_, T>,
    cfg: &TrainConfig,
    step: usize,
) -> Result<EvalPoint> {
    Ok(EvalPoint {
        step,
        train: split_metrics(p, data.train, cfg)?,
        test: data.eval.map(|ev| split_metrics(p, ev, cfg)).transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use proptest::prelude::*;

    fn toy(n: usize, m: usize, seed: u64) -> Dataset<f64> {
        let mut rng = RngStream::new(seed);
        let data: Vec<f64> = (0..n * 3).map(|_| rng.normal()).collect();
        let feats = Matrix::from_vec(n, 3, data).unwrap();
        let labels = (0..n)
            .map(|i| usize::from(feats.row(i)[0] + 0.3 * feats.row(i)[1] > 0.0))
            .collect();
        let groups = (0..n).map(|i| i % m).collect();
        Dataset::new(feats, labels, groups, 2, m).unwrap()
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_grad(&[3.0, 4.0], 2.5), vec![1.5, 2.0]);
        assert_eq!(clip_grad(&[0.3, 0.4], 1.0), vec![0.3, 0.4]);
        assert_eq!(clip_grad(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn sgd_reduces_loss_and_is_deterministic() {
        let ds = toy(200, 1, 1);
        let mut cfg = TrainConfig::new(Algorithm::Sgd, 0.5, 200);
        cfg.batch_size = Some(16);
        let rng = RngStream::new(9);
        let (p1, r1) = sgd(TrainData::new(&ds, None), &cfg, &rng).unwrap();
        let (p2, r2) = sgd(TrainData::new(&ds, None), &cfg, &rng).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1.to_json().unwrap(), r2.to_json().unwrap());
        assert!(r1.last().train.accuracy > 0.9);
        assert_eq!(r1.trajectory.len(), 50);
    }

    #[test]
    fn trainer_rejects_mismatched_algorithm() {
        let ds = toy(20, 1, 1);
        let mut cfg = TrainConfig::new(Algorithm::Sgd, 0.5, 2);
        cfg.batch_size = Some(4);
        assert!(dp_sgd(TrainData::new(&ds, None), &cfg, &RngStream::new(0)).is_err());
    }

    #[test]
    fn dp_config_requires_clip() {
        let mut cfg = TrainConfig::new(Algorithm::DpSgd, 0.5, 2);
        cfg.pbar = Some(0.1);
        cfg.sigma = Some(1.0);
        assert!(cfg.validate().is_err());
        cfg.clip = Some(1.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn eval_cadence() {
        let cfg = TrainConfig::new(Algorithm::Sgd, 0.1, 120);
        let steps: Vec<usize> = (1..=120).filter(|&t| cfg.is_eval_step(t)).collect();
        assert_eq!(steps.len(), 40);
        assert_eq!(*steps.last().unwrap(), 120);
    }

    #[test]
    fn dp_run_reports_privacy() {
        let ds = toy(400, 2, 3);
        let mut cfg = TrainConfig::new(Algorithm::DpSgd, 0.5, 20);
        cfg.pbar = Some(0.05);
        cfg.clip = Some(1.0);
        cfg.sigma = Some(1.0);
        let (_, rec) = dp_sgd(TrainData::new(&ds, Some(&ds)), &cfg, &RngStream::new(1)).unwrap();
        let rep = rec.privacy.as_ref().unwrap();
        assert_eq!(rep.accounting_steps, 20);
        assert!((rep.budget.delta - 1.0 / 800.0).abs() < 1e-15);
        assert!(rec.last().test.is_some());
    }

    proptest! {
        #[test]
        fn clip_norm_bounded(g in prop::collection::vec(-100.0f64..100.0, 1..20), c in 1e-3f64..10.0) {
            let out = clip_grad(&g, c);
            prop_assert!(norm2(&out) <= c + 1e-12);
            if norm2(&g) <= c {
                prop_assert_eq!(out, g);
            }
        }
    }
}
