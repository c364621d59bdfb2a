use super::config::PgdConfig;
use crate::error::Result;
use crate::models::ModelParams;
use crate::numerics::{RngStream, Scalar};

/// Sign-gradient ascent on the loss inside the L∞ ball of radius γ around
/// `x`, starting at `x`. Returns the iterate with the highest loss, so the
/// attacked loss is never below the clean loss.
pub fn pgd_attack<T: Scalar>(
    p: &ModelParams<T>,
    x: &[T],
    y: usize,
    cfg: &PgdConfig,
) -> Result<Vec<T>> {
    attack_from(p, x, y, cfg, x.to_vec())
}

/// As [`pgd_attack`], but starts at a uniform point of the ball when
/// `cfg.random_start` is set. The clean input stays a candidate.
pub fn pgd_attack_rng<T: Scalar>(
    p: &ModelParams<T>,
    x: &[T],
    y: usize,
    cfg: &PgdConfig,
    rng: &mut RngStream,
) -> Result<Vec<T>> {
    if !cfg.random_start || cfg.gamma == 0.0 {
        return pgd_attack(p, x, y, cfg);
    }
    let start = x
        .iter()
        .map(|&xi| xi + T::of(cfg.gamma * (2.0 * rng.uniform() - 1.0)))
        .collect();
    attack_from(p, x, y, cfg, start)
}

fn attack_from<T: Scalar>(
    p: &ModelParams<T>,
    x: &[T],
    y: usize,
    cfg: &PgdConfig,
    start: Vec<T>,
) -> Result<Vec<T>> {
    if cfg.gamma == 0.0 {
        return Ok(x.to_vec());
    }
    let gamma = T::of(cfg.gamma);
    let step = T::of(cfg.attack_step_size);
    let mut best = x.to_vec();
    let mut best_loss = p.loss(x, y)?;
    let mut cur = start;
    let consider = |cand: &Vec<T>, best: &mut Vec<T>, best_loss: &mut T| -> Result<()> {
        let l = p.loss(cand, y)?;
        if l > *best_loss {
            *best_loss = l;
            best.clone_from(cand);
        }
        Ok(())
    };
    if cur.as_slice() != x {
        consider(&cur, &mut best, &mut best_loss)?;
    }
    for _ in 0..cfg.attack_steps {
        let g = p.input_grad(&cur, y)?;
        for ((c, &gi), &xi) in cur.iter_mut().zip(&g).zip(x) {
            let moved = if gi > T::zero() {
                *c + step
            } else if gi < T::zero() {
                *c - step
            } else {
                *c
            };
            *c = moved.max(xi - gamma).min(xi + gamma);
        }
        consider(&cur, &mut best, &mut best_loss)?;
    }
    Ok(best)
}
