//! Exact calculus on finite output distributions, enumerable toy learners and
//! estimators of distributional generalization used to check the privacy
//! bounds numerically.

mod suite;
mod toy;

pub use suite::{verify_suite, ClaimResult, VerifyOptions, VerifyReport};
pub use toy::{
    calibration_bound_check, dg_exact, dg_monte_carlo, rr_majority_learner, rr_mean_learner,
    strong_dg_exact, strong_dg_monte_carlo, strong_dg_samples, subgroup_dg_monte_carlo,
    CalibrationCheck, LearnerRule, McEstimate, TestFn, ToyDistribution, ToyExample, ToyLearner,
};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::privacy::DpBudget;

/// Largest outcome count accepted by [`verify_dp`].
pub const MAX_SUBSET_OUTCOMES: usize = 20;

/// Output laws of a randomized map on the two neighboring inputs 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMechanism<T> {
    p0: Vec<T>,
    p1: Vec<T>,
}

fn check_distribution<T: Float>(p: &[T]) -> Result<()> {
    if p.iter().any(|&v| !(v >= T::zero())) {
        return param_err("probabilities must be nonnegative");
    }
    let total = p.iter().fold(T::zero(), |a, &b| a + b);
    let tol = T::from(1e-12)
        .unwrap_or_else(T::epsilon)
        .max(T::epsilon() * T::from(8).unwrap());
    if (total - T::one()).abs() > tol {
        return param_err(format!(
            "probabilities sum to {} instead of 1",
            total.to_f64().unwrap_or(f64::NAN)
        ));
    }
    Ok(())
}

impl<T: Float> DiscreteMechanism<T> {
    pub fn new(p0: Vec<T>, p1: Vec<T>) -> Result<Self> {
        if p0.len() != p1.len() {
            return Err(Error::Dimension {
                expected: p0.len(),
                got: p1.len(),
            });
        }
        if p0.is_empty() {
            return param_err("mechanism needs at least one outcome");
        }
        check_distribution(&p0)?;
        check_distribution(&p1)?;
        Ok(Self { p0, p1 })
    }

    pub fn outcomes(&self) -> usize {
        self.p0.len()
    }

    pub fn p0(&self) -> &[T] {
        &self.p0
    }

    pub fn p1(&self) -> &[T] {
        &self.p1
    }

    pub fn tv(&self) -> T {
        tv_sum(&self.p0, &self.p1)
    }
}

fn tv_sum<T: Float>(p: &[T], q: &[T]) -> T {
    let half = T::from(0.5).unwrap();
    p.iter()
        .zip(q)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs())
        * half
}

/// ½ Σ |Pᵢ − Qᵢ|.
pub fn tv_discrete<T: Float>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    Ok(tv_sum(p, q))
}

/// Four-outcome mechanism whose TV distance attains the (ε, δ)-DP bound:
/// P₀ = (0, (1−δ)e^ε/(e^ε+1), (1−δ)/(e^ε+1), δ),
/// P₁ = (δ, (1−δ)/(e^ε+1), (1−δ)e^ε/(e^ε+1), 0).
pub fn reduced_mechanism<T: Float>(eps: T, delta: T) -> Result<DiscreteMechanism<T>> {
    if !(eps >= T::zero()) || eps.is_infinite() {
        return param_err("eps must be finite and nonnegative");
    }
    if !(delta >= T::zero() && delta <= T::one()) {
        return param_err("delta must lie in [0, 1]");
    }
    let e = eps.exp();
    let one = T::one();
    let hi = (one - delta) * e / (e + one);
    let lo = (one - delta) / (e + one);
    DiscreteMechanism::new(
        vec![T::zero(), hi, lo, delta],
        vec![delta, lo, hi, T::zero()],
    )
}

/// Checks P₀(K) ≤ e^ε P₁(K) + δ and P₁(K) ≤ e^ε P₀(K) + δ over all 2^k
/// outcome sets K, with absolute tolerance 1e-12.
pub fn verify_dp<T: Float>(m: &DiscreteMechanism<T>, b: DpBudget) -> Result<bool> {
    let k = m.outcomes();
    if k > MAX_SUBSET_OUTCOMES {
        return param_err(format!(
            "{k} outcomes exceed the subset-enumeration limit {MAX_SUBSET_OUTCOMES}"
        ));
    }
    let e = T::from(b.eps.exp()).unwrap();
    let delta = T::from(b.delta).unwrap();
    let tol = T::from(1e-12).unwrap();
    for mask in 0u32..(1u32 << k) {
        let (mut a, mut c) = (T::zero(), T::zero());
        for i in 0..k {
            if mask & (1 << i) != 0 {
                a = a + m.p0[i];
                c = c + m.p1[i];
            }
        }
        if a > e * c + delta + tol || c > e * a + delta + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Type-I/type-II error pairs (α, β) = (P₀(K), 1 − P₁(K)) of every rejection set K.
pub fn error_pairs<T: Float>(m: &DiscreteMechanism<T>) -> Result<Vec<(T, T)>> {
    let k = m.outcomes();
    if k > MAX_SUBSET_OUTCOMES {
        return param_err(format!(
            "{k} outcomes exceed the subset-enumeration limit {MAX_SUBSET_OUTCOMES}"
        ));
    }
    Ok((0u32..(1u32 << k))
        .map(|mask| {
            let (mut a, mut c) = (T::zero(), T::zero());
            for i in 0..k {
                if mask & (1 << i) != 0 {
                    a = a + m.p0[i];
                    c = c + m.p1[i];
                }
            }
            (a, T::one() - c)
        })
        .collect())
}
