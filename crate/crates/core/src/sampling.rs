//! Batch construction: Poisson subsampling (uniform and per-example rates),
//! importance resampling and importance weights.

use crate::error::{param_err, Error, Result};
use crate::numerics::RngStream;

/// Per-example Poisson inclusion probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    probs: Vec<f64>,
    p_star: f64,
    pbar: f64,
}

impl SamplingPlan {
    pub fn from_probs(probs: Vec<f64>, pbar: f64) -> Result<Self> {
        if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return param_err(format!("inclusion probability {p} outside [0, 1]"));
        }
        let p_star = probs.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            probs,
            p_star,
            pbar,
        })
    }

    /// Every example included with probability `pbar`.
    pub fn uniform(n: usize, pbar: f64) -> Result<Self> {
        Self::from_probs(vec![pbar; n], pbar)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    pub fn pbar(&self) -> f64 {
        self.pbar
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Σ p(z_i), the expected batch size.
    pub fn expected_batch_size(&self) -> f64 {
        self.probs.iter().sum()
    }
}

fn check_group_probs(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return param_err("group probabilities are empty");
    }
    if let Some(g) = q.iter().position(|&p| !(p > 0.0)) {
        return param_err(format!("group {g} has nonpositive probability"));
    }
    Ok(())
}

/// Importance-sampling plan: p(z) = pbar / (m · q_{g(z)}).
///
/// A plan whose largest probability exceeds one is rejected instead of capped,
/// since capping would change p* and with it the privacy accounting.
pub fn is_sampling_probs(groups: &[usize], q: &[f64], pbar: f64) -> Result<SamplingPlan> {
    if !(pbar > 0.0) {
        return param_err("pbar must be positive");
    }
    check_group_probs(q)?;
    let m = q.len() as f64;
    let per_group: Vec<f64> = q.iter().map(|&qg| pbar / (m * qg)).collect();
    if let Some(g) = per_group.iter().position(|&p| p > 1.0) {
        return Err(Error::InfeasiblePlan {
            group: g,
            prob: per_group[g],
        });
    }
    let probs = groups
        .iter()
        .map(|&g| {
            per_group
                .get(g)
                .copied()
                .ok_or_else(|| Error::Parameter(format!("group id {g} has no probability")))
        })
        .collect::<Result<Vec<_>>>()?;
    // p* is a property of the plan, not of which groups happen to be present
    let p_star = per_group.iter().copied().fold(0.0, f64::max);
    Ok(SamplingPlan {
        probs,
        p_star,
        pbar,
    })
}

/// Independent Bernoulli inclusion per index. Always consumes one uniform per
/// index so the stream position does not depend on the plan.
pub fn poisson_sample(plan: &SamplingPlan, rng: &mut RngStream) -> Vec<usize> {
    plan.probs
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| rng.bernoulli(p).then_some(i))
        .collect()
}

/// w_i = 1 / (m · q_{g_i}).
pub fn importance_weights(groups: &[usize], q: &[f64]) -> Result<Vec<f64>> {
    check_group_probs(q)?;
    let m = q.len() as f64;
    groups
        .iter()
        .map(|&g| {
            q.get(g)
                .map(|&qg| 1.0 / (m * qg))
                .ok_or_else(|| Error::Parameter(format!("group id {g} has no probability")))
        })
        .collect()
}

/// With-replacement sampler drawing example i with probability ∝ w_{g_i}.
#[derive(Debug, Clone)]
pub struct ImportanceSampler {
    cumulative: Vec<f64>,
}

impl ImportanceSampler {
    pub fn new(groups: &[usize], q: &[f64]) -> Result<Self> {
        let w = importance_weights(groups, q)?;
        if w.is_empty() {
            return param_err("no examples to resample");
        }
        let cumulative = w
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Ok(Self { cumulative })
    }

    pub fn sample(&self, batch_size: usize, rng: &mut RngStream) -> Vec<usize> {
        (0..batch_size)
            .map(|_| rng.categorical_cumulative(&self.cumulative))
            .collect()
    }
}

/// `batch_size` draws with replacement, example i drawn ∝ 1/(m q_{g_i}).
pub fn importance_resample(
    groups: &[usize],
    q: &[f64],
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if batch_size == 0 {
        return param_err("batch_size must be at least 1");
    }
    Ok(ImportanceSampler::new(groups, q)?.sample(batch_size, rng))
}

/// Uniform draws with replacement from 0..n.
pub fn uniform_batch(n: usize, batch_size: usize, rng: &mut RngStream) -> Vec<usize> {
    (0..batch_size).map(|_| rng.below(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn is_plan_two_groups() {
        let plan = is_sampling_probs(&[0, 1, 0], &[0.75, 0.25], 0.1).unwrap();
        assert_abs_diff_eq!(plan.probs()[0], 0.1 / 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(plan.probs()[1], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(plan.p_star(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn single_group_is_uniform() {
        let plan = is_sampling_probs(&[0, 0, 0], &[1.0], 0.05).unwrap();
        assert_eq!(plan, SamplingPlan::uniform(3, 0.05).unwrap());
    }

    #[test]
    fn equal_groups_give_pbar() {
        let plan = is_sampling_probs(&[0, 1, 1, 0], &[0.5, 0.5], 0.3).unwrap();
        assert!(plan.probs().iter().all(|&p| p == 0.3));
    }

    #[test]
    fn infeasible_plan_names_group() {
        match is_sampling_probs(&[0, 1], &[0.99, 0.01], 0.1) {
            Err(Error::InfeasiblePlan { group, prob }) => {
                assert_eq!(group, 1);
                assert!(prob > 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn poisson_extremes() {
        let mut rng = RngStream::new(0);
        assert!(poisson_sample(&SamplingPlan::uniform(20, 0.0).unwrap(), &mut rng).is_empty());
        assert_eq!(
            poisson_sample(&SamplingPlan::uniform(20, 1.0).unwrap(), &mut rng),
            (0..20).collect::<Vec<_>>()
        );
    }

    #[test]
    fn poisson_mean_batch_size() {
        let groups: Vec<usize> = (0..400).map(|i| usize::from(i % 4 == 0)).collect();
        let plan = is_sampling_probs(&groups, &[0.75, 0.25], 0.1).unwrap();
        let mean_exp = plan.expected_batch_size();
        let var: f64 = plan.probs().iter().map(|p| p * (1.0 - p)).sum();
        let mut rng = RngStream::new(12);
        let trials = 10_000;
        let total: usize = (0..trials)
            .map(|_| poisson_sample(&plan, &mut rng).len())
            .sum();
        let mean = total as f64 / trials as f64;
        assert!(
            (mean - mean_exp).abs() <= 3.0 * var.sqrt() * 1e-2,
            "{mean} vs {mean_exp}"
        );
    }

    #[test]
    fn uniform_plan_inclusion_frequencies() {
        let plan = SamplingPlan::uniform(50, 0.2).unwrap();
        let mut rng = RngStream::new(13);
        let trials = 10_000;
        let mut hits = vec![0usize; 50];
        for _ in 0..trials {
            for i in poisson_sample(&plan, &mut rng) {
                hits[i] += 1;
            }
        }
        let se = (0.2 * 0.8 / trials as f64).sqrt();
        for h in hits {
            let f = h as f64 / trials as f64;
            // 50 indices at 3 SE: a 4 SE band keeps the family-wise error small
            assert!((f - 0.2).abs() < 4.0 * se, "{f}");
        }
    }

    #[test]
    fn weights_formula() {
        assert_eq!(
            importance_weights(&[0, 1], &[0.5, 0.5]).unwrap(),
            vec![1.0, 1.0]
        );
        let w = importance_weights(&[0, 1], &[0.75, 0.25]).unwrap();
        assert_abs_diff_eq!(w[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn resample_equalizes_groups() {
        let groups: Vec<usize> = (0..1000).map(|i| usize::from(i % 10 == 0)).collect();
        let mut rng = RngStream::new(21);
        let idx = importance_resample(&groups, &[0.9, 0.1], 20_000, &mut rng).unwrap();
        let frac = idx.iter().filter(|&&i| groups[i] == 1).count() as f64 / idx.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn resample_rejects_zero_batch() {
        assert!(importance_resample(&[0], &[1.0], 0, &mut RngStream::new(0)).is_err());
    }

    proptest! {
        #[test]
        fn expected_batch_matches_pbar_n(counts in prop::collection::vec(1usize..40, 1..5), pbar in 0.001f64..0.05) {
            // group fractions equal q exactly
            let n: usize = counts.iter().sum();
            let q: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
            let groups: Vec<usize> = counts.iter().enumerate().flat_map(|(g, &c)| std::iter::repeat(g).take(c)).collect();
            let m = q.len() as f64;
            prop_assume!(q.iter().all(|&qg| pbar / (m * qg) <= 1.0));
            let plan = is_sampling_probs(&groups, &q, pbar).unwrap();
            prop_assert!((plan.expected_batch_size() - pbar * n as f64).abs() < 1e-9);
            let w = importance_weights(&groups, &q).unwrap();
            prop_assert!((w.iter().sum::<f64>() / n as f64 - 1.0).abs() < 1e-9);
        }
    }
}
