//! Learners on a finite example space.
//!
//! An example is a (group, label) pair and a learner outputs a constant score
//! f ∈ [0, 1], read as P(y = 1). Its hard prediction is 1{f ≥ ½}. Because the
//! example space is finite, every expectation over a fresh example is exact;
//! only the dataset and the learner's coins are sampled in the Monte-Carlo
//! estimators.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::metrics::{bin_of, bins_for, cgap_from_scores};
use crate::numerics::{mean_se, RngStream};

/// Largest number of datasets enumerated by the exact estimators.
const MAX_ENUMERATION: usize = 1 << 20;
const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyExample {
    pub group: usize,
    pub label: u8,
}

/// Group mixture with P(g) = weights[g] and P(y = 1 | g) = label_probs[g].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDistribution {
    weights: Vec<f64>,
    label_probs: Vec<f64>,
    support: Vec<(ToyExample, f64)>,
    cumulative: Vec<f64>,
}

impl ToyDistribution {
    pub fn new(weights: Vec<f64>, label_probs: Vec<f64>) -> Result<Self> {
        crate::data::validate_probs(&weights)?;
        if label_probs.len() != weights.len() {
            return Err(Error::Dimension {
                expected: weights.len(),
                got: label_probs.len(),
            });
        }
        if label_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return param_err("label probabilities must lie in [0, 1]");
        }
        let mut support = Vec::new();
        for (g, (&w, &q)) in weights.iter().zip(&label_probs).enumerate() {
            for (label, p) in [(0u8, 1.0 - q), (1u8, q)] {
                let mass = w * p;
                if mass > 0.0 {
                    support.push((ToyExample { group: g, label }, mass));
                }
            }
        }
        let cumulative = support
            .iter()
            .scan(0.0, |acc, (_, p)| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            weights,
            label_probs,
            support,
            cumulative,
        })
    }

    /// One group, P(y = 1) = q.
    pub fn single(q: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![q])
    }

    pub fn num_groups(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label_probs(&self) -> &[f64] {
        &self.label_probs
    }

    /// Examples with positive mass and their probabilities.
    pub fn support(&self) -> &[(ToyExample, f64)] {
        &self.support
    }

    pub fn sample(&self, rng: &mut RngStream) -> ToyExample {
        self.support[rng.categorical_cumulative(&self.cumulative)].0
    }

    pub fn sample_n(&self, n: usize, rng: &mut RngStream) -> Vec<ToyExample> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// E_{z∼D} φ(z; f), optionally restricted to group `g` (i.e. z ∼ D_g).
    fn expect(&self, phi: TestFn, f: f64, group: Option<usize>) -> f64 {
        match group {
            None => self.support.iter().map(|(z, p)| p * phi.eval(*z, f)).sum(),
            Some(g) => {
                let q = self.label_probs[g];
                let z = |label| ToyExample { group: g, label };
                (1.0 - q) * phi.eval(z(0), f) + q * phi.eval(z(1), f)
            }
        }
    }
}

/// Output rule of a [`ToyLearner`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerRule {
    /// Majority label of S, flipped with probability 1/(1 + e^ε).
    RrMajority { eps: f64 },
    /// Fraction q̂ of positive labels in S, replaced by 1 − q̂ with probability 1/(1 + e^ε).
    RrMean { eps: f64 },
    /// Ignores S.
    Constant { score: f64 },
}

/// A randomized map from datasets of `n` examples to scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyLearner {
    pub n: usize,
    pub rule: LearnerRule,
}

fn flip_prob(eps: f64) -> f64 {
    if eps == f64::INFINITY {
        0.0
    } else {
        1.0 / (1.0 + eps.exp())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps >= 0.0) {
        return param_err("eps must be nonnegative (infinity allowed)");
    }
    Ok(())
}

/// Randomized-response majority vote; (ε, 0)-DP. `n` must be odd.
pub fn rr_majority_learner(eps: f64, n: usize) -> Result<ToyLearner> {
    check_eps(eps)?;
    if n % 2 == 0 {
        return param_err("majority learner needs an odd n");
    }
    if n > 20 {
        return param_err("toy learners are limited to n <= 20");
    }
    Ok(ToyLearner {
        n,
        rule: LearnerRule::RrMajority { eps },
    })
}

/// Probabilistic classifier reporting the positive fraction of S, or its
/// complement with probability 1/(1 + e^ε).
pub fn rr_mean_learner(eps: f64, n: usize) -> Result<ToyLearner> {
    check_eps(eps)?;
    if n == 0 || n > 20 {
        return param_err("toy learners need 1 <= n <= 20");
    }
    Ok(ToyLearner {
        n,
        rule: LearnerRule::RrMean { eps },
    })
}

impl ToyLearner {
    pub fn constant(score: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return param_err("score must lie in [0, 1]");
        }
        if n == 0 {
            return param_err("n must be at least 1");
        }
        Ok(Self {
            n,
            rule: LearnerRule::Constant { score },
        })
    }

    /// Claimed pure-DP parameter, if the rule has one.
    pub fn claimed_eps(&self) -> Option<f64> {
        match self.rule {
            LearnerRule::RrMajority { eps } => Some(eps),
            LearnerRule::Constant { .. } => Some(0.0),
            LearnerRule::RrMean { .. } => None,
        }
    }

    /// Output law on `s` as (score, probability) pairs.
    pub fn output(&self, s: &[ToyExample]) -> Vec<(f64, f64)> {
        let ones = s.iter().filter(|z| z.label == 1).count();
        let frac = ones as f64 / s.len() as f64;
        match self.rule {
            LearnerRule::Constant { score } => vec![(score, 1.0)],
            LearnerRule::RrMajority { eps } => {
                let maj = if 2 * ones > s.len() { 1.0 } else { 0.0 };
                let rho = flip_prob(eps);
                vec![(maj, 1.0 - rho), (1.0 - maj, rho)]
            }
            LearnerRule::RrMean { eps } => {
                let rho = flip_prob(eps);
                vec![(frac, 1.0 - rho), (1.0 - frac, rho)]
            }
        }
    }

    fn sample_output(&self, s: &[ToyExample], rng: &mut RngStream) -> f64 {
        let law = self.output(s);
        let u = rng.uniform();
        let mut acc = 0.0;
        for &(f, p) in &law {
            acc += p;
            if u < acc {
                return f;
            }
        }
        law.last().expect("nonempty law").0
    }
}

/// Bounded test function φ(z; f).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFn {
    /// 1{1{f ≥ ½} ≠ y}.
    ZeroOneLoss,
    Constant {
        value: f64,
    },
    /// 1{f ∈ bin} · (y − left edge), bins of width τ = 1/bins.
    CalibrationBin {
        bins: usize,
        bin: usize,
    },
}

impl TestFn {
    pub fn eval(&self, z: ToyExample, f: f64) -> f64 {
        match *self {
            TestFn::ZeroOneLoss => {
                let pred = u8::from(f >= 0.5);
                f64::from(u8::from(pred != z.label))
            }
            TestFn::Constant { value } => value,
            TestFn::CalibrationBin { bins, bin } => {
                if bin_of(f, bins) == bin {
                    f64::from(z.label) - bin as f64 / bins as f64
                } else {
                    0.0
                }
            }
        }
    }

    fn mean_over(&self, s: &[ToyExample], f: f64) -> f64 {
        s.iter().map(|&z| self.eval(z, f)).sum::<f64>() / s.len() as f64
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Signed estimate (train minus test for the DG estimators).
    pub mean: f64,
    pub se: f64,
    pub trials: usize,
}

impl McEstimate {
    fn from_samples(xs: &[f64]) -> Self {
        let (mean, se) = mean_se(xs);
        Self {
            mean,
            se,
            trials: xs.len(),
        }
    }

    /// |mean|, the generalization gap.
    pub fn gap(&self) -> f64 {
        self.mean.abs()
    }
}

fn for_each_dataset(
    learner: &ToyLearner,
    dist: &ToyDistribution,
    mut visit: impl FnMut(&[ToyExample], f64),
) -> Result<()> {
    let support = dist.support();
    let k = support.len();
    let n = learner.n;
    let total = (k as f64).powi(n as i32);
    if total > MAX_ENUMERATION as f64 {
        return param_err(format!("{k}^{n} datasets exceed the enumeration limit"));
    }
    let mut digits = vec![0usize; n];
    let mut s = vec![support[0].0; n];
    loop {
        let mut prob = 1.0;
        for (slot, &d) in s.iter_mut().zip(&digits) {
            *slot = support[d].0;
            prob *= support[d].1;
        }
        visit(&s, prob);
        let mut i = 0;
        loop {
            if i == n {
                return Ok(());
            }
            digits[i] += 1;
            if digits[i] < k {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn exact_gaps(learner: &ToyLearner, dist: &ToyDistribution, phi: TestFn) -> Result<(f64, f64)> {
    let (mut signed, mut absolute) = (0.0, 0.0);
    for_each_dataset(learner, dist, |s, ps| {
        for (f, pf) in learner.output(s) {
            let d = phi.mean_over(s, f) - dist.expect(phi, f, None);
            signed += ps * pf * d;
            absolute += ps * pf * d.abs();
        }
    })?;
    Ok((signed.abs(), absolute))
}

/// |E_{S, f} E_{z∼S} φ − E_{S, f} E_{z∼D} φ| by enumerating every dataset and coin.
pub fn dg_exact(learner: &ToyLearner, dist: &ToyDistribution, phi: TestFn) -> Result<f64> {
    Ok(exact_gaps(learner, dist, phi)?.0)
}

/// E_{S, f} |E_{z∼S} φ − E_{z∼D} φ| by enumeration.
pub fn strong_dg_exact(learner: &ToyLearner, dist: &ToyDistribution, phi: TestFn) -> Result<f64> {
    Ok(exact_gaps(learner, dist, phi)?.1)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials(format!(
            "{trials} < {MIN_TRIALS}"
        )));
    }
    Ok(())
}

/// Mean over fresh (S, f) of E_{z∼S} φ − E_{z∼D} φ.
pub fn dg_monte_carlo(
    learner: &ToyLearner,
    dist: &ToyDistribution,
    trials: usize,
    phi: TestFn,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    check_trials(trials)?;
    let diffs: Vec<f64> = (0..trials)
        .map(|_| {
            let s = dist.sample_n(learner.n, rng);
            let f = learner.sample_output(&s, rng);
            phi.mean_over(&s, f) - dist.expect(phi, f, None)
        })
        .collect();
    Ok(McEstimate::from_samples(&diffs))
}

/// Per-trial |E_{z∼S} φ − E_{z∼D} φ|.
pub fn strong_dg_samples(
    learner: &ToyLearner,
    dist: &ToyDistribution,
    trials: usize,
    phi: TestFn,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    check_trials(trials)?;
    Ok((0..trials)
        .map(|_| {
            let s = dist.sample_n(learner.n, rng);
            let f = learner.sample_output(&s, rng);
            (phi.mean_over(&s, f) - dist.expect(phi, f, None)).abs()
        })
        .collect())
}

/// Mean of [`strong_dg_samples`].
pub fn strong_dg_monte_carlo(
    learner: &ToyLearner,
    dist: &ToyDistribution,
    trials: usize,
    phi: TestFn,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    Ok(McEstimate::from_samples(&strong_dg_samples(
        learner, dist, trials, phi, rng,
    )?))
}

/// Train side: E[E_{z∼S_g} φ | |S_g| > 0]; test side: E_{z∼D_g} φ over all
/// trials. The difference is returned with the SE of a difference of
/// independent means.
pub fn subgroup_dg_monte_carlo(
    learner: &ToyLearner,
    dist: &ToyDistribution,
    group: usize,
    trials: usize,
    phi: TestFn,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    if group >= dist.num_groups() {
        return param_err(format!("group {group} out of range"));
    }
    let mut train = Vec::with_capacity(trials);
    let mut test = Vec::with_capacity(trials);
    for _ in 0..trials {
        let s = dist.sample_n(learner.n, rng);
        let f = learner.sample_output(&s, rng);
        let sg: Vec<ToyExample> = s.iter().copied().filter(|z| z.group == group).collect();
        if !sg.is_empty() {
            train.push(phi.mean_over(&sg, f));
        }
        test.push(dist.expect(phi, f, Some(group)));
    }
    if train.len() < MIN_TRIALS {
        return Err(Error::InsufficientTrials(format!(
            "group {group} appeared in only {} of {trials} datasets",
            train.len()
        )));
    }
    let (mt, st) = mean_se(&train);
    let (ms, ss) = mean_se(&test);
    Ok(McEstimate {
        mean: mt - ms,
        se: st.hypot(ss),
        trials: train.len(),
    })
}

/// Outcome of the calibration-generalization check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCheck {
    /// |mean train cgap − mean test cgap|.
    pub lhs: f64,
    /// δ/τ with δ the largest strong-DG estimate over the bin test functions.
    pub rhs: f64,
    pub delta: f64,
    pub tau: f64,
    /// SE of lhs and rhs combined in quadrature.
    pub se: f64,
    pub pass: bool,
}

/// Estimates both sides of |E cgap_τ(S) − E cgap_τ(D)| ≤ δ/τ on the same trials.
pub fn calibration_bound_check(
    learner: &ToyLearner,
    dist: &ToyDistribution,
    tau: f64,
    trials: usize,
    rng: &mut RngStream,
) -> Result<CalibrationCheck> {
    check_trials(trials)?;
    let bins = bins_for(tau)?;
    let family: Vec<TestFn> = (0..bins)
        .map(|bin| TestFn::CalibrationBin { bins, bin })
        .collect();
    let mut diffs = Vec::with_capacity(trials);
    let mut per_bin = vec![Vec::with_capacity(trials); bins];
    for _ in 0..trials {
        let s = dist.sample_n(learner.n, rng);
        let f = learner.sample_output(&s, rng);
        let scores = vec![f; s.len()];
        let labels: Vec<usize> = s.iter().map(|z| usize::from(z.label)).collect();
        let train = cgap_from_scores(&scores, &labels, tau)?;
        let mut test = 0.0;
        for (phi, gaps) in family.iter().zip(per_bin.iter_mut()) {
            let pop = dist.expect(*phi, f, None);
            test += pop.abs();
            gaps.push((phi.mean_over(&s, f) - pop).abs());
        }
        diffs.push(train - test);
    }
    let (mean_diff, se_diff) = mean_se(&diffs);
    let (delta, se_delta) = per_bin
        .iter()
        .map(|g| mean_se(g))
        .fold(
            (0.0, 0.0),
            |best, cur| if cur.0 > best.0 { cur } else { best },
        );
    let lhs = mean_diff.abs();
    let rhs = delta / tau;
    let se = se_diff.hypot(se_delta / tau);
    Ok(CalibrationCheck {
        lhs,
        rhs,
        delta,
        tau,
        se,
        pass: lhs <= rhs + 3.0 * se,
    })
}
