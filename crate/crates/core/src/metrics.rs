//! Evaluation quantities: per-group accuracy, loss disparity, worst-group
//! loss and its generalization gap, a DG-gap lower bound over a finite family
//! of test statistics, the binned calibration gap and robust accuracy.
//!
//! "Loss" is the 0/1 misclassification indicator throughout; accuracy is its
//! complement.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{param_err, Error, Result};
use crate::models::ModelParams;
use crate::numerics::Scalar;
use crate::trainers::{pgd_attack, PgdConfig};

/// Per-group 0/1 performance. Groups with no examples are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub accuracy: Vec<Option<f64>>,
    pub loss: Vec<Option<f64>>,
    pub sizes: Vec<usize>,
    pub overall_accuracy: f64,
}

impl GroupReport {
    /// Builds a report from per-group correct counts and sizes.
    pub fn from_counts(correct: &[usize], sizes: &[usize]) -> Result<Self> {
        if correct.len() != sizes.len() {
            return Err(Error::Dimension {
                expected: sizes.len(),
                got: correct.len(),
            });
        }
        let total: usize = sizes.iter().sum();
        if total == 0 {
            return param_err("group report needs at least one example");
        }
        let accuracy: Vec<Option<f64>> = correct
            .iter()
            .zip(sizes)
            .map(|(&c, &s)| (s > 0).then(|| c as f64 / s as f64))
            .collect();
        let loss = accuracy.iter().map(|a| a.map(|a| 1.0 - a)).collect();
        Ok(Self {
            accuracy,
            loss,
            sizes: sizes.to_vec(),
            overall_accuracy: correct.iter().sum::<usize>() as f64 / total as f64,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    fn present_losses(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.loss
            .iter()
            .enumerate()
            .filter_map(|(g, l)| l.map(|l| (g, l)))
    }

    /// Worst-group accuracy, i.e. 1 − worst-group loss.
    pub fn worst_group_accuracy(&self) -> Result<f64> {
        Ok(1.0 - worst_group_loss(self)?.1)
    }
}

/// Per-group accuracy of the arg-max predictions on `ds`.
pub fn group_report<T: Scalar>(p: &ModelParams<T>, ds: &Dataset<T>) -> Result<GroupReport> {
    let mut correct = vec![0usize; ds.num_groups()];
    for i in 0..ds.len() {
        if p.predict(ds.x(i))? == ds.labels()[i] {
            correct[ds.groups()[i]] += 1;
        }
    }
    GroupReport::from_counts(&correct, &ds.group_counts())
}

/// Largest pairwise difference of per-group losses.
pub fn disparity(gr: &GroupReport) -> Result<f64> {
    let losses: Vec<f64> = gr.present_losses().map(|(_, l)| l).collect();
    if losses.len() < 2 {
        return Err(Error::UndefinedMetric(
            "disparity needs at least two present groups".into(),
        ));
    }
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Group with the highest loss; ties go to the lowest group id.
pub fn worst_group_loss(gr: &GroupReport) -> Result<(usize, f64)> {
    let mut worst: Option<(usize, f64)> = None;
    for (g, l) in gr.present_losses() {
        if worst.map_or(true, |(_, w)| l > w) {
            worst = Some((g, l));
        }
    }
    worst.ok_or_else(|| Error::UndefinedMetric("no group is present".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstGroupGap {
    /// Worst-group train loss minus worst-group test loss (≤ 0 when overfitting).
    pub loss_gap: f64,
    /// Worst-group train accuracy minus worst-group test accuracy.
    pub accuracy_gap: f64,
    pub train_worst_group: usize,
    pub test_worst_group: usize,
    /// The train and test maxima are attained by the same group.
    pub same_worst_group: bool,
}

/// Single-run worst-group generalization gap.
pub fn wggap(train: &GroupReport, test: &GroupReport) -> Result<WorstGroupGap> {
    if train.num_groups() != test.num_groups() {
        return Err(Error::Dimension {
            expected: train.num_groups(),
            got: test.num_groups(),
        });
    }
    let (gt, lt) = worst_group_loss(train)?;
    let (gs, ls) = worst_group_loss(test)?;
    Ok(WorstGroupGap {
        loss_gap: lt - ls,
        accuracy_gap: ls - lt,
        train_worst_group: gt,
        test_worst_group: gs,
        same_worst_group: gt == gs,
    })
}

/// A scalar read off a [`GroupReport`], used as a test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatistic {
    GroupLoss(usize),
    OverallLoss,
}

impl TestStatistic {
    fn eval(&self, gr: &GroupReport) -> Option<f64> {
        match *self {
            TestStatistic::GroupLoss(g) => gr.loss.get(g).copied().flatten(),
            TestStatistic::OverallLoss => Some(1.0 - gr.overall_accuracy),
        }
    }
}

/// Per-group 0/1 losses for `m` groups, the default family.
pub fn per_group_family(m: usize) -> Vec<TestStatistic> {
    (0..m).map(TestStatistic::GroupLoss).collect()
}

/// max over the family of |mean train value − mean test value| across runs.
/// Runs where a statistic is undefined on either side are skipped for it.
/// This lower-bounds the supremum over all test functions.
pub fn dg_gap_estimate(
    runs: &[(GroupReport, GroupReport)],
    family: &[TestStatistic],
) -> Result<f64> {
    if runs.is_empty() {
        return param_err("need at least one run");
    }
    if family.is_empty() {
        return param_err("test-function family is empty");
    }
    let mut best: f64 = 0.0;
    for stat in family {
        let pairs: Vec<(f64, f64)> = runs
            .iter()
            .filter_map(|(tr, te)| Some((stat.eval(tr)?, stat.eval(te)?)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let n = pairs.len() as f64;
        let train = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let test = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        best = best.max((train - test).abs());
    }
    Ok(best)
}

/// Number of bins k when τ = 1/k.
pub fn bins_for(tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau <= 1.0) {
        return param_err(format!("bin width {tau} outside (0, 1]"));
    }
    let k = (1.0 / tau).round();
    if (k * tau - 1.0).abs() > 1e-9 {
        return param_err(format!("bin width {tau} is not a unit fraction"));
    }
    Ok(k as usize)
}

/// Bin index of a score in [0, 1]: half-open bins [p, p+τ), last bin closed.
pub fn bin_of(score: f64, bins: usize) -> usize {
    ((score * bins as f64).floor() as usize).min(bins - 1)
}

/// Σ over left edges p ∈ {0, τ, …, 1−τ} of |mean over examples of 𝟙{f ∈ bin p}·(y − p)|.
pub fn cgap_from_scores(scores: &[f64], labels: &[usize], tau: f64) -> Result<f64> {
    let k = bins_for(tau)?;
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return param_err("calibration gap needs at least one example");
    }
    let mut sums = vec![0.0; k];
    for (&s, &y) in scores.iter().zip(labels) {
        let b = bin_of(s, k);
        let left = b as f64 / k as f64;
        sums[b] += y as f64 - left;
    }
    let n = scores.len() as f64;
    Ok(sums.iter().map(|s| (s / n).abs()).sum())
}

/// τ-binned calibration gap of a binary model on `ds`.
pub fn cgap_binned<T: Scalar>(p: &ModelParams<T>, ds: &Dataset<T>, tau: f64) -> Result<f64> {
    if ds.num_classes() != 2 {
        return param_err("calibration gap is defined for binary tasks");
    }
    let scores = (0..ds.len())
        .map(|i| p.predict_positive(ds.x(i)).map(|v| v.as_f64()))
        .collect::<Result<Vec<_>>>()?;
    cgap_from_scores(&scores, ds.labels(), tau)
}

/// Accuracy on PGD-perturbed inputs.
pub fn robust_accuracy<T: Scalar>(
    p: &ModelParams<T>,
    ds: &Dataset<T>,
    attack: &PgdConfig,
) -> Result<f64> {
    if ds.is_empty() {
        return param_err("dataset is empty");
    }
    let mut correct = 0usize;
    for i in 0..ds.len() {
        let y = ds.labels()[i];
        let adv = pgd_attack(p, ds.x(i), y, attack)?;
        if p.predict(&adv)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// One row per (run, split, group) of a metric table.
pub fn write_group_table(
    path: &Path,
    rows: &[(String, String, GroupReport)],
    preamble: &[String],
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for line in preamble {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "run,split,group,size,accuracy,loss")?;
    for (run, split, gr) in rows {
        for g in 0..gr.num_groups() {
            let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
            writeln!(
                f,
                "{run},{split},{g},{},{},{}",
                gr.sizes[g],
                fmt(gr.accuracy[g]),
                fmt(gr.loss[g])
            )?;
        }
    }
    Ok(())
}
