//! Group-structured datasets.

pub mod adult;
mod table;

pub use table::{load_csv, write_csv, ColumnSchema, Encoding, Standardization};

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Error, Result};
use crate::numerics::{Matrix, RngStream, Scalar};

/// Features, labels and group membership for `n` examples.
///
/// `group_probs`, when present, is the known mixture weight vector q over the
/// `num_groups` groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: Matrix<T>,
    labels: Vec<usize>,
    groups: Vec<usize>,
    num_classes: usize,
    num_groups: usize,
    group_probs: Option<Vec<f64>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: Matrix<T>,
        labels: Vec<usize>,
        groups: Vec<usize>,
        num_classes: usize,
        num_groups: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: labels.len(),
            });
        }
        if groups.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: groups.len(),
            });
        }
        if let Some(&g) = groups.iter().find(|&&g| g >= num_groups) {
            return param_err(format!("group id {g} out of range for {num_groups} groups"));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return param_err(format!("label {y} out of range for {num_classes} classes"));
        }
        Ok(Self {
            features,
            labels,
            groups,
            num_classes,
            num_groups,
            group_probs: None,
        })
    }

    /// Attaches known group probabilities (nonnegative, summing to one).
    pub fn with_group_probs(mut self, q: Vec<f64>) -> Result<Self> {
        validate_probs(&q)?;
        if q.len() != self.num_groups {
            return Err(Error::Dimension {
                expected: self.num_groups,
                got: q.len(),
            });
        }
        self.group_probs = Some(q);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn x(&self, i: usize) -> &[T] {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn group_probs(&self) -> Option<&[f64]> {
        self.group_probs.as_deref()
    }

    /// Known q if attached, otherwise the empirical group fractions.
    pub fn group_probs_or_empirical(&self) -> Vec<f64> {
        self.group_probs
            .clone()
            .unwrap_or_else(|| empirical_group_probs(self))
    }

    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_groups];
        for &g in &self.groups {
            counts[g] += 1;
        }
        counts
    }

    /// Rows `idx` in order; keeps class/group arity and any known q.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            num_classes: self.num_classes,
            num_groups: self.num_groups,
            group_probs: self.group_probs.clone(),
        }
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        let mut out = Self::new(
            self.features.clone(),
            labels,
            self.groups.clone(),
            self.num_classes,
            self.num_groups,
        )?;
        out.group_probs = self.group_probs.clone();
        Ok(out)
    }

    pub fn with_features(&self, features: Matrix<T>) -> Result<Self> {
        if features.rows() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: features.rows(),
            });
        }
        let mut out = self.clone();
        out.features = features;
        Ok(out)
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            features: self.features.cast(),
            labels: self.labels.clone(),
            groups: self.groups.clone(),
            num_classes: self.num_classes,
            num_groups: self.num_groups,
            group_probs: self.group_probs.clone(),
        }
    }
}

pub(crate) fn validate_probs(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return param_err("probability vector is empty");
    }
    if q.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return param_err("probabilities must be finite and nonnegative");
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return param_err(format!("probabilities sum to {total}, not 1"));
    }
    Ok(())
}

/// Fraction of examples in each group.
pub fn empirical_group_probs<T: Scalar>(ds: &Dataset<T>) -> Vec<f64> {
    let n = ds.len() as f64;
    ds.group_counts()
        .into_iter()
        .map(|c| c as f64 / n)
        .collect()
}

/// Splits into (train, val, test) by a random permutation. Validation and test
/// get ⌊fraction·n⌋ rows; the remainder goes to train.
pub fn split<T: Scalar>(
    ds: &Dataset<T>,
    fractions: [f64; 3],
    rng: &mut RngStream,
) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>)> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return param_err("split fractions must lie in [0, 1]");
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return param_err("split fractions must sum to 1");
    }
    let n = ds.len() as f64;
    let n_val = (fractions[1] * n + 1e-9).floor() as usize;
    let n_test = (fractions[2] * n + 1e-9).floor() as usize;
    split_counts(ds, n_val, n_test, rng)
}

/// Like [`split`] with explicit validation and test sizes.
pub fn split_counts<T: Scalar>(
    ds: &Dataset<T>,
    n_val: usize,
    n_test: usize,
    rng: &mut RngStream,
) -> Result<(Dataset<T>, Dataset<T>, Dataset<T>)> {
    if n_val + n_test > ds.len() {
        return param_err("validation and test sizes exceed dataset size");
    }
    let perm = rng.permutation(ds.len());
    let n_train = ds.len() - n_val - n_test;
    let (train, rest) = perm.split_at(n_train);
    let (val, test) = rest.split_at(n_val);
    Ok((ds.subset(train), ds.subset(val), ds.subset(test)))
}

/// Per-group, per-class feature centers for [`synth_group_mixture`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    /// Group probabilities q.
    pub q: Vec<f64>,
    /// `centers[g][y]` is the mean feature vector of class `y` in group `g`.
    pub centers: Vec<Vec<Vec<f64>>>,
    pub noise_std: f64,
}

impl MixtureSpec {
    fn validate(&self) -> Result<(usize, usize)> {
        validate_probs(&self.q)?;
        if self.centers.len() != self.q.len() {
            return Err(Error::Dimension {
                expected: self.q.len(),
                got: self.centers.len(),
            });
        }
        let classes = self.centers[0].len();
        if classes < 2 {
            return param_err("mixture needs at least two classes per group");
        }
        let dim = self.centers[0][0].len();
        for g in &self.centers {
            if g.len() != classes || g.iter().any(|c| c.len() != dim) {
                return param_err("all groups need the same number of equally sized centers");
            }
        }
        if !(self.noise_std >= 0.0) {
            return param_err("noise_std must be nonnegative");
        }
        Ok((classes, dim))
    }
}

/// Draws `n` examples: group g ~ q, label uniform, features = center(g, y) + N(0, noise_std² I).
pub fn synth_group_mixture<T: Scalar>(
    spec: &MixtureSpec,
    n: usize,
    rng: &mut RngStream,
) -> Result<Dataset<T>> {
    let (classes, dim) = spec.validate()?;
    let m = spec.q.len();
    if n < m {
        return param_err(format!("need n >= number of groups ({m})"));
    }
    let cumulative: Vec<f64> = spec
        .q
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for _ in 0..n {
        let g = rng.categorical_cumulative(&cumulative);
        let y = rng.below(classes);
        for &c in &spec.centers[g][y] {
            let noise = if spec.noise_std > 0.0 {
                spec.noise_std * rng.normal()
            } else {
                0.0
            };
            data.push(T::of(c + noise));
        }
        labels.push(y);
        groups.push(g);
    }
    let features = Matrix::from_vec(n, dim, data)?;
    Dataset::new(features, labels, groups, classes, m)?.with_group_probs(spec.q.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy(groups: Vec<usize>, m: usize) -> Dataset<f64> {
        let n = groups.len();
        let feats = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        Dataset::new(feats, vec![0; n], groups, 2, m).unwrap()
    }

    #[test]
    fn rejects_out_of_range_group() {
        let feats = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(Dataset::<f64>::new(feats, vec![0, 1], vec![0, 2], 2, 2).is_err());
    }

    #[test]
    fn empirical_probs_from_counts() {
        assert_eq!(
            empirical_group_probs(&toy(vec![0, 0, 1, 0], 2)),
            vec![0.75, 0.25]
        );
        assert_eq!(empirical_group_probs(&toy(vec![0, 0], 1)), vec![1.0]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = toy(vec![0; 10], 1);
        let (a, b, c) = split(&ds, [0.8, 0.1, 0.1], &mut RngStream::new(1)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (8, 1, 1));
        let (a2, _, _) = split(&ds, [0.8, 0.1, 0.1], &mut RngStream::new(1)).unwrap();
        assert_eq!(a, a2);
        let (all, v, t) = split(&ds, [1.0, 0.0, 0.0], &mut RngStream::new(2)).unwrap();
        assert_eq!((all.len(), v.len(), t.len()), (10, 0, 0));
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let ds = toy(vec![0; 4], 1);
        assert!(split(&ds, [0.5, 0.1, 0.1], &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn mixture_single_group_and_noiseless() {
        let spec = MixtureSpec {
            q: vec![1.0],
            centers: vec![vec![vec![1.0, 2.0], vec![-1.0, 0.5]]],
            noise_std: 0.0,
        };
        let ds: Dataset<f64> = synth_group_mixture(&spec, 50, &mut RngStream::new(4)).unwrap();
        assert!(ds.groups().iter().all(|&g| g == 0));
        for i in 0..ds.len() {
            assert_eq!(ds.x(i), spec.centers[0][ds.labels()[i]].as_slice());
        }
    }

    #[test]
    fn mixture_group_fraction_concentrates() {
        let spec = MixtureSpec {
            q: vec![0.75, 0.25],
            centers: vec![vec![vec![0.0], vec![1.0]]; 2],
            noise_std: 1.0,
        };
        let ds: Dataset<f64> = synth_group_mixture(&spec, 100_000, &mut RngStream::new(9)).unwrap();
        let frac = empirical_group_probs(&ds)[0];
        assert!((frac - 0.75).abs() < 0.01, "{frac}");
    }

    #[test]
    fn mixture_rejects_empty_q() {
        let spec = MixtureSpec {
            q: vec![],
            centers: vec![],
            noise_std: 1.0,
        };
        assert!(synth_group_mixture::<f64>(&spec, 10, &mut RngStream::new(0)).is_err());
    }

    proptest! {
        #[test]
        fn empirical_probs_invariant_under_permutation(groups in prop::collection::vec(0usize..3, 1..40), seed in any::<u64>()) {
            let ds = toy(groups, 3);
            let perm = RngStream::new(seed).permutation(ds.len());
            let shuffled = ds.subset(&perm);
            prop_assert_eq!(empirical_group_probs(&ds), empirical_group_probs(&shuffled));
        }

        #[test]
        fn split_is_a_partition(n in 1usize..60, seed in any::<u64>()) {
            let ds = toy(vec![0; n], 1);
            let (a, b, c) = split(&ds, [0.6, 0.2, 0.2], &mut RngStream::new(seed)).unwrap();
            let mut ids: Vec<u64> = a.features().as_slice().iter()
                .chain(b.features().as_slice())
                .chain(c.features().as_slice())
                .map(|v| *v as u64)
                .collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..n as u64).collect::<Vec<_>>());
        }
    }
}
