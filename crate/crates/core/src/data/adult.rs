//! ADULT census income preset.
//!
//! Groups are the four intersections of sex and income class, numbered
//! Female/≤50K, Male/≤50K, Female/>50K, Male/>50K. The data is split
//! 40000 / 3000 / 5842 (train / validation / test) by a seeded permutation and
//! numeric columns are standardized with training statistics. `fnlwgt` is a
//! census sampling weight rather than an attribute of the person and is not
//! used as a feature.

use std::path::Path;

use super::{load_csv, split_counts, ColumnSchema, Dataset, Encoding, Standardization};
use crate::error::Result;
use crate::numerics::{RngStream, Scalar};

pub const VAL_SIZE: usize = 3000;
pub const TEST_SIZE: usize = 5842;

pub fn schema() -> ColumnSchema {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    ColumnSchema {
        label: "income".into(),
        label_levels: Some(s(&["<=50K", ">50K"])),
        group_columns: s(&["sex", "income"]),
        group_levels: Some(vec![s(&["Female", "Male"]), s(&["<=50K", ">50K"])]),
        numeric: s(&[
            "age",
            "education_num",
            "capital_gain",
            "capital_loss",
            "hours_per_week",
        ]),
        categorical: s(&[
            "workclass",
            "education",
            "marital_status",
            "occupation",
            "relationship",
            "race",
            "sex",
            "native_country",
        ]),
    }
}

/// Standardized train/validation/test splits plus their encoding metadata.
/// The training split carries its empirical group fractions as q.
#[derive(Debug, Clone)]
pub struct Splits<T> {
    pub train: Dataset<T>,
    pub val: Dataset<T>,
    pub test: Dataset<T>,
    pub encoding: Encoding,
}

pub fn load<T: Scalar>(path: &Path, split_seed: u64) -> Result<Splits<T>> {
    let (full, mut encoding) = load_csv::<T>(path, &schema())?;
    let (train, val, test) =
        split_counts(&full, VAL_SIZE, TEST_SIZE, &mut RngStream::new(split_seed))?;
    let standardization = Standardization::fit(&train, &encoding.numeric_features);
    let q = super::empirical_group_probs(&train);
    let train = standardization.apply(&train).with_group_probs(q)?;
    let val = standardization.apply(&val);
    let test = standardization.apply(&test);
    encoding.standardization = Some(standardization);
    Ok(Splits {
        train,
        val,
        test,
        encoding,
    })
}
