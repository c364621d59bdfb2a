use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use dpdg_core::data::{synth_group_mixture, write_csv, ColumnSchema};
use dpdg_core::numerics::RngStream;
use dpdg_core::Dataset64;

use crate::config::{identity_schema, GenFile};
use crate::error::CliResult;
use crate::provenance::Provenance;

/// Draws `file.n` mixture examples and writes them in the `f0.., label, group` layout.
pub fn run_gen(file: &GenFile, out: &Path) -> CliResult<Dataset64> {
    let ds = synth_group_mixture::<f64>(&file.spec, file.n, &mut RngStream::new(file.seed))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(&ds, out, &Provenance::new(file, Some(file.seed)).preamble())?;
    Ok(ds)
}

/// Shape and group/label counts of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSummary {
    pub rows: usize,
    pub features: usize,
    pub classes: usize,
    pub groups: usize,
    pub group_counts: Vec<usize>,
    pub group_names: Vec<String>,
    /// `label_counts[g][y]`.
    pub label_counts: Vec<Vec<usize>>,
    pub feature_names: Vec<String>,
}

pub fn summarize(
    ds: &Dataset64,
    group_names: Vec<String>,
    feature_names: Vec<String>,
) -> DataSummary {
    let mut label_counts = vec![vec![0; ds.num_classes()]; ds.num_groups()];
    for (&g, &y) in ds.groups().iter().zip(ds.labels()) {
        label_counts[g][y] += 1;
    }
    DataSummary {
        rows: ds.len(),
        features: ds.dim(),
        classes: ds.num_classes(),
        groups: ds.num_groups(),
        group_counts: ds.group_counts(),
        group_names,
        label_counts,
        feature_names,
    }
}

/// Loads a CSV with `schema` (or the `f0.., label, group` layout) and summarizes it.
pub fn run_inspect(path: &Path, schema: Option<ColumnSchema>) -> CliResult<DataSummary> {
    let schema = match schema {
        Some(s) => s,
        None => identity_schema(path)?,
    };
    let (ds, enc) = dpdg_core::data::load_csv::<f64>(path, &schema)?;
    Ok(summarize(&ds, enc.group_names(), enc.feature_names.clone()))
}

/// Group counts keyed by name, for quick printing.
pub fn named_counts(s: &DataSummary) -> BTreeMap<String, usize> {
    s.group_names
        .iter()
        .cloned()
        .zip(s.group_counts.iter().copied())
        .collect()
}
