//! CSV ingestion with one-hot encoding and train-split standardization.
//!
//! Feature columns are laid out as: every numeric column in schema order, then
//! each categorical column expanded to one indicator per level, levels in
//! first-seen order. Label and group values either follow explicit level lists
//! or, when every value is a nonnegative integer, are used as indices directly;
//! otherwise levels are taken in first-seen order.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Scalar};

/// Roles of the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    pub label: String,
    #[serde(default)]
    pub label_levels: Option<Vec<String>>,
    /// Group id is the cross product of these columns, first column varying fastest.
    pub group_columns: Vec<String>,
    #[serde(default)]
    pub group_levels: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
}

impl ColumnSchema {
    /// Schema matching the layout produced by [`write_csv`].
    pub fn identity(dim: usize) -> Self {
        Self {
            label: "label".into(),
            label_levels: None,
            group_columns: vec!["group".into()],
            group_levels: None,
            numeric: (0..dim).map(|j| format!("f{j}")).collect(),
            categorical: vec![],
        }
    }
}

/// Per-column mean/std of the numeric features, fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit<T: Scalar>(train: &Dataset<T>, columns: &[usize]) -> Self {
        let n = train.len().max(1) as f64;
        let mut mean = vec![0.0; columns.len()];
        for i in 0..train.len() {
            let x = train.x(i);
            for (m, &c) in mean.iter_mut().zip(columns) {
                *m += x[c].as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; columns.len()];
        for i in 0..train.len() {
            let x = train.x(i);
            for ((v, &c), m) in var.iter_mut().zip(columns).zip(&mean) {
                *v += (x[c].as_f64() - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            columns: columns.to_vec(),
            mean,
            std,
        }
    }

    pub fn apply<T: Scalar>(&self, ds: &Dataset<T>) -> Dataset<T> {
        let mut feats = ds.features().clone();
        for i in 0..feats.rows() {
            let row = feats.row_mut(i);
            for ((&c, &m), &s) in self.columns.iter().zip(&self.mean).zip(&self.std) {
                row[c] = T::of((row[c].as_f64() - m) / s);
            }
        }
        ds.with_features(feats).expect("same row count")
    }
}

/// How the raw columns were turned into a [`Dataset`]; serialized as the
/// companion metadata JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub schema: ColumnSchema,
    pub feature_names: Vec<String>,
    /// Indices of feature columns holding numeric (standardizable) values.
    pub numeric_features: Vec<usize>,
    pub categorical_levels: Vec<(String, Vec<String>)>,
    pub label_levels: Vec<String>,
    pub group_levels: Vec<Vec<String>>,
    #[serde(default)]
    pub standardization: Option<Standardization>,
}

impl Encoding {
    pub fn group_names(&self) -> Vec<String> {
        let total: usize = self.group_levels.iter().map(Vec::len).product();
        (0..total)
            .map(|mut id| {
                let mut parts = Vec::new();
                for levels in &self.group_levels {
                    parts.push(levels[id % levels.len()].clone());
                    id /= levels.len();
                }
                parts.join("/")
            })
            .collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
}

/// Resolves the levels of a discrete column: explicit list, integer ids, or first-seen order.
fn resolve_levels(
    values: &[&str],
    explicit: Option<&Vec<String>>,
    column: &str,
) -> Result<Vec<String>> {
    if let Some(levels) = explicit {
        if let Some(v) = values.iter().find(|v| !levels.iter().any(|l| l == *v)) {
            return Err(Error::Schema(format!(
                "value `{v}` in column `{column}` is not among the declared levels"
            )));
        }
        return Ok(levels.clone());
    }
    let ints: Option<Vec<usize>> = values.iter().map(|v| v.parse::<usize>().ok()).collect();
    if let Some(ints) = ints {
        let max = ints.iter().copied().max().unwrap_or(0);
        return Ok((0..=max).map(|i| i.to_string()).collect());
    }
    let mut levels: Vec<String> = Vec::new();
    for v in values {
        if !levels.iter().any(|l| l == v) {
            levels.push(v.to_string());
        }
    }
    Ok(levels)
}

/// Reads a CSV with a header row. Lines starting with `#` are skipped and
/// empty fields are rejected. Row numbers in errors count data rows from 1.
pub fn load_csv<T: Scalar>(path: &Path, schema: &ColumnSchema) -> Result<(Dataset<T>, Encoding)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let records: Vec<csv::StringRecord> =
        reader.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::Schema("CSV has no data rows".into()));
    }
    if schema.group_columns.is_empty() {
        return Err(Error::Schema(
            "at least one group column is required".into(),
        ));
    }

    let label_col = column_index(&headers, &schema.label)?;
    let group_cols: Vec<usize> = schema
        .group_columns
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<_>>()?;
    let numeric_cols: Vec<usize> = schema
        .numeric
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<_>>()?;
    let cat_cols: Vec<usize> = schema
        .categorical
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<_>>()?;

    for (row, rec) in records.iter().enumerate() {
        if rec.len() != headers.len() {
            return Err(Error::Schema(format!(
                "row {} has {} fields, header has {}",
                row + 1,
                rec.len(),
                headers.len()
            )));
        }
        if let Some(j) = rec.iter().position(|v| v.is_empty()) {
            return Err(Error::MissingValue {
                row: row + 1,
                column: headers[j].to_string(),
            });
        }
    }

    let column_values =
        |c: usize| -> Vec<&str> { records.iter().map(|r| r.get(c).unwrap()).collect() };

    let label_values = column_values(label_col);
    let label_levels = resolve_levels(&label_values, schema.label_levels.as_ref(), &schema.label)?;
    if let Some(explicit) = &schema.group_levels {
        if explicit.len() != group_cols.len() {
            return Err(Error::Schema(
                "group_levels must list levels for every group column".into(),
            ));
        }
    }
    let group_levels: Vec<Vec<String>> = group_cols
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let explicit = schema.group_levels.as_ref().map(|g| &g[k]);
            resolve_levels(&column_values(c), explicit, &schema.group_columns[k])
        })
        .collect::<Result<_>>()?;
    let categorical_levels: Vec<(String, Vec<String>)> = cat_cols
        .iter()
        .zip(&schema.categorical)
        .map(|(&c, name)| Ok((name.clone(), resolve_levels_first_seen(&column_values(c)))))
        .collect::<Result<_>>()?;

    let mut feature_names: Vec<String> = schema.numeric.clone();
    for (name, levels) in &categorical_levels {
        feature_names.extend(levels.iter().map(|l| format!("{name}={l}")));
    }
    let dim = feature_names.len();

    let lookup = |levels: &[String]| -> HashMap<String, usize> {
        levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect()
    };
    let label_index = lookup(&label_levels);
    let group_index: Vec<HashMap<String, usize>> = group_levels.iter().map(|l| lookup(l)).collect();
    let cat_index: Vec<HashMap<String, usize>> =
        categorical_levels.iter().map(|(_, l)| lookup(l)).collect();

    let mut data = Vec::with_capacity(records.len() * dim);
    let mut labels = Vec::with_capacity(records.len());
    let mut groups = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        for (&c, name) in numeric_cols.iter().zip(&schema.numeric) {
            let raw = rec.get(c).unwrap();
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: name.clone(),
                value: raw.to_string(),
            })?;
            data.push(T::of(v));
        }
        for (k, &c) in cat_cols.iter().enumerate() {
            let hot = cat_index[k][rec.get(c).unwrap()];
            let width = categorical_levels[k].1.len();
            data.extend((0..width).map(|j| if j == hot { T::one() } else { T::zero() }));
        }
        labels.push(label_index[rec.get(label_col).unwrap()]);
        let mut id = 0;
        let mut radix = 1;
        for (k, &c) in group_cols.iter().enumerate() {
            id += group_index[k][rec.get(c).unwrap()] * radix;
            radix *= group_levels[k].len();
        }
        groups.push(id);
    }
    let num_groups: usize = group_levels.iter().map(Vec::len).product();
    let features = Matrix::from_vec(records.len(), dim, data)?;
    let ds = Dataset::new(
        features,
        labels,
        groups,
        label_levels.len().max(2),
        num_groups,
    )?;
    let encoding = Encoding {
        schema: schema.clone(),
        feature_names,
        numeric_features: (0..schema.numeric.len()).collect(),
        categorical_levels,
        label_levels,
        group_levels,
        standardization: None,
    };
    Ok((ds, encoding))
}

fn resolve_levels_first_seen(values: &[&str]) -> Vec<String> {
    let mut levels: Vec<String> = Vec::new();
    for v in values {
        if !levels.iter().any(|l| l == v) {
            levels.push(v.to_string());
        }
    }
    levels
}

/// Writes `# `-prefixed preamble lines, then features as `f0..f{d-1}`,
/// `label` and `group`.
pub fn write_csv<T: Scalar>(ds: &Dataset<T>, path: &Path, preamble: &[String]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    for line in preamble {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    header.push("group".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.x(i).iter().map(|v| v.to_string()).collect();
        rec.push(ds.labels()[i].to_string());
        rec.push(ds.groups()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_group_mixture, MixtureSpec};
    use crate::numerics::RngStream;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn two_row_toy_csv() {
        let f = write_tmp("x,color,y,g\n1.5,red,0,0\n2.5,blue,1,1\n");
        let schema = ColumnSchema {
            label: "y".into(),
            label_levels: None,
            group_columns: vec!["g".into()],
            group_levels: None,
            numeric: vec!["x".into()],
            categorical: vec!["color".into()],
        };
        let (ds, enc) = load_csv::<f64>(f.path(), &schema).unwrap();
        assert_eq!(ds.group_counts(), vec![1, 1]);
        assert_eq!(enc.feature_names, vec!["x", "color=red", "color=blue"]);
        assert_eq!(ds.x(1), &[2.5, 0.0, 1.0]);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let f = write_tmp("x,y,g\n1,0,0\n");
        let mut schema = ColumnSchema::identity(0);
        schema.label = "y".into();
        schema.group_columns = vec!["g".into()];
        schema.numeric = vec!["nope".into()];
        assert!(matches!(
            load_csv::<f64>(f.path(), &schema),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn bad_number_reports_row() {
        let f = write_tmp("x,y,g\n1,0,0\n2,1,0\nabc,0,1\n");
        let schema = ColumnSchema {
            label: "y".into(),
            label_levels: None,
            group_columns: vec!["g".into()],
            group_levels: None,
            numeric: vec!["x".into()],
            categorical: vec![],
        };
        match load_csv::<f64>(f.path(), &schema) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_field_rejected() {
        let f = write_tmp("x,y,g\n1,,0\n");
        let schema = ColumnSchema {
            label: "y".into(),
            label_levels: None,
            group_columns: vec!["g".into()],
            group_levels: None,
            numeric: vec!["x".into()],
            categorical: vec![],
        };
        assert!(matches!(
            load_csv::<f64>(f.path(), &schema),
            Err(Error::MissingValue { row: 1, .. })
        ));
    }

    #[test]
    fn crossed_groups_use_declared_levels() {
        let f = write_tmp("sex,inc,a\nM,hi,1\nF,lo,2\nF,hi,3\nM,lo,4\n");
        let schema = ColumnSchema {
            label: "inc".into(),
            label_levels: Some(vec!["lo".into(), "hi".into()]),
            group_columns: vec!["sex".into(), "inc".into()],
            group_levels: Some(vec![
                vec!["F".into(), "M".into()],
                vec!["lo".into(), "hi".into()],
            ]),
            numeric: vec!["a".into()],
            categorical: vec![],
        };
        let (ds, enc) = load_csv::<f64>(f.path(), &schema).unwrap();
        assert_eq!(ds.groups(), &[3, 0, 2, 1]);
        assert_eq!(ds.labels(), &[1, 0, 1, 0]);
        assert_eq!(enc.group_names(), vec!["F/lo", "M/lo", "F/hi", "M/hi"]);
    }

    #[test]
    fn write_then_load_round_trips() {
        let spec = MixtureSpec {
            q: vec![0.5, 0.3, 0.2],
            centers: vec![vec![vec![0.0, 1.0], vec![1.0, -1.0]]; 3],
            noise_std: 0.7,
        };
        let ds: Dataset<f64> = synth_group_mixture(&spec, 200, &mut RngStream::new(8)).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, f.path(), &["generated".to_string()]).unwrap();
        let (back, _) = load_csv::<f64>(f.path(), &ColumnSchema::identity(2)).unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.groups(), ds.groups());
    }

    #[test]
    fn standardization_uses_train_statistics() {
        let feats = Matrix::from_rows(1, [[1.0], [3.0]]).unwrap();
        let train = Dataset::new(feats, vec![0, 1], vec![0, 0], 2, 1).unwrap();
        let st = Standardization::fit(&train, &[0]);
        assert_eq!(st.mean, vec![2.0]);
        assert_eq!(st.std, vec![1.0]);
        let test = Dataset::new(
            Matrix::from_rows(1, [[5.0]]).unwrap(),
            vec![0],
            vec![0],
            2,
            1,
        )
        .unwrap();
        assert_eq!(st.apply(&test).x(0), &[3.0]);
    }
}
