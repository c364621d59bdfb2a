//! Experiment files. Every file is JSON, unknown keys are rejected and
//! relative paths are resolved against the directory of the file itself.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dpdg_core::data::{
    adult, load_csv, synth_group_mixture, ColumnSchema, MixtureSpec, Standardization,
};
use dpdg_core::numerics::RngStream;
use dpdg_core::trainers::TrainConfig;
use dpdg_core::Dataset64;

use crate::error::{CliError, CliResult};

/// Environment variable naming the directory that relative `out` paths live under.
pub const OUT_ROOT_ENV: &str = "DPDG_OUT_ROOT";
/// Environment variable fixing the sweep worker count.
pub const THREADS_ENV: &str = "DPDG_THREADS";

/// Stream keys of the synthetic train and test draws, disjoint from the trainer's.
pub const MIXTURE_TRAIN_STREAM: u64 = 10;
pub const MIXTURE_TEST_STREAM: u64 = 11;

/// Where the examples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// The ADULT table, split 40000/3000/5842 by `split_seed` and standardized.
    Adult {
        path: PathBuf,
        #[serde(default)]
        split_seed: u64,
    },
    /// Fresh train and test draws from a Gaussian mixture for every seed.
    Mixture {
        spec: MixtureSpec,
        n_train: usize,
        n_test: usize,
    },
    /// Pre-split CSV files. Numeric columns are standardized with train statistics
    /// when `standardize` is set.
    Csv {
        train: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
        #[serde(default)]
        schema: Option<ColumnSchema>,
        #[serde(default)]
        standardize: bool,
    },
}

/// Train and evaluation splits of one seed.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset64,
    pub test: Option<Dataset64>,
}

impl DataSource {
    /// Whether the data differ between seeds.
    pub fn depends_on_seed(&self) -> bool {
        matches!(self, DataSource::Mixture { .. })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DataSource::Adult { path, .. } => fix(path),
            DataSource::Mixture { .. } => {}
            DataSource::Csv { train, test, .. } => {
                fix(train);
                if let Some(t) = test {
                    fix(t);
                }
            }
        }
    }

    pub fn load(&self, seed: u64) -> CliResult<Splits> {
        match self {
            DataSource::Adult { path, split_seed } => {
                if !path.exists() {
                    return Err(CliError::data(format!(
                        "ADULT file {} not found",
                        path.display()
                    )));
                }
                let s = adult::load::<f64>(path, *split_seed)?;
                Ok(Splits {
                    train: s.train,
                    test: Some(s.test),
                })
            }
            DataSource::Mixture {
                spec,
                n_train,
                n_test,
            } => {
                let root = RngStream::new(seed);
                let train =
                    synth_group_mixture(spec, *n_train, &mut root.derive(MIXTURE_TRAIN_STREAM))?;
                let test = if *n_test > 0 {
                    Some(synth_group_mixture(
                        spec,
                        *n_test,
                        &mut root.derive(MIXTURE_TEST_STREAM),
                    )?)
                } else {
                    None
                };
                Ok(Splits { train, test })
            }
            DataSource::Csv {
                train,
                test,
                schema,
                standardize,
            } => {
                let schema = match schema {
                    Some(s) => s.clone(),
                    None => identity_schema(train)?,
                };
                let (tr, enc) = load_csv::<f64>(train, &schema)?;
                let te = match test {
                    Some(p) => Some(load_csv::<f64>(p, &schema)?.0),
                    None => None,
                };
                if *standardize {
                    let st = Standardization::fit(&tr, &enc.numeric_features);
                    Ok(Splits {
                        train: st.apply(&tr),
                        test: te.map(|t| st.apply(&t)),
                    })
                } else {
                    Ok(Splits {
                        train: tr,
                        test: te,
                    })
                }
            }
        }
    }
}

/// Schema of a CSV in the `f0.., label, group` layout, read from its header.
pub fn identity_schema(path: &Path) -> CliResult<ColumnSchema> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let names: Vec<&str> = headers.iter().collect();
    for required in ["label", "group"] {
        if !names.contains(&required) {
            return Err(CliError::data(format!(
                "{} has no `{required}` column; pass a schema",
                path.display()
            )));
        }
    }
    let mut schema = ColumnSchema::identity(0);
    schema.numeric = names
        .iter()
        .filter(|h| **h != "label" && **h != "group")
        .map(|h| h.to_string())
        .collect();
    Ok(schema)
}

/// `dpdg train` payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub data: DataSource,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Axis of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Grid {
    /// Target ε values for a DP base config; `null` trains without noise (σ = 0).
    /// σ is solved from the accountant at δ (default 1/(2n)).
    Eps {
        values: Vec<Option<f64>>,
        #[serde(default)]
        delta: Option<f64>,
    },
    /// Additive gradient-noise std for a non-DP base config.
    SigmaN { values: Vec<f64> },
    /// Several algorithms on the same data, each a full config.
    Configs { values: Vec<TrainConfig> },
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Eps { values, .. } => values.len(),
            Grid::SigmaN { values } => values.len(),
            Grid::Configs { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `dpdg sweep` payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub data: DataSource,
    /// Template for every cell; ignored by a `configs` grid.
    #[serde(default)]
    pub base: Option<TrainConfig>,
    pub grid: Grid,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// `dpdg data gen` payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenFile {
    pub spec: MixtureSpec,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Parses a JSON file, reporting the line and column of any schema violation.
pub fn read_json<C: DeserializeOwned>(path: &Path) -> CliResult<C> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn parse_json<C: DeserializeOwned>(text: &str) -> Result<C, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

pub fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn read_train_file(path: &Path) -> CliResult<TrainFile> {
    let mut f: TrainFile = read_json(path)?;
    f.data.resolve_paths(&base_dir(path));
    Ok(f)
}

pub fn read_sweep_file(path: &Path) -> CliResult<SweepFile> {
    let mut f: SweepFile = read_json(path)?;
    f.data.resolve_paths(&base_dir(path));
    Ok(f)
}

/// Joins a relative output path onto `$DPDG_OUT_ROOT` (or the working directory).
pub fn output_dir(explicit: Option<&Path>, configured: Option<&Path>, default: &str) -> PathBuf {
    let chosen = explicit
        .map(Path::to_path_buf)
        .or_else(|| configured.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(default));
    if chosen.is_absolute() {
        return chosen;
    }
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root).join(chosen),
        _ => chosen,
    }
}

/// Worker count from `$DPDG_THREADS`; `None` lets the pool decide.
pub fn thread_count() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        _ => Ok(None),
    }
}
