use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dpdg_core::metrics::wggap;
use dpdg_core::numerics::mean_se;
use dpdg_core::privacy::{sigma_for_budget, DpBudget};
use dpdg_core::sampling::is_sampling_probs;
use dpdg_core::trainers::{Algorithm, RunRecord, TrainConfig};

use super::train::train_one;
use crate::config::{thread_count, Grid, Splits, SweepFile};
use crate::error::{CliError, CliResult};
use crate::provenance::Provenance;

/// Final metrics of one (level, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: usize,
    pub level_index: usize,
    pub level: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub metrics: BTreeMap<String, f64>,
}

/// Mean and standard error of one metric over the seeds of a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub level_index: usize,
    pub level: String,
    pub metric: String,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub provenance: Provenance,
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    /// Summary entry for `metric` at grid position `level_index`.
    pub fn summary_of(&self, level_index: usize, metric: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.level_index == level_index && r.metric == metric)
    }

    /// Per-seed values of `metric` at `level_index`, in seed order.
    pub fn values(&self, level_index: usize, metric: &str) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| c.level_index == level_index)
            .filter_map(|c| c.metrics.get(metric).copied())
            .collect()
    }
}

fn level_labels(grid: &Grid) -> Vec<String> {
    match grid {
        Grid::Eps { values, .. } => values
            .iter()
            .map(|v| v.map_or_else(|| "inf".to_string(), |e| e.to_string()))
            .collect(),
        Grid::SigmaN { values } => values.iter().map(|v| v.to_string()).collect(),
        Grid::Configs { values } => values
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{i}:{}", c.algorithm.name()))
            .collect(),
    }
}

fn check_grid(file: &SweepFile) -> CliResult<()> {
    if file.grid.is_empty() {
        return Err(CliError::config("grid must not be empty"));
    }
    if file.seeds.is_empty() {
        return Err(CliError::config("seeds must not be empty"));
    }
    match (&file.grid, &file.base) {
        (Grid::Configs { values }, _) => {
            for c in values {
                c.validate()?;
            }
        }
        (_, None) => return Err(CliError::config("eps and sigma_n grids need a base config")),
        (Grid::Eps { values, delta }, Some(base)) => {
            if !base.algorithm.is_dp() {
                return Err(CliError::config("an eps grid needs a DP base algorithm"));
            }
            if values
                .iter()
                .flatten()
                .any(|e| !(*e > 0.0) || !e.is_finite())
            {
                return Err(CliError::config(
                    "eps grid values must be positive and finite, or null",
                ));
            }
            if let Some(d) = delta {
                if !(*d > 0.0 && *d < 1.0) {
                    return Err(CliError::config("grid delta must lie in (0, 1)"));
                }
            }
        }
        (Grid::SigmaN { values }, Some(base)) => {
            if base.algorithm.is_dp() {
                return Err(CliError::config(
                    "a sigma_n grid needs a non-DP base algorithm",
                ));
            }
            if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(CliError::config(
                    "sigma_n grid values must be finite and nonnegative",
                ));
            }
        }
    }
    Ok(())
}

/// Concrete config of one cell. ε targets are turned into σ with the accountant
/// at the run's own sampling rate p* and δ.
pub fn cell_config(file: &SweepFile, level: usize, splits: &Splits) -> CliResult<TrainConfig> {
    match &file.grid {
        Grid::Configs { values } => Ok(values[level].clone()),
        Grid::SigmaN { values } => {
            let mut c = file.base.clone().expect("checked");
            c.sigma_n = Some(values[level]);
            Ok(c)
        }
        Grid::Eps { values, delta } => {
            let mut c = file.base.clone().expect("checked");
            match values[level] {
                None => c.sigma = Some(0.0),
                Some(eps) => {
                    let n = splits.train.len();
                    let delta = delta.or(c.delta).unwrap_or(1.0 / (2.0 * n as f64));
                    let pbar = c.pbar.unwrap_or(f64::NAN);
                    let p = match c.algorithm {
                        Algorithm::DpIsSgd => {
                            let q = splits.train.group_probs_or_empirical();
                            is_sampling_probs(splits.train.groups(), &q, pbar)?.p_star()
                        }
                        _ => pbar,
                    };
                    c.sigma = Some(sigma_for_budget(p, c.steps, DpBudget::new(eps, delta)?)?);
                    c.delta = Some(delta);
                }
            }
            Ok(c)
        }
    }
}

/// Final-point metrics of a run. Gaps are train minus test.
pub fn cell_metrics(record: &RunRecord) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    let last = record.last();
    m.insert("accuracy_train".into(), last.train.accuracy);
    if let Some(w) = last.train.worst_group_accuracy {
        m.insert("worst_group_acc_train".into(), w);
    }
    if let Some(d) = last.train.disparity {
        m.insert("disparity_train".into(), d);
    }
    if let Some(r) = last.train.robust_accuracy {
        m.insert("robust_acc_train".into(), r);
    }
    if let Some(t) = &last.test {
        m.insert("accuracy_test".into(), t.accuracy);
        if let Some(w) = t.worst_group_accuracy {
            m.insert("worst_group_acc_test".into(), w);
        }
        if let Some(d) = t.disparity {
            m.insert("disparity_test".into(), d);
        }
        if let Ok(g) = wggap(&last.train.groups, &t.groups) {
            m.insert("wggap".into(), g.accuracy_gap);
            m.insert("wggap_loss".into(), g.loss_gap);
        }
        if let (Some(a), Some(b)) = (last.train.robust_accuracy, t.robust_accuracy) {
            m.insert("robust_acc_test".into(), b);
            m.insert("robust_gap".into(), a - b);
        }
        m.insert("accuracy_gap".into(), last.train.accuracy - t.accuracy);
    }
    if let Some(p) = &record.privacy {
        m.insert("eps".into(), p.budget.eps);
        m.insert("delta".into(), p.budget.delta);
    }
    if let Some(s) = record.config.sigma {
        m.insert("sigma".into(), s);
    }
    if let Some(s) = record.config.sigma_n {
        m.insert("sigma_n".into(), s);
    }
    m
}

fn summarize(cells: &[CellResult], labels: &[String]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for (li, label) in labels.iter().enumerate() {
        let mut by_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for c in cells.iter().filter(|c| c.level_index == li) {
            for (k, v) in &c.metrics {
                by_metric.entry(k.as_str()).or_default().push(*v);
            }
        }
        for (metric, values) in by_metric {
            let (mean, se) = mean_se(&values);
            rows.push(SummaryRow {
                level_index: li,
                level: label.clone(),
                metric: metric.to_string(),
                mean,
                se,
                n: values.len(),
            });
        }
    }
    rows
}

/// Runs every (level, seed) cell on a worker pool. Cells are numbered
/// level-major and the results come back in cell order whatever the thread count.
pub fn run_sweep_cells(file: &SweepFile) -> CliResult<SweepResult> {
    check_grid(file)?;
    let labels = level_labels(&file.grid);
    let data: Vec<Splits> = if file.data.depends_on_seed() {
        file.seeds
            .par_iter()
            .map(|&s| file.data.load(s))
            .collect::<CliResult<_>>()?
    } else {
        vec![file.data.load(0)?]
    };
    let splits_for = |si: usize| if data.len() == 1 { &data[0] } else { &data[si] };
    let s = file.seeds.len();
    let jobs: Vec<(usize, usize, usize)> = (0..labels.len() * s)
        .map(|cell| (cell, cell / s, cell % s))
        .collect();
    let run = || {
        jobs.par_iter()
            .map(|&(cell, li, si)| {
                let seed = file.seeds[si];
                let splits = splits_for(si);
                let cfg = cell_config(file, li, splits)?;
                let record = train_one(splits, &cfg, seed)?;
                Ok(CellResult {
                    cell,
                    level_index: li,
                    level: labels[li].clone(),
                    seed,
                    config: record.config.clone(),
                    metrics: cell_metrics(&record),
                })
            })
            .collect::<CliResult<Vec<_>>>()
    };
    let cells = match thread_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let summary = summarize(&cells, &labels);
    Ok(SweepResult {
        provenance: Provenance::new(file, None),
        cells,
        summary,
    })
}

/// Writes `summary.csv` (level, metric, mean, se, n), `cells.csv` (one row per
/// cell and metric) and `sweep.json`.
pub fn write_sweep(dir: &Path, result: &SweepResult) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    let preamble = result.provenance.preamble();
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("summary.csv"))?);
    for line in &preamble {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "level_index,level,metric,mean,se,n")?;
    for r in &result.summary {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            r.level_index, r.level, r.metric, r.mean, r.se, r.n
        )?;
    }
    f.flush()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("cells.csv"))?);
    for line in &preamble {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "cell,level_index,level,seed,metric,value")?;
    for c in &result.cells {
        for (k, v) in &c.metrics {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                c.cell, c.level_index, c.level, c.seed, k, v
            )?;
        }
    }
    f.flush()?;
    let json = serde_json::to_string_pretty(result).map_err(|e| CliError::data(e.to_string()))?;
    std::fs::write(dir.join("sweep.json"), json)?;
    Ok(())
}

pub fn run_sweep(file: &SweepFile, out_dir: &Path) -> CliResult<SweepResult> {
    let result = run_sweep_cells(file)?;
    write_sweep(out_dir, &result)?;
    Ok(result)
}
