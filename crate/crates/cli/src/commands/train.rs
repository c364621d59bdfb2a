use std::path::{Path, PathBuf};

use serde::Serialize;

use dpdg_core::metrics::write_group_table;
use dpdg_core::numerics::RngStream;
use dpdg_core::trainers::{train, RunRecord, TrainConfig, TrainData};

use crate::config::{Splits, TrainFile};
use crate::error::{CliError, CliResult};
use crate::provenance::Provenance;

#[derive(Serialize)]
struct RecordFile<'a> {
    provenance: &'a Provenance,
    record: &'a RunRecord,
}

/// Trains `cfg` on `splits` with the stream of `seed`.
pub fn train_one(splits: &Splits, cfg: &TrainConfig, seed: u64) -> CliResult<RunRecord> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let data = TrainData::new(&splits.train, splits.test.as_ref());
    let (_, record) = train::<f64>(data, &cfg, &RngStream::new(seed))?;
    Ok(record)
}

/// Serialized form of `record.json`: provenance plus the run record.
pub fn record_json(record: &RunRecord, prov: &Provenance) -> CliResult<String> {
    serde_json::to_string_pretty(&RecordFile {
        provenance: prov,
        record,
    })
    .map_err(|e| CliError::data(e.to_string()))
}

/// Writes `record.json`, `trajectory.csv` and `groups.csv` into `dir`.
pub fn write_run(dir: &Path, record: &RunRecord, prov: &Provenance) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("record.json"), record_json(record, prov)?)?;
    let preamble = prov.preamble();
    record.write_trajectory_csv(&dir.join("trajectory.csv"), &preamble)?;
    let last = record.last();
    let mut rows = vec![(
        "final".to_string(),
        "train".to_string(),
        last.train.groups.clone(),
    )];
    if let Some(t) = &last.test {
        rows.push(("final".to_string(), "test".to_string(), t.groups.clone()));
    }
    write_group_table(&dir.join("groups.csv"), &rows, &preamble)?;
    Ok(())
}

/// Runs every seed of `file`, writing one `seed-<s>` directory per seed under `out_dir`.
pub fn run_train(file: &TrainFile, out_dir: &Path) -> CliResult<Vec<(PathBuf, RunRecord)>> {
    if file.seeds.is_empty() {
        return Err(CliError::config("seeds must not be empty"));
    }
    file.train.validate()?;
    let shared = if file.data.depends_on_seed() {
        None
    } else {
        Some(file.data.load(0)?)
    };
    let mut out = Vec::with_capacity(file.seeds.len());
    for &seed in &file.seeds {
        let owned;
        let splits = match &shared {
            Some(s) => s,
            None => {
                owned = file.data.load(seed)?;
                &owned
            }
        };
        let record = train_one(splits, &file.train, seed)?;
        let dir = out_dir.join(format!("seed-{seed}"));
        write_run(&dir, &record, &Provenance::new(file, Some(seed)))?;
        out.push((dir, record));
    }
    Ok(out)
}
