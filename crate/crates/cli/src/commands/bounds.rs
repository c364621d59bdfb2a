use std::io::Write;
use std::path::Path;

use serde::Serialize;

use dpdg_core::privacy::{dg_bound_cmi, tv_from_dp, tv_from_dp_loose, DpBudget};

use crate::error::{CliError, CliResult};
use crate::provenance::Provenance;

/// One row of the bound comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub eps: f64,
    pub delta: f64,
    pub loose: f64,
    pub cmi: f64,
    pub tight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsParams {
    pub eps: Vec<f64>,
    pub deltas: Vec<f64>,
}

/// `count + 1` evenly spaced points on `[0, max]`.
pub fn linear_grid(max: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| max * i as f64 / count as f64).collect()
}

pub fn bound_rows(params: &BoundsParams) -> CliResult<Vec<BoundRow>> {
    if params.eps.is_empty() || params.deltas.is_empty() {
        return Err(CliError::config(
            "bounds needs at least one eps and one delta",
        ));
    }
    let mut rows = Vec::with_capacity(params.eps.len() * params.deltas.len());
    for &delta in &params.deltas {
        for &eps in &params.eps {
            let b = DpBudget::new(eps, delta)?;
            rows.push(BoundRow {
                eps,
                delta,
                loose: tv_from_dp_loose(b),
                cmi: dg_bound_cmi(eps),
                tight: tv_from_dp(b),
            });
        }
    }
    Ok(rows)
}

/// The tight bound never exceeds the loose one. It sits below the CMI line
/// `ε` for pure DP only, since that line ignores δ.
pub fn check_dominance(rows: &[BoundRow]) -> CliResult<()> {
    for r in rows {
        if r.tight > r.loose + 1e-12 {
            return Err(CliError::Verification(format!(
                "tight {} exceeds loose {} at eps={}, delta={}",
                r.tight, r.loose, r.eps, r.delta
            )));
        }
        if r.delta == 0.0 && r.tight > r.cmi + 1e-12 {
            return Err(CliError::Verification(format!(
                "tight {} exceeds cmi {} at eps={}",
                r.tight, r.cmi, r.eps
            )));
        }
    }
    Ok(())
}

pub fn write_bounds_csv(path: &Path, rows: &[BoundRow], prov: &Provenance) -> CliResult<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in prov.preamble() {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "eps,delta,loose,cmi,tight")?;
    for r in rows {
        writeln!(f, "{},{},{},{},{}", r.eps, r.delta, r.loose, r.cmi, r.tight)?;
    }
    f.flush()?;
    Ok(())
}

/// Writes `bounds.csv` into `out_dir` after checking dominance on every row.
pub fn run_bounds(params: &BoundsParams, out_dir: &Path) -> CliResult<Vec<BoundRow>> {
    let rows = bound_rows(params)?;
    check_dominance(&rows)?;
    std::fs::create_dir_all(out_dir)?;
    write_bounds_csv(
        &out_dir.join("bounds.csv"),
        &rows,
        &Provenance::new(params, None),
    )?;
    Ok(rows)
}
