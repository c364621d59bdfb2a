use std::path::Path;

use serde::Serialize;

use dpdg_core::mechanisms::{verify_suite, VerifyOptions, VerifyReport};

use crate::error::{CliError, CliResult};
use crate::provenance::Provenance;

#[derive(Serialize)]
struct VerifyOutput<'a> {
    provenance: Provenance,
    all_pass: bool,
    report: &'a VerifyReport,
}

/// Runs the claim suite, writes `verify.json` when `out_dir` is given and
/// fails with the first failing claim id.
pub fn run_verify(opts: &VerifyOptions, out_dir: Option<&Path>) -> CliResult<VerifyReport> {
    let report = verify_suite(opts)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let out = VerifyOutput {
            provenance: Provenance::new(opts, Some(opts.seed)),
            all_pass: report.all_pass(),
            report: &report,
        };
        let json = serde_json::to_string_pretty(&out).map_err(|e| CliError::data(e.to_string()))?;
        std::fs::write(dir.join("verify.json"), json)?;
    }
    Ok(report)
}

pub fn first_failure_error(report: &VerifyReport) -> Option<CliError> {
    report.first_failure().map(|c| {
        CliError::Verification(format!(
            "{} (lhs {:.6e}, rhs {:.6e}, tolerance {:.1e})",
            c.id, c.lhs, c.rhs, c.tolerance
        ))
    })
}
