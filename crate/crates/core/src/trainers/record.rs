use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{NoiseConvention, TrainConfig};
use crate::error::Result;
use crate::metrics::GroupReport;
use crate::privacy::PrivacyReport;

/// Metrics of one split at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub groups: GroupReport,
    pub accuracy: f64,
    pub worst_group_accuracy: Option<f64>,
    pub disparity: Option<f64>,
    /// Binary tasks only.
    pub cgap: Option<f64>,
    /// Adversarial runs only.
    pub robust_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    pub train: SplitMetrics,
    pub test: Option<SplitMetrics>,
}

/// Trajectory and outcome of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub seed: u64,
    pub noise_convention: NoiseConvention,
    pub trajectory: Vec<EvalPoint>,
    /// Present for DP runs with σ > 0.
    pub privacy: Option<PrivacyReport>,
}

impl RunRecord {
    pub fn last(&self) -> &EvalPoint {
        self.trajectory
            .last()
            .expect("a run always logs its final step")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Long trajectory table: one row per evaluation point, overall metrics
    /// followed by per-group accuracies.
    pub fn write_trajectory_csv(&self, path: &Path, preamble: &[String]) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for line in preamble {
            writeln!(f, "# {line}")?;
        }
        let m = self.last().train.groups.num_groups();
        let mut header = vec!["step".to_string()];
        for split in ["train", "test"] {
            for col in [
                "accuracy",
                "worst_group_accuracy",
                "disparity",
                "cgap",
                "robust_accuracy",
            ] {
                header.push(format!("{split}_{col}"));
            }
            for g in 0..m {
                header.push(format!("{split}_acc_g{g}"));
            }
        }
        writeln!(f, "{}", header.join(","))?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for pt in &self.trajectory {
            let mut row = vec![pt.step.to_string()];
            for split in [Some(&pt.train), pt.test.as_ref()] {
                match split {
                    Some(s) => {
                        row.push(s.accuracy.to_string());
                        row.push(opt(s.worst_group_accuracy));
                        row.push(opt(s.disparity));
                        row.push(opt(s.cgap));
                        row.push(opt(s.robust_accuracy));
                        row.extend(s.groups.accuracy.iter().map(|a| opt(*a)));
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 5 + m)),
                }
            }
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}
