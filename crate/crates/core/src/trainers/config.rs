use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::models::Arch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Algorithm {
    Sgd,
    IsSgd,
    IwSgd,
    DpSgd,
    DpIsSgd,
    AdvPgd,
}

impl Algorithm {
    pub fn is_dp(self) -> bool {
        matches!(self, Algorithm::DpSgd | Algorithm::DpIsSgd)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sgd => "SGD",
            Algorithm::IsSgd => "IS_SGD",
            Algorithm::IwSgd => "IW_SGD",
            Algorithm::DpSgd => "DP_SGD",
            Algorithm::DpIsSgd => "DP_IS_SGD",
            Algorithm::AdvPgd => "ADV_PGD",
        }
    }
}

/// Where the DP noise enters the update.
///
/// With `Summed` (the default) the step direction is
/// `(Σ clip(g_i) + σC·ξ) / (pbar·n)`; with `Averaged` it is
/// `Σ clip(g_i) / (pbar·n) + σC·ξ`. The accountant is the same for both. It
/// assumes the summed form, so `Averaged` adds `pbar·n` times more noise than
/// the accounting requires.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    #[default]
    Summed,
    Averaged,
}

/// L∞ projected-gradient attack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgdConfig {
    pub gamma: f64,
    pub attack_steps: usize,
    pub attack_step_size: f64,
    #[serde(default)]
    pub random_start: bool,
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return param_err("pgd.gamma must be finite and nonnegative");
        }
        if !(self.attack_step_size >= 0.0) {
            return param_err("pgd.attack_step_size must be nonnegative");
        }
        Ok(())
    }
}

/// Model family; input and output sizes come from the data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    #[default]
    Logreg,
    Mlp {
        hidden: usize,
    },
}

impl ModelSpec {
    pub fn arch(self, dim: usize, classes: usize) -> Arch {
        match self {
            ModelSpec::Logreg => Arch::Logreg { dim, classes },
            ModelSpec::Mlp { hidden } => Arch::Mlp {
                dim,
                hidden,
                classes,
            },
        }
    }
}

fn default_tau() -> f64 {
    0.1
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub model: ModelSpec,
    pub lr: f64,
    pub steps: usize,
    /// Batch size of the with-replacement samplers (SGD, IS, IW, ADV).
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Poisson sampling rate of the DP trainers.
    #[serde(default)]
    pub pbar: Option<f64>,
    /// Per-example clipping norm C.
    #[serde(default)]
    pub clip: Option<f64>,
    /// DP noise multiplier σ; the noise std is σC.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Additive gradient-noise std of the non-DP trainers.
    #[serde(default)]
    pub sigma_n: Option<f64>,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default)]
    pub pgd: Option<PgdConfig>,
    #[serde(default)]
    pub noise_convention: NoiseConvention,
    /// δ of the privacy report; 1/(2n) when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Steps between evaluations; ⌈steps/50⌉ when absent, 0 for final only.
    #[serde(default)]
    pub eval_every: Option<usize>,
    /// Bin width of the calibration gap.
    #[serde(default = "default_tau")]
    pub cgap_tau: f64,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    /// A config with every optional field unset.
    pub fn new(algorithm: Algorithm, lr: f64, steps: usize) -> Self {
        Self {
            algorithm,
            model: ModelSpec::Logreg,
            lr,
            steps,
            batch_size: None,
            pbar: None,
            clip: None,
            sigma: None,
            sigma_n: None,
            weight_decay: 0.0,
            pgd: None,
            noise_convention: NoiseConvention::Summed,
            delta: None,
            eval_every: None,
            cgap_tau: default_tau(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return param_err("lr must be positive and finite");
        }
        if self.steps == 0 {
            return param_err("steps must be at least 1");
        }
        if !(self.weight_decay >= 0.0) {
            return param_err("weight_decay must be nonnegative");
        }
        crate::metrics::bins_for(self.cgap_tau)?;
        if self.algorithm.is_dp() {
            let pbar = self.pbar.unwrap_or(f64::NAN);
            if !(pbar > 0.0 && pbar <= 1.0) {
                return param_err(format!("{} needs pbar in (0, 1]", self.algorithm.name()));
            }
            if !(self.clip.unwrap_or(0.0) > 0.0) {
                return param_err(format!("{} needs clip C > 0", self.algorithm.name()));
            }
            match self.sigma {
                Some(s) if s >= 0.0 && s.is_finite() => {}
                _ => {
                    return param_err(format!(
                        "{} needs a finite sigma >= 0",
                        self.algorithm.name()
                    ))
                }
            }
            if self.sigma_n.is_some() {
                return param_err("sigma_n applies to non-DP trainers; use sigma");
            }
            if let Some(d) = self.delta {
                if !(d > 0.0 && d < 1.0) {
                    return param_err("delta must lie in (0, 1)");
                }
            }
        } else {
            if self.batch_size.unwrap_or(0) == 0 {
                return param_err(format!("{} needs batch_size >= 1", self.algorithm.name()));
            }
            if let Some(s) = self.sigma_n {
                if !(s >= 0.0) || !s.is_finite() {
                    return param_err("sigma_n must be finite and nonnegative");
                }
            }
            if self.sigma.is_some() || self.clip.is_some() {
                return param_err("sigma and clip apply to DP trainers only");
            }
        }
        match &self.pgd {
            Some(p) => p.validate()?,
            None if self.algorithm == Algorithm::AdvPgd => {
                return param_err("ADV_PGD needs a pgd block")
            }
            None => {}
        }
        if self.model == (ModelSpec::Mlp { hidden: 0 }) {
            return param_err("mlp needs at least one hidden unit");
        }
        Ok(())
    }

    /// ⌈steps/50⌉, or the configured interval.
    pub fn eval_interval(&self) -> usize {
        self.eval_every.unwrap_or_else(|| self.steps.div_ceil(50))
    }

    pub fn is_eval_step(&self, t: usize) -> bool {
        let k = self.eval_interval();
        t == self.steps || (k > 0 && t % k == 0)
    }
}
