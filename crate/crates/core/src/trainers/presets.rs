//! Reference configurations.

use super::config::{Algorithm, TrainConfig};
use crate::data::adult;

/// Training-set size of the ADULT preset.
pub const ADULT_TRAIN_SIZE: usize = 40_000;
/// SGD-family batch size and epoch count.
pub const ADULT_BATCH: usize = 256;
pub const ADULT_EPOCHS: usize = 20;
/// Gradient steps of the DP presets, which is also the accountant's T.
pub const ADULT_DP_STEPS: usize = 800;

/// Logistic regression on ADULT: lr 0.5, weight decay 0.01, batch 256 for
/// 20 epochs (SGD family), or clip 0.5 and sampling rate 0.005 for 800 steps
/// with σ = 1 (DP-SGD) or σ = 5 (DP-IS-SGD). Returns `None` for ADV_PGD.
pub fn adult(algorithm: Algorithm) -> Option<TrainConfig> {
    let sgd_steps = ADULT_EPOCHS * ADULT_TRAIN_SIZE / ADULT_BATCH;
    let mut cfg = match algorithm {
        Algorithm::Sgd | Algorithm::IsSgd | Algorithm::IwSgd => {
            let mut c = TrainConfig::new(algorithm, 0.5, sgd_steps);
            c.batch_size = Some(ADULT_BATCH);
            c
        }
        Algorithm::DpSgd | Algorithm::DpIsSgd => {
            let mut c = TrainConfig::new(algorithm, 0.5, ADULT_DP_STEPS);
            c.pbar = Some(0.005);
            c.clip = Some(0.5);
            c.sigma = Some(if algorithm == Algorithm::DpSgd {
                1.0
            } else {
                5.0
            });
            c
        }
        Algorithm::AdvPgd => return None,
    };
    cfg.weight_decay = 0.01;
    debug_assert_eq!(
        ADULT_TRAIN_SIZE + adult::VAL_SIZE + adult::TEST_SIZE,
        48_842
    );
    Some(cfg)
}
