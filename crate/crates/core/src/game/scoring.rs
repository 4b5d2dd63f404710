use serde::{Deserialize, Serialize};

use super::{GameError, TrialStatus};

pub const CATCH_REWARD: i32 = 25;
pub const EXIT_REWARD: i32 = 5;

/// How the per-action penalty interacts with trials that earn nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    /// Every action costs a point, so unscored trials go negative.
    #[default]
    DeductAlways,
    /// Actions are only deducted from a positive base reward.
    DeductOnScore,
}

pub fn base_reward(outcome: TrialStatus) -> i32 {
    match outcome {
        TrialStatus::Caught => CATCH_REWARD,
        TrialStatus::Exited => EXIT_REWARD,
        _ => 0,
    }
}

pub fn trial_score(outcome: TrialStatus, actions_used: u32, mode: ScoringMode) -> Result<i32, GameError> {
    if outcome == TrialStatus::Running {
        return Err(GameError::NotTerminal);
    }
    let base = base_reward(outcome);
    let penalty = actions_used as i32;
    Ok(match mode {
        ScoringMode::DeductAlways => base - penalty,
        ScoringMode::DeductOnScore if base > 0 => base - penalty,
        ScoringMode::DeductOnScore => 0,
    })
}
