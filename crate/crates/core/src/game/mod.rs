//! Deterministic, turn-based Pig Chase engine.

mod layout;
mod scoring;
mod state;
mod transcript;

use thiserror::Error;

pub use layout::{
    load_layout, ArrowKey, BoardLayout, Cell, LayoutError, Orientation, Pose, TileGrid, TileKind, BOARD_SIZE,
    DEFAULT_LAYOUT, PLAYABLE_SIZE,
};
pub use scoring::{base_reward, trial_score, ScoringMode, CATCH_REWARD, EXIT_REWARD};
pub use state::{
    AgentMove, Collaborator, GameRules, GameState, MoveEffect, PigMotion, TrialStatus, Turn, ATTENTION_CHECK_TRIAL,
    MAX_ACTIONS, PRACTICE_TRIALS, TRIALS_PER_SESSION,
};
pub use transcript::{Actor, PoseAfter, TranscriptEvent};

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum GameError {
    #[error("trial already ended ({0:?})")]
    Terminated(TrialStatus),
    #[error("action budget exhausted")]
    BudgetExhausted,
    #[error("outcome is not terminal")]
    NotTerminal,
    #[error("cell {0} is not walkable")]
    NotWalkable(Cell),
    #[error("pieces may not share a cell")]
    Overlap,
}
