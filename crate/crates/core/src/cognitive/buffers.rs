use serde::Serialize;

use super::memory::{Chunk, RetrievalFailure};
use crate::game::{Cell, GameState, Orientation, Pose, TileKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Goal {
    FindPig,
    CheckExit,
    CatchPig,
    Navigate,
    Rotate,
    Exit,
}

/// What lies one step away from the player in a given direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Surround {
    Open,
    Exit,
    Wall,
    Pig,
    Ai,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perception {
    pub player: Pose,
    pub ai: Pose,
    pub pig: Cell,
    pub actions_remaining: u32,
    pub trial_index: u32,
    /// Indexed in N, E, S, W order.
    pub surroundings: [Surround; 4],
}

impl Perception {
    pub fn of(state: &GameState) -> Self {
        let grid = state.layout().grid();
        let player = state.player();
        let surroundings = Orientation::ALL.map(|d| match grid.neighbor(player.cell, d) {
            Some(c) if c == state.pig() => Surround::Pig,
            Some(c) if c == state.ai().cell => Surround::Ai,
            Some(c) => match grid.get(c) {
                Some(TileKind::Passable) => Surround::Open,
                Some(TileKind::Exit) => Surround::Exit,
                _ => Surround::Wall,
            },
            None => Surround::Wall,
        });
        Self {
            player,
            ai: state.ai(),
            pig: state.pig(),
            actions_remaining: state.actions_remaining(),
            trial_index: state.trial_index(),
            surroundings,
        }
    }

    pub fn toward(&self, dir: Orientation) -> Surround {
        self.surroundings[dir as usize]
    }

    pub fn ai_pig_distance(&self) -> usize {
        self.ai.cell.manhattan(self.pig)
    }

    pub fn player_adjacent_to_pig(&self) -> bool {
        self.player.cell.manhattan(self.pig) == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitDecision {
    Proceed,
    CheckAgain,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockVerdict {
    NotBlocked,
    BlockedByPig,
    /// Carries the randomly chosen alternative direction, if any is free.
    BlockedByAi(Option<Orientation>),
    BlockedByWall(Option<Orientation>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Imaginal {
    pub previous_distance: Option<usize>,
    pub non_improving_checks: u32,
    pub exit_decision: Option<ExitDecision>,
    pub exit_committed: bool,
    pub pursuit_committed: bool,
    /// Enough actions left to keep chasing while undecided.
    pub pursue_allowed: bool,
    pub block: Option<BlockVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelBuffers {
    pub goal: Goal,
    pub visual: Option<Perception>,
    pub imaginal: Imaginal,
    pub retrieval: Option<Result<Chunk, RetrievalFailure>>,
}

impl Default for ModelBuffers {
    fn default() -> Self {
        Self { goal: Goal::FindPig, visual: None, imaginal: Imaginal::default(), retrieval: None }
    }
}

impl ModelBuffers {
    pub fn retrieved(&self) -> Option<&Chunk> {
        self.retrieval.as_ref().and_then(|r| r.as_ref().ok())
    }

    pub fn retrieval_failed(&self) -> bool {
        matches!(self.retrieval, Some(Err(_)))
    }

    /// Clears per-trial state; learned utilities live elsewhere.
    pub fn reset_for_trial(&mut self) {
        *self = Self::default();
    }
}
