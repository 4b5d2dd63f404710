use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::{ArrowKey, BoardLayout, Cell, Orientation, Pose};
use super::scoring::ScoringMode;
use super::GameError;

pub const MAX_ACTIONS: u32 = 25;
pub const TRIALS_PER_SESSION: u32 = 15;
pub const PRACTICE_TRIALS: u32 = 3;
/// Trial on which participants are told to leave through the rightmost exit.
pub const ATTENTION_CHECK_TRIAL: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrialStatus {
    Running,
    Caught,
    Exited,
    Exhausted,
    TimedOut,
}

impl TrialStatus {
    pub fn is_terminal(self) -> bool {
        self != TrialStatus::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Running => "running",
            TrialStatus::Caught => "caught",
            TrialStatus::Exited => "exited",
            TrialStatus::Exhausted => "exhausted",
            TrialStatus::TimedOut => "timed_out",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveEffect {
    Moved,
    Rotated,
    Bumped,
    Held,
}

/// One sub-move of a non-player piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMove {
    Hold,
    Rotate(Orientation),
    Advance,
    /// Turn and advance in a single sub-move.
    Step(Orientation),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PigMotion {
    Static,
    Random { p_stay: f64 },
}

impl Default for PigMotion {
    fn default() -> Self {
        PigMotion::Random { p_stay: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GameRules {
    pub pig_motion: PigMotion,
    pub scoring: ScoringMode,
}

/// Anything that answers a player action with one move of the AI piece.
pub trait Collaborator {
    fn reply(&self, state: &GameState) -> AgentMove;
}

/// Everything that happened during one accepted keypress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub key: ArrowKey,
    pub player: MoveEffect,
    pub ai_move: AgentMove,
    pub ai: MoveEffect,
    pub pig: MoveEffect,
    pub player_after: Pose,
    pub ai_after: Pose,
    pub pig_after: Cell,
    pub actions_used: u32,
    pub status: TrialStatus,
}

#[derive(Debug, Clone)]
pub struct GameState {
    layout: Arc<BoardLayout>,
    rules: GameRules,
    player: Pose,
    ai: Pose,
    pig: Cell,
    actions_used: u32,
    trial_index: u32,
    status: TrialStatus,
    rng: ChaCha8Rng,
}

impl GameState {
    pub fn new(layout: Arc<BoardLayout>, rules: GameRules, trial_index: u32, seed: u64) -> Self {
        Self {
            player: layout.player_start(),
            ai: layout.ai_start(),
            pig: layout.pig_start(),
            layout,
            rules,
            actions_used: 0,
            trial_index,
            status: TrialStatus::Running,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Places the pieces explicitly; used for scripted scenarios.
    pub fn with_positions(mut self, player: Pose, ai: Pose, pig: Cell) -> Result<Self, GameError> {
        for cell in [player.cell, ai.cell, pig] {
            if !self.layout.grid().is_walkable(cell) {
                return Err(GameError::NotWalkable(cell));
            }
        }
        if !self.layout.grid().is_passable(pig) {
            return Err(GameError::NotWalkable(pig));
        }
        if player.cell == ai.cell || player.cell == pig || ai.cell == pig {
            return Err(GameError::Overlap);
        }
        self.player = player;
        self.ai = ai;
        self.pig = pig;
        Ok(self)
    }

    pub fn with_actions_used(mut self, actions_used: u32) -> Self {
        self.actions_used = actions_used.min(MAX_ACTIONS);
        self
    }

    pub fn layout(&self) -> &BoardLayout {
        &self.layout
    }

    pub fn rules(&self) -> GameRules {
        self.rules
    }

    pub fn player(&self) -> Pose {
        self.player
    }

    pub fn ai(&self) -> Pose {
        self.ai
    }

    pub fn pig(&self) -> Cell {
        self.pig
    }

    pub fn actions_used(&self) -> u32 {
        self.actions_used
    }

    pub fn actions_remaining(&self) -> u32 {
        MAX_ACTIONS - self.actions_used
    }

    pub fn trial_index(&self) -> u32 {
        self.trial_index
    }

    pub fn status(&self) -> TrialStatus {
        self.status
    }

    pub fn is_practice(&self) -> bool {
        self.trial_index <= PRACTICE_TRIALS
    }

    fn occupied(&self, cell: Cell) -> bool {
        cell == self.player.cell || cell == self.ai.cell || cell == self.pig
    }

    /// Passable neighbours of `cell` not taken by any piece.
    pub fn free_passable_neighbors(&self, cell: Cell) -> Vec<(Orientation, Cell)> {
        let grid = self.layout.grid();
        grid.neighbors(cell).filter(|(_, c)| grid.is_passable(*c) && !self.occupied(*c)).collect()
    }

    /// Whether a piece standing at `from` could advance in `dir`.
    pub fn can_enter(&self, from: Cell, dir: Orientation) -> bool {
        let grid = self.layout.grid();
        grid.neighbor(from, dir).is_some_and(|c| grid.is_walkable(c) && !self.occupied(c))
    }

    fn ensure_running(&self) -> Result<(), GameError> {
        if self.status.is_terminal() {
            return Err(GameError::Terminated(self.status));
        }
        if self.actions_used >= MAX_ACTIONS {
            return Err(GameError::BudgetExhausted);
        }
        Ok(())
    }

    /// Applies one keypress to the player piece. Every accepted key costs an
    /// action, whether it moves, rotates or bumps.
    pub fn apply_player_key(&mut self, key: ArrowKey) -> Result<MoveEffect, GameError> {
        self.ensure_running()?;
        let dir = key.direction();
        let effect = if dir != self.player.facing {
            self.player.facing = dir;
            MoveEffect::Rotated
        } else if self.can_enter(self.player.cell, dir) {
            self.player.cell = self.layout.grid().neighbor(self.player.cell, dir).unwrap();
            MoveEffect::Moved
        } else {
            MoveEffect::Bumped
        };
        self.actions_used += 1;
        Ok(effect)
    }

    /// Applies the AI piece's reply. Does not touch the action budget.
    pub fn apply_ai_move(&mut self, mv: AgentMove) -> MoveEffect {
        match mv {
            AgentMove::Hold => MoveEffect::Held,
            AgentMove::Rotate(dir) if dir == self.ai.facing => MoveEffect::Held,
            AgentMove::Rotate(dir) => {
                self.ai.facing = dir;
                MoveEffect::Rotated
            }
            AgentMove::Advance => self.advance_ai(),
            AgentMove::Step(dir) => {
                self.ai.facing = dir;
                self.advance_ai()
            }
        }
    }

    fn advance_ai(&mut self) -> MoveEffect {
        if self.can_enter(self.ai.cell, self.ai.facing) {
            self.ai.cell = self.layout.grid().neighbor(self.ai.cell, self.ai.facing).unwrap();
            MoveEffect::Moved
        } else {
            MoveEffect::Bumped
        }
    }

    /// Moves the pig according to the configured motion mode.
    pub fn pig_step(&mut self) -> MoveEffect {
        let PigMotion::Random { p_stay } = self.rules.pig_motion else {
            return MoveEffect::Held;
        };
        let draw: f64 = self.rng.random();
        if draw < p_stay {
            return MoveEffect::Held;
        }
        let options = self.free_passable_neighbors(self.pig);
        if options.is_empty() {
            return MoveEffect::Held;
        }
        let pick = self.rng.random_range(0..options.len());
        self.pig = options[pick].1;
        MoveEffect::Moved
    }

    /// Outcome of the current position. Caught takes precedence over Exited,
    /// which takes precedence over Exhausted.
    pub fn check_termination(&self) -> TrialStatus {
        if self.status == TrialStatus::TimedOut {
            return self.status;
        }
        if self.free_passable_neighbors(self.pig).is_empty() {
            TrialStatus::Caught
        } else if self.layout.tile(self.player.cell) == Some(super::TileKind::Exit) {
            TrialStatus::Exited
        } else if self.actions_used >= MAX_ACTIONS {
            TrialStatus::Exhausted
        } else {
            TrialStatus::Running
        }
    }

    /// A full turn: player key, AI reply, pig step, termination check.
    pub fn play_turn(&mut self, key: ArrowKey, collaborator: &dyn Collaborator) -> Result<Turn, GameError> {
        let player = self.apply_player_key(key)?;
        let ai_move = collaborator.reply(self);
        let ai = self.apply_ai_move(ai_move);
        let pig = self.pig_step();
        self.status = self.check_termination();
        Ok(Turn {
            key,
            player,
            ai_move,
            ai,
            pig,
            player_after: self.player,
            ai_after: self.ai,
            pig_after: self.pig,
            actions_used: self.actions_used,
            status: self.status,
        })
    }

    /// Ends a running trial on a wall-clock timeout.
    pub fn time_out(&mut self) -> bool {
        if self.status == TrialStatus::Running {
            self.status = TrialStatus::TimedOut;
            true
        } else {
            false
        }
    }

    /// Whether the player left through the rightmost exit.
    pub fn exited_rightmost(&self) -> bool {
        self.status == TrialStatus::Exited && Some(self.player.cell) == self.layout.rightmost_exit()
    }

    pub fn score(&self) -> Result<i32, GameError> {
        super::trial_score(self.status, self.actions_used, self.rules.scoring)
    }
}
