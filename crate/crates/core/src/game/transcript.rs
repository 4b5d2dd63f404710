//! JSONL transcript events, one per piece per turn.

use serde::{Deserialize, Serialize};

use super::layout::{Cell, Orientation, Pose};
use super::state::{AgentMove, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Player,
    Ai,
    Pig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoseAfter {
    pub row: usize,
    pub col: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub facing: Option<Orientation>,
}

impl From<Pose> for PoseAfter {
    fn from(p: Pose) -> Self {
        Self { row: p.cell.row, col: p.cell.col, facing: Some(p.facing) }
    }
}

impl From<Cell> for PoseAfter {
    fn from(c: Cell) -> Self {
        Self { row: c.row, col: c.col, facing: None }
    }
}

/// Field order is the export order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub session: String,
    pub trial: u32,
    pub seq: u64,
    pub actor: Actor,
    pub input: String,
    pub effect: String,
    pub pose_after: PoseAfter,
    pub actions_used: u32,
    pub ts: u64,
}

fn agent_move_label(mv: AgentMove) -> String {
    match mv {
        AgentMove::Hold => "hold".into(),
        AgentMove::Advance => "advance".into(),
        AgentMove::Rotate(d) => format!("rotate_{d}"),
        AgentMove::Step(d) => format!("step_{d}"),
    }
}

fn effect_label<T: Serialize>(effect: T) -> String {
    serde_json::to_value(effect).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

impl Turn {
    /// Expands a turn into its three transcript events. `first_seq` is the
    /// sequence number of the player event.
    pub fn events(&self, session: &str, trial: u32, first_seq: u64, ts: u64) -> [TranscriptEvent; 3] {
        let ev = |offset: u64, actor, input: String, effect: String, pose_after: PoseAfter| TranscriptEvent {
            session: session.to_owned(),
            trial,
            seq: first_seq + offset,
            actor,
            input,
            effect,
            pose_after,
            actions_used: self.actions_used,
            ts,
        };
        [
            ev(0, Actor::Player, self.key.to_string(), effect_label(self.player), self.player_after.into()),
            ev(1, Actor::Ai, agent_move_label(self.ai_move), effect_label(self.ai), self.ai_after.into()),
            ev(2, Actor::Pig, "step".into(), effect_label(self.pig), self.pig_after.into()),
        ]
    }
}
