//! Declarative memory: named chunks with slot values and a base-level
//! activation, retrieved by slot pattern against a threshold.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use super::{logistic_noise, ModelError};
use crate::game::{BoardLayout, Orientation, TileKind};

pub const KIND_SLOT: &str = "kind";
pub const POSSIBLE_MOVES: &str = "possible-moves";
pub const ROTATION_STEP: &str = "rotation-step";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chunk {
    pub name: String,
    pub slots: BTreeMap<String, String>,
    pub base_level_activation: f64,
}

impl Chunk {
    pub fn new<'a>(name: impl Into<String>, slots: impl IntoIterator<Item = (&'a str, String)>, bla: f64) -> Self {
        Self {
            name: name.into(),
            slots: slots.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            base_level_activation: bla,
        }
    }

    pub fn slot(&self, name: &str) -> Option<&str> {
        self.slots.get(name).map(String::as_str)
    }

    pub fn matches(&self, pattern: &[(&str, &str)]) -> bool {
        pattern.iter().all(|(k, v)| self.slot(k) == Some(*v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RetrievalFailure;

#[derive(Debug, Clone, Default)]
pub struct DeclarativeMemory {
    chunks: Vec<Chunk>,
}

impl DeclarativeMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, chunk: Chunk) -> Result<(), ModelError> {
        if !chunk.base_level_activation.is_finite() {
            return Err(ModelError::NonFinite("base-level activation"));
        }
        if self.chunks.iter().any(|c| c.name == chunk.name) {
            return Err(ModelError::DuplicateChunk(chunk.name));
        }
        self.chunks.push(chunk);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Chunk> {
        self.chunks.iter().find(|c| c.name == name)
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Chunk> {
        self.chunks.iter()
    }

    /// Static knowledge of the board: for each walkable tile, the directions
    /// leading to a passable tile. One rotation-step chunk per facing
    /// encodes the anticlockwise successor.
    pub fn for_layout(layout: &BoardLayout, moves_bla: f64, rotation_bla: f64) -> Result<Self, ModelError> {
        let mut memory = Self::new();
        let grid = layout.grid();
        for cell in layout.playable_cells() {
            let moves: Vec<String> = grid
                .neighbors(cell)
                .filter(|(_, c)| grid.get(*c) == Some(TileKind::Passable))
                .map(|(d, _)| d.to_string())
                .collect();
            memory.add(Chunk::new(
                format!("moves-{}-{}", cell.row, cell.col),
                [
                    (KIND_SLOT, POSSIBLE_MOVES.to_string()),
                    ("row", cell.row.to_string()),
                    ("col", cell.col.to_string()),
                    ("moves", moves.join(" ")),
                ],
                moves_bla,
            ))?;
        }
        for facing in Orientation::ALL {
            memory.add(Chunk::new(
                format!("rotate-from-{facing}"),
                [
                    (KIND_SLOT, ROTATION_STEP.to_string()),
                    ("from", facing.to_string()),
                    ("to", facing.anticlockwise().to_string()),
                ],
                rotation_bla,
            ))?;
        }
        Ok(memory)
    }
}

/// Returns the most active chunk matching `pattern` if its activation, with
/// optional logistic noise of scale `noise_s`, reaches `threshold`.
///
/// Noise is drawn once per matching chunk, in memory order. Exact activation
/// ties go to the lexicographically smaller name.
pub fn retrieve_chunk<'m, R: Rng + ?Sized>(
    memory: &'m DeclarativeMemory,
    pattern: &[(&str, &str)],
    threshold: f64,
    noise_s: f64,
    rng: &mut R,
) -> Result<&'m Chunk, RetrievalFailure> {
    let mut best: Option<(&Chunk, f64)> = None;
    for chunk in memory.iter().filter(|c| c.matches(pattern)) {
        let activation = chunk.base_level_activation + logistic_noise(noise_s, rng);
        let better = match best {
            None => true,
            Some((b, a)) => activation > a || (activation == a && chunk.name < b.name),
        };
        if better {
            best = Some((chunk, activation));
        }
    }
    match best {
        Some((chunk, activation)) if activation >= threshold => Ok(chunk),
        _ => Err(RetrievalFailure),
    }
}
