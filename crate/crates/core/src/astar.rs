//! A* pursuit for the AI collaborator.
//!
//! The planner runs on a plain [`TileGrid`] with a Manhattan heuristic. Nodes
//! with equal `f` are expanded first-in first-out and neighbours are pushed in
//! N, E, S, W order, so the returned path is fully determined by the inputs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::game::{AgentMove, Cell, Collaborator, GameState, TileGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchNode {
    pub cell: Cell,
    pub g: usize,
    pub h: usize,
    pub parent: Option<Cell>,
}

impl SearchNode {
    pub fn f(&self) -> usize {
        self.g + self.h
    }
}

fn heuristic(cell: Cell, goals: &HashSet<Cell>) -> usize {
    goals.iter().map(|g| cell.manhattan(*g)).min().unwrap_or(0)
}

/// Shortest 4-adjacent path from `start` to the nearest reachable goal.
///
/// The returned cells exclude `start`, so `Some(vec![])` means `start` is
/// already a goal. `None` means no goal is reachable.
pub fn a_star(grid: &TileGrid, start: Cell, goals: &[Cell], occupied: &[Cell]) -> Option<Vec<Cell>> {
    let goals: HashSet<Cell> = goals.iter().copied().collect();
    if goals.is_empty() {
        return None;
    }
    let blocked: HashSet<Cell> = occupied.iter().copied().filter(|c| *c != start).collect();
    let open_cell = |c: Cell| grid.is_walkable(c) && !blocked.contains(&c);

    let mut nodes: HashMap<Cell, SearchNode> = HashMap::new();
    let mut closed: HashSet<Cell> = HashSet::new();
    let mut frontier = BinaryHeap::new();
    let mut pushed = 0u64;

    let root = SearchNode { cell: start, g: 0, h: heuristic(start, &goals), parent: None };
    frontier.push(Reverse((root.f(), pushed, start)));
    nodes.insert(start, root);

    while let Some(Reverse((_, _, cell))) = frontier.pop() {
        if !closed.insert(cell) {
            continue;
        }
        if goals.contains(&cell) {
            return Some(reconstruct(&nodes, cell));
        }
        let g = nodes[&cell].g + 1;
        for (_, next) in grid.neighbors(cell) {
            if closed.contains(&next) || !open_cell(next) {
                continue;
            }
            if nodes.get(&next).is_some_and(|n| n.g <= g) {
                continue;
            }
            let node = SearchNode { cell: next, g, h: heuristic(next, &goals), parent: Some(cell) };
            pushed += 1;
            frontier.push(Reverse((node.f(), pushed, next)));
            nodes.insert(next, node);
        }
    }
    None
}

fn reconstruct(nodes: &HashMap<Cell, SearchNode>, goal: Cell) -> Vec<Cell> {
    let mut path = vec![];
    let mut cur = goal;
    while let Some(parent) = nodes[&cur].parent {
        path.push(cur);
        cur = parent;
    }
    path.reverse();
    path
}

/// How the collaborator turns a planned step into a sub-move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseModel {
    /// Same rule as the player: face the step direction first, then advance.
    #[default]
    RotateThenAdvance,
    /// Turn and advance in one sub-move.
    DirectStep,
}

/// The collaborator shown to participants. It replans from scratch every
/// turn and keeps no memory between calls.
#[derive(Debug, Clone, Copy, Default)]
pub struct AStarAgent {
    pub pose_model: PoseModel,
}

impl AStarAgent {
    pub fn new(pose_model: PoseModel) -> Self {
        Self { pose_model }
    }

    pub fn ai_reply(&self, state: &GameState) -> AgentMove {
        let ai = state.ai();
        let pig = state.pig();
        if ai.cell.manhattan(pig) == 1 {
            return AgentMove::Hold;
        }
        let goals: Vec<Cell> = state.free_passable_neighbors(pig).into_iter().map(|(_, c)| c).collect();
        let occupied = [state.player().cell, pig];
        let Some(step) = a_star(state.layout().grid(), ai.cell, &goals, &occupied).and_then(|p| p.first().copied())
        else {
            return AgentMove::Hold;
        };
        let dir = ai.cell.direction_to(step).expect("path steps are adjacent");
        match self.pose_model {
            PoseModel::DirectStep => AgentMove::Step(dir),
            PoseModel::RotateThenAdvance if dir == ai.facing => AgentMove::Advance,
            PoseModel::RotateThenAdvance => AgentMove::Rotate(dir),
        }
    }
}

impl Collaborator for AStarAgent {
    fn reply(&self, state: &GameState) -> AgentMove {
        self.ai_reply(state)
    }
}
