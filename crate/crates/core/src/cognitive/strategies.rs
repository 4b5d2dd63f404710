//! The decision strategies the productions call into: leave-or-stay, blocked
//! classification, rotate-and-wait, and pig-directed navigation.

use rand::Rng;

use super::buffers::{BlockVerdict, ExitDecision, ModelBuffers, Perception, Surround};
use super::memory::{retrieve_chunk, Chunk, DeclarativeMemory, KIND_SLOT, ROTATION_STEP};
use super::params::ModelParams;
use super::ModelError;
use crate::astar::a_star;
use crate::game::{ArrowKey, BoardLayout, Cell, Orientation};

/// Compares the AI-pig Manhattan distance with the previous check.
///
/// A shrinking distance, or an AI already next to the pig, means proceed and
/// resets the patience counter. Otherwise the model checks again until
/// `exit_patience` consecutive checks have failed to improve, then exits. The
/// first call of a trial only records the baseline.
pub fn exit_strategy_check(buffers: &mut ModelBuffers, params: &ModelParams) -> Result<ExitDecision, ModelError> {
    let distance = buffers.visual.as_ref().ok_or(ModelError::EmptyVisual)?.ai_pig_distance();
    let imaginal = &mut buffers.imaginal;
    let decision = match imaginal.previous_distance {
        None => ExitDecision::Proceed,
        Some(previous) if distance < previous || distance <= 1 => {
            imaginal.non_improving_checks = 0;
            ExitDecision::Proceed
        }
        Some(_) => {
            imaginal.non_improving_checks += 1;
            if imaginal.non_improving_checks >= params.exit_patience {
                ExitDecision::Exit
            } else {
                ExitDecision::CheckAgain
            }
        }
    };
    imaginal.previous_distance = Some(distance);
    imaginal.exit_decision = Some(decision);
    Ok(decision)
}

/// Classifies what is directly ahead of the player. When the AI or a wall is
/// in the way, a different free direction is drawn uniformly at random.
pub fn check_blocked<R: Rng + ?Sized>(buffers: &ModelBuffers, rng: &mut R) -> Result<BlockVerdict, ModelError> {
    let view = buffers.visual.as_ref().ok_or(ModelError::EmptyVisual)?;
    let facing = view.player.facing;
    let alternate = |rng: &mut R| {
        let free: Vec<Orientation> =
            Orientation::ALL.into_iter().filter(|d| *d != facing && view.toward(*d) == Surround::Open).collect();
        (!free.is_empty()).then(|| free[rng.random_range(0..free.len())])
    };
    Ok(match view.toward(facing) {
        Surround::Open | Surround::Exit => BlockVerdict::NotBlocked,
        Surround::Pig => BlockVerdict::BlockedByPig,
        Surround::Ai => BlockVerdict::BlockedByAi(alternate(rng)),
        Surround::Wall => BlockVerdict::BlockedByWall(alternate(rng)),
    })
}

/// Tries to recall the anticlockwise rotation step for the current facing.
/// Fills the retrieval buffer and returns the key to press on success.
pub fn rotation_strategy<R: Rng + ?Sized>(
    buffers: &mut ModelBuffers,
    memory: &DeclarativeMemory,
    params: &ModelParams,
    rng: &mut R,
) -> Result<Option<ArrowKey>, ModelError> {
    let facing = buffers.visual.as_ref().ok_or(ModelError::EmptyVisual)?.player.facing.to_string();
    let pattern = [(KIND_SLOT, ROTATION_STEP), ("from", facing.as_str())];
    let result = retrieve_chunk(memory, &pattern, params.retrieval_threshold, params.retrieval_noise_s, rng).cloned();
    let key = match &result {
        Ok(chunk) => Some(rotation_target(chunk)?.key()),
        Err(_) => None,
    };
    buffers.retrieval = Some(result);
    Ok(key)
}

fn rotation_target(chunk: &Chunk) -> Result<Orientation, ModelError> {
    chunk.slot("to").and_then(|s| s.parse().ok()).ok_or_else(|| ModelError::MalformedChunk(chunk.name.clone()))
}

/// The cell next to the pig the player should occupy: the one farthest from
/// the AI, so the two pieces close in from opposite sides.
pub fn blocking_target(view: &Perception, layout: &BoardLayout) -> Cell {
    let grid = layout.grid();
    grid.neighbors(view.pig)
        .map(|(_, c)| c)
        .filter(|c| grid.is_passable(*c) && *c != view.ai.cell)
        .min_by_key(|c| (std::cmp::Reverse(c.manhattan(view.ai.cell)), c.manhattan(view.player.cell)))
        .unwrap_or(view.pig)
}

/// Keys proposed by the two competing navigation productions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NavigationProposals {
    /// Direction whose neighbouring cell is nearest the target, regardless
    /// of whether a rotation is needed first.
    pub closest_to_pig: ArrowKey,
    /// Direction minimising rotations plus remaining distance.
    pub fewest_rotations: ArrowKey,
}

fn parse_moves(chunk: &Chunk) -> Vec<Orientation> {
    chunk.slot("moves").unwrap_or("").split_whitespace().filter_map(|s| s.parse().ok()).collect()
}

/// Scores candidate moves from the possible-moves chunk of the player's cell.
pub fn navigation_proposals(view: &Perception, layout: &BoardLayout, moves_chunk: &Chunk) -> NavigationProposals {
    let target = blocking_target(view, layout);
    let here = view.player.cell;
    let facing = view.player.facing;
    let grid = layout.grid();

    if here == target {
        // Already in position: face the pig and hold there.
        let key = here.direction_to(view.pig).unwrap_or(facing).key();
        return NavigationProposals { closest_to_pig: key, fewest_rotations: key };
    }

    let options: Vec<(Orientation, usize)> = parse_moves(moves_chunk)
        .into_iter()
        .filter(|d| view.toward(*d) == Surround::Open)
        .filter_map(|d| grid.neighbor(here, d).map(|c| (d, c.manhattan(target))))
        .collect();
    if options.is_empty() {
        let key = facing.anticlockwise().key();
        return NavigationProposals { closest_to_pig: key, fewest_rotations: key };
    }

    let order = |d: Orientation| d as usize;
    let closest = options.iter().min_by_key(|(d, dist)| (*dist, order(*d))).unwrap().0;
    let fewest = options
        .iter()
        .min_by_key(|(d, dist)| (usize::from(*d != facing) + 1 + dist, usize::from(*d != facing), order(*d)))
        .unwrap()
        .0;
    NavigationProposals { closest_to_pig: closest.key(), fewest_rotations: fewest.key() }
}

/// Used when the possible-moves chunk cannot be recalled: any open direction
/// that shortens the Manhattan distance to the pig, preferring the current
/// facing. Rotates in place when nothing helps.
pub fn greedy_step(view: &Perception) -> ArrowKey {
    let here = view.player.cell;
    let dist = here.manhattan(view.pig);
    let improves = |d: Orientation| {
        view.toward(d) == Surround::Open
            && here.step(d, usize::MAX, usize::MAX).is_some_and(|c| c.manhattan(view.pig) < dist)
    };
    if improves(view.player.facing) {
        return view.player.facing.key();
    }
    Orientation::ALL.into_iter().find(|d| improves(*d)).unwrap_or(view.player.facing.anticlockwise()).key()
}

/// Key toward the chosen exit along a shortest free path.
pub fn exit_step(view: &Perception, layout: &BoardLayout, prefer_rightmost: bool) -> ArrowKey {
    let here = view.player.cell;
    let exits = layout.exits();
    let goals: Vec<Cell> = match (prefer_rightmost, layout.rightmost_exit()) {
        (true, Some(right)) => vec![right],
        _ => exits,
    };
    a_star(layout.grid(), here, &goals, &[view.ai.cell, view.pig])
        .and_then(|path| path.first().copied())
        .and_then(|step| here.direction_to(step))
        .unwrap_or(view.player.facing.anticlockwise())
        .key()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::cognitive::buffers::Goal;
    use crate::game::{GameRules, GameState, PigMotion, Pose};

    fn view(player: Pose, ai: Pose, pig: Cell) -> Perception {
        let rules = GameRules { pig_motion: PigMotion::Static, ..GameRules::default() };
        let state = GameState::new(Arc::new(BoardLayout::default_layout()), rules, 4, 0)
            .with_positions(player, ai, pig)
            .unwrap();
        Perception::of(&state)
    }

    fn buffers_with_distance(ai: Cell, pig: Cell, previous: Option<usize>) -> ModelBuffers {
        let mut b = ModelBuffers {
            goal: Goal::CheckExit,
            visual: Some(view(Pose::new(Cell::new(6, 2), Orientation::N), Pose::new(ai, Orientation::S), pig)),
            ..ModelBuffers::default()
        };
        b.imaginal.previous_distance = previous;
        b
    }

    /// Feeds a sequence of AI positions (pig fixed at the centre) through the
    /// exit check, carrying the imaginal buffer between calls.
    fn run_distances(ai_cells: &[Cell], patience: u32) -> Vec<ExitDecision> {
        let params = ModelParams { exit_patience: patience, ..ModelParams::default() };
        let pig = Cell::new(4, 4);
        let mut b = buffers_with_distance(ai_cells[0], pig, None);
        exit_strategy_check(&mut b, &params).unwrap();
        ai_cells[1..]
            .iter()
            .map(|ai| {
                let imaginal = b.imaginal.clone();
                b = buffers_with_distance(*ai, pig, None);
                b.imaginal = imaginal;
                exit_strategy_check(&mut b, &params).unwrap()
            })
            .collect()
    }

    // Cells at a known Manhattan distance from the centre (4,4).
    const D2: Cell = Cell::new(2, 4);
    const D3: Cell = Cell::new(2, 5);
    const D4: Cell = Cell::new(2, 6);
    const D4B: Cell = Cell::new(6, 6);

    #[test]
    fn improving_distance_proceeds() {
        // 4 → 3.
        assert_eq!(run_distances(&[D4, Cell::new(6, 5)], 2), vec![ExitDecision::Proceed]);
    }

    #[test]
    fn two_non_improving_checks_exit() {
        // 3 → 4, then 4 → 4.
        assert_eq!(run_distances(&[D3, D4, D4B], 2), vec![ExitDecision::CheckAgain, ExitDecision::Exit]);
    }

    #[test]
    fn recovery_resets_patience() {
        // 3 → 4, 4 → 2, then 2 → 3: the counter restarted so no exit yet.
        assert_eq!(
            run_distances(&[D3, D4, D2, D3], 2),
            vec![ExitDecision::CheckAgain, ExitDecision::Proceed, ExitDecision::CheckAgain]
        );
    }

    #[test]
    fn first_check_records_baseline() {
        let mut b = buffers_with_distance(D4, Cell::new(4, 4), None);
        assert_eq!(exit_strategy_check(&mut b, &ModelParams::default()).unwrap(), ExitDecision::Proceed);
        assert_eq!(b.imaginal.previous_distance, Some(4));
    }

    #[test]
    fn adjacent_ai_counts_as_progress() {
        let adjacent = Cell::new(3, 4);
        assert_eq!(run_distances(&[adjacent, adjacent, adjacent, adjacent], 2), vec![ExitDecision::Proceed; 3]);
    }

    #[test]
    fn missing_visual_is_an_error() {
        let mut b = ModelBuffers::default();
        assert!(matches!(exit_strategy_check(&mut b, &ModelParams::default()), Err(ModelError::EmptyVisual)));
    }

    fn start_view() -> Perception {
        view(Pose::new(Cell::new(5, 4), Orientation::N), Pose::new(Cell::new(2, 6), Orientation::S), Cell::new(4, 4))
    }

    fn blocked(player: Pose, ai: Pose, pig: Cell, seed: u64) -> BlockVerdict {
        let b = ModelBuffers { visual: Some(view(player, ai, pig)), ..ModelBuffers::default() };
        check_blocked(&b, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn pig_ahead() {
        let v = blocked(
            Pose::new(Cell::new(5, 4), Orientation::N),
            Pose::new(Cell::new(2, 6), Orientation::S),
            Cell::new(4, 4),
            0,
        );
        assert_eq!(v, BlockVerdict::BlockedByPig);
    }

    #[test]
    fn open_ahead() {
        let v = blocked(
            Pose::new(Cell::new(6, 2), Orientation::N),
            Pose::new(Cell::new(2, 6), Orientation::S),
            Cell::new(4, 4),
            0,
        );
        assert_eq!(v, BlockVerdict::NotBlocked);
    }

    #[test]
    fn wall_ahead_picks_a_free_alternative_reproducibly() {
        // Top-left corner facing north: east and south are free.
        let player = Pose::new(Cell::new(2, 2), Orientation::N);
        let ai = Pose::new(Cell::new(6, 6), Orientation::N);
        let mut seen = std::collections::HashSet::new();
        for seed in 0..64 {
            let v = blocked(player, ai, Cell::new(4, 4), seed);
            assert_eq!(v, blocked(player, ai, Cell::new(4, 4), seed));
            match v {
                BlockVerdict::BlockedByWall(Some(d)) => {
                    assert!(matches!(d, Orientation::E | Orientation::S));
                    seen.insert(d);
                }
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn ai_ahead_with_no_free_side_has_no_alternative() {
        // Corner (2,2) facing east into the AI, pig below.
        let v = blocked(
            Pose::new(Cell::new(2, 2), Orientation::E),
            Pose::new(Cell::new(2, 3), Orientation::W),
            Cell::new(3, 2),
            0,
        );
        assert_eq!(v, BlockVerdict::BlockedByAi(None));
    }

    #[test]
    fn rotation_goes_anticlockwise() {
        let layout = BoardLayout::default_layout();
        let memory = DeclarativeMemory::for_layout(&layout, 0.0, -0.15).unwrap();
        let params = ModelParams { retrieval_noise_s: 0.0, ..ModelParams::default() };
        let mut b = ModelBuffers { visual: Some(start_view()), ..ModelBuffers::default() };
        let key = rotation_strategy(&mut b, &memory, &params, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(key, Some(ArrowKey::Left));
        assert_eq!(b.retrieved().unwrap().name, "rotate-from-N");
    }

    #[test]
    fn deeply_suppressed_rotation_never_recalled() {
        let layout = BoardLayout::default_layout();
        let memory = DeclarativeMemory::for_layout(&layout, 0.0, -10.0).unwrap();
        let params = ModelParams { rotation_bla: -10.0, ..ModelParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut b = ModelBuffers { visual: Some(start_view()), ..ModelBuffers::default() };
        for _ in 0..1000 {
            assert_eq!(rotation_strategy(&mut b, &memory, &params, &mut rng).unwrap(), None);
            assert!(b.retrieval_failed());
        }
    }

    #[test]
    fn rotation_gate_is_monotone_for_shared_noise() {
        // Same seed means the same noise draw, so success at a lower
        // activation implies success at any higher one.
        let layout = BoardLayout::default_layout();
        let mut b = ModelBuffers { visual: Some(start_view()), ..ModelBuffers::default() };
        for seed in 0..500 {
            let mut fired = vec![];
            for bla in [-0.6, -0.3, -0.2, -0.15, 0.0, 0.3] {
                let memory = DeclarativeMemory::for_layout(&layout, 0.0, bla).unwrap();
                let params = ModelParams { rotation_bla: bla, retrieval_threshold: 0.0, ..ModelParams::default() };
                let key = rotation_strategy(&mut b, &memory, &params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                fired.push(key.is_some());
            }
            assert!(fired.windows(2).all(|w| w[0] <= w[1]), "seed {seed}: {fired:?}");
        }
    }

    fn moves_chunk(layout: &BoardLayout, cell: Cell) -> Chunk {
        let memory = DeclarativeMemory::for_layout(layout, 0.0, 0.0).unwrap();
        memory.get(&format!("moves-{}-{}", cell.row, cell.col)).unwrap().clone()
    }

    #[test]
    fn pig_straight_ahead_both_agree_on_up() {
        let layout = BoardLayout::default_layout();
        // Pig two rows up; the target cell is directly north of the player.
        let v = view(
            Pose::new(Cell::new(6, 4), Orientation::N),
            Pose::new(Cell::new(2, 6), Orientation::S),
            Cell::new(4, 4),
        );
        let p = navigation_proposals(&v, &layout, &moves_chunk(&layout, Cell::new(6, 4)));
        assert_eq!(p, NavigationProposals { closest_to_pig: ArrowKey::Up, fewest_rotations: ArrowKey::Up });
    }

    #[test]
    fn facing_east_with_target_to_the_north_east_splits_the_productions() {
        let layout = BoardLayout::default_layout();
        // AI in the top-left corner, so the target is the pig's southern
        // neighbour (5,4). North and east both bring the player within one
        // step of it, but only east avoids a rotation.
        let v = view(
            Pose::new(Cell::new(6, 3), Orientation::E),
            Pose::new(Cell::new(2, 2), Orientation::S),
            Cell::new(4, 4),
        );
        assert_eq!(blocking_target(&v, &layout), Cell::new(5, 4));
        let p = navigation_proposals(&v, &layout, &moves_chunk(&layout, Cell::new(6, 3)));
        assert_eq!(p.closest_to_pig, ArrowKey::Up);
        assert_eq!(p.fewest_rotations, ArrowKey::Right);
    }

    #[test]
    fn target_is_opposite_the_ai() {
        let layout = BoardLayout::default_layout();
        let v = view(
            Pose::new(Cell::new(6, 2), Orientation::N),
            Pose::new(Cell::new(2, 3), Orientation::S),
            Cell::new(2, 2),
        );
        assert_eq!(blocking_target(&v, &layout), Cell::new(3, 2));
    }

    #[test]
    fn greedy_prefers_facing() {
        let v = view(
            Pose::new(Cell::new(6, 2), Orientation::E),
            Pose::new(Cell::new(2, 6), Orientation::S),
            Cell::new(4, 4),
        );
        assert_eq!(greedy_step(&v), ArrowKey::Right);
        let v = view(
            Pose::new(Cell::new(6, 2), Orientation::S),
            Pose::new(Cell::new(2, 6), Orientation::S),
            Cell::new(4, 4),
        );
        assert_eq!(greedy_step(&v), ArrowKey::Up);
    }

    #[test]
    fn exit_step_heads_for_the_nearest_or_rightmost_exit() {
        let layout = BoardLayout::default_layout();
        let v = view(
            Pose::new(Cell::new(6, 2), Orientation::N),
            Pose::new(Cell::new(2, 6), Orientation::S),
            Cell::new(4, 4),
        );
        assert_eq!(exit_step(&v, &layout, false), ArrowKey::Up);
        assert_eq!(exit_step(&v, &layout, true), ArrowKey::Up);
        let v = view(
            Pose::new(Cell::new(4, 3), Orientation::N),
            Pose::new(Cell::new(2, 6), Orientation::S),
            Cell::new(2, 4),
        );
        assert_eq!(exit_step(&v, &layout, false), ArrowKey::Left);
        assert_eq!(exit_step(&v, &layout, true), ArrowKey::Right);
    }
}
