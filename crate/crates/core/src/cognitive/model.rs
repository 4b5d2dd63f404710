//! The player model: a fixed production set cycling over the buffers until a
//! key is emitted, once per game action.

use std::collections::BTreeMap;
use std::ops::AddAssign;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::buffers::{BlockVerdict, ExitDecision, Goal, ModelBuffers, Perception};
use super::memory::{retrieve_chunk, DeclarativeMemory, KIND_SLOT, POSSIBLE_MOVES, ROTATION_STEP};
use super::params::ModelParams;
use super::procedural::{ProceduralMemory, Production, ProductionId, RewardEvent};
use super::strategies::{
    check_blocked, exit_step, exit_strategy_check, greedy_step, navigation_proposals, rotation_strategy,
};
use super::ModelError;
use crate::game::{ArrowKey, BoardLayout, GameState, TrialStatus, ATTENTION_CHECK_TRIAL};

/// Upper bound on production firings per action; the production graph is
/// acyclic so real cycles finish in at most five.
const MAX_FIRINGS_PER_ACTION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    AttendBoard,
    ContinueExit,
    ProceedToCatch,
    CheckAgainPursue,
    CheckAgainWatch,
    DecideExit,
    HeadToExit,
    BlockedByPig,
    BlockedByAi,
    BlockedByWall,
    NotBlocked,
    RotateWaitForAi,
    RotationNotRecalled,
    NavClosestToPig,
    NavFewestRotations,
    NavGreedyFallback,
}

fn decision_is(b: &ModelBuffers, d: ExitDecision) -> bool {
    b.goal == Goal::CheckExit && !b.imaginal.exit_committed && b.imaginal.exit_decision == Some(d)
}

fn retrieved_kind(b: &ModelBuffers, kind: &str) -> bool {
    b.retrieved().is_some_and(|c| c.slot(KIND_SLOT) == Some(kind))
}

type ProductionSpec = (&'static str, fn(&ModelBuffers) -> bool, Action);

const PRODUCTIONS: &[ProductionSpec] = &[
    ("attend-board", |b| b.goal == Goal::FindPig, Action::AttendBoard),
    ("continue-exit", |b| b.goal == Goal::CheckExit && b.imaginal.exit_committed, Action::ContinueExit),
    ("proceed-to-catch", |b| decision_is(b, ExitDecision::Proceed), Action::ProceedToCatch),
    (
        "check-again-pursue",
        |b| decision_is(b, ExitDecision::CheckAgain) && b.imaginal.pursue_allowed,
        Action::CheckAgainPursue,
    ),
    (
        "check-again-watch",
        |b| decision_is(b, ExitDecision::CheckAgain) && !b.imaginal.pursue_allowed,
        Action::CheckAgainWatch,
    ),
    ("decide-exit", |b| decision_is(b, ExitDecision::Exit), Action::DecideExit),
    ("head-to-exit", |b| b.goal == Goal::Exit, Action::HeadToExit),
    (
        "blocked-by-pig",
        |b| b.goal == Goal::CatchPig && b.imaginal.block == Some(BlockVerdict::BlockedByPig),
        Action::BlockedByPig,
    ),
    (
        "blocked-by-ai",
        |b| b.goal == Goal::CatchPig && matches!(b.imaginal.block, Some(BlockVerdict::BlockedByAi(_))),
        Action::BlockedByAi,
    ),
    (
        "blocked-by-wall",
        |b| b.goal == Goal::CatchPig && matches!(b.imaginal.block, Some(BlockVerdict::BlockedByWall(_))),
        Action::BlockedByWall,
    ),
    (
        "not-blocked",
        |b| b.goal == Goal::CatchPig && b.imaginal.block == Some(BlockVerdict::NotBlocked),
        Action::NotBlocked,
    ),
    ("rotate-wait-for-ai", |b| b.goal == Goal::Rotate && retrieved_kind(b, ROTATION_STEP), Action::RotateWaitForAi),
    ("rotation-not-recalled", |b| b.goal == Goal::Rotate && b.retrieval_failed(), Action::RotationNotRecalled),
    ("nav-closest-to-pig", |b| b.goal == Goal::Navigate && retrieved_kind(b, POSSIBLE_MOVES), Action::NavClosestToPig),
    (
        "nav-fewest-rotations",
        |b| b.goal == Goal::Navigate && retrieved_kind(b, POSSIBLE_MOVES),
        Action::NavFewestRotations,
    ),
    ("nav-greedy-fallback", |b| b.goal == Goal::Navigate && b.retrieval_failed(), Action::NavGreedyFallback),
];

/// Behaviour counters, summed across trials and sessions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ModelStats {
    pub actions: u64,
    /// Cycles that reached the rotate-and-wait goal.
    pub rotation_opportunities: u64,
    pub rotations_fired: u64,
    pub exits_decided: u64,
    pub nav_closest: u64,
    pub nav_fewest: u64,
    pub nav_greedy: u64,
}

impl ModelStats {
    /// Share of rotate-and-wait opportunities where the rotation was recalled.
    pub fn rotation_rate(&self) -> f64 {
        if self.rotation_opportunities == 0 {
            0.0
        } else {
            self.rotations_fired as f64 / self.rotation_opportunities as f64
        }
    }
}

impl AddAssign for ModelStats {
    fn add_assign(&mut self, o: Self) {
        self.actions += o.actions;
        self.rotation_opportunities += o.rotation_opportunities;
        self.rotations_fired += o.rotations_fired;
        self.exits_decided += o.exits_decided;
        self.nav_closest += o.nav_closest;
        self.nav_fewest += o.nav_fewest;
        self.nav_greedy += o.nav_greedy;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalTrace {
    pub request: String,
    pub chunk: Option<String>,
}

/// One decision cycle, for the JSONL trace log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub trial: u32,
    pub action: u32,
    pub goals: Vec<Goal>,
    pub fired: Vec<&'static str>,
    pub retrievals: Vec<RetrievalTrace>,
    pub key: ArrowKey,
    pub utilities: BTreeMap<&'static str, f64>,
}

pub struct ModelAgent {
    params: ModelParams,
    layout: Arc<BoardLayout>,
    procedural: ProceduralMemory,
    actions: Vec<Action>,
    declarative: DeclarativeMemory,
    buffers: ModelBuffers,
    rng: ChaCha8Rng,
    trial_index: u32,
    /// Productions fired this trial with the action number they led to.
    trial_window: Vec<(ProductionId, u32)>,
    /// Productions fired during the current, not yet applied, action.
    pending: Vec<ProductionId>,
    stats: ModelStats,
    trace: Option<Vec<TraceEntry>>,
}

impl ModelAgent {
    pub fn new(params: ModelParams, layout: Arc<BoardLayout>, seed: u64) -> Result<Self, ModelError> {
        params.validate()?;
        let mut procedural = ProceduralMemory::default();
        let mut actions = Vec::with_capacity(PRODUCTIONS.len());
        for (name, test, action) in PRODUCTIONS {
            procedural.add(Production::new(name, *test, params.initial_utility))?;
            actions.push(*action);
        }
        let declarative = DeclarativeMemory::for_layout(&layout, params.moves_bla, params.rotation_bla)?;
        Ok(Self {
            params,
            layout,
            procedural,
            actions,
            declarative,
            buffers: ModelBuffers::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            trial_index: 0,
            trial_window: vec![],
            pending: vec![],
            stats: ModelStats::default(),
            trace: None,
        })
    }

    /// Records a [`TraceEntry`] per decision cycle from now on.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(vec![]);
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn stats(&self) -> ModelStats {
        self.stats
    }

    pub fn procedural(&self) -> &ProceduralMemory {
        &self.procedural
    }

    pub fn procedural_mut(&mut self) -> &mut ProceduralMemory {
        &mut self.procedural
    }

    pub fn buffers(&self) -> &ModelBuffers {
        &self.buffers
    }

    pub fn utility(&self, name: &str) -> Option<f64> {
        self.procedural.id(name).map(|id| self.procedural.get(id).utility)
    }

    pub fn take_trace(&mut self) -> Vec<TraceEntry> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn begin_trial(&mut self, trial_index: u32) {
        self.trial_index = trial_index;
        self.buffers.reset_for_trial();
        self.trial_window.clear();
        self.pending.clear();
    }

    fn request_moves(&mut self, trace: &mut Vec<RetrievalTrace>) {
        let cell = self.buffers.visual.as_ref().expect("perceived").player.cell;
        let (row, col) = (cell.row.to_string(), cell.col.to_string());
        let pattern = [(KIND_SLOT, POSSIBLE_MOVES), ("row", row.as_str()), ("col", col.as_str())];
        let result = retrieve_chunk(
            &self.declarative,
            &pattern,
            self.params.retrieval_threshold,
            self.params.retrieval_noise_s,
            &mut self.rng,
        )
        .cloned();
        trace.push(RetrievalTrace {
            request: format!("{POSSIBLE_MOVES} {row},{col}"),
            chunk: result.as_ref().ok().map(|c| c.name.clone()),
        });
        self.buffers.retrieval = Some(result);
    }

    fn enter_rotate(&mut self, trace: &mut Vec<RetrievalTrace>) -> Result<(), ModelError> {
        self.buffers.goal = Goal::Rotate;
        self.stats.rotation_opportunities += 1;
        rotation_strategy(&mut self.buffers, &self.declarative, &self.params, &mut self.rng)?;
        trace.push(RetrievalTrace {
            request: ROTATION_STEP.to_string(),
            chunk: self.buffers.retrieved().map(|c| c.name.clone()),
        });
        Ok(())
    }

    fn enter_catch(&mut self) -> Result<(), ModelError> {
        self.buffers.goal = Goal::CatchPig;
        self.buffers.imaginal.block = Some(check_blocked(&self.buffers, &mut self.rng)?);
        Ok(())
    }

    fn fire(&mut self, action: Action, trace: &mut Vec<RetrievalTrace>) -> Result<Option<ArrowKey>, ModelError> {
        let view = || self.buffers.visual.as_ref().expect("perceived");
        let key = match action {
            Action::AttendBoard => unreachable!("handled by choose_key"),
            Action::ContinueExit | Action::DecideExit => {
                if action == Action::DecideExit {
                    self.stats.exits_decided += 1;
                }
                self.buffers.imaginal.exit_committed = true;
                self.buffers.goal = Goal::Exit;
                None
            }
            Action::HeadToExit => Some(exit_step(view(), &self.layout, self.trial_index == ATTENTION_CHECK_TRIAL)),
            Action::ProceedToCatch | Action::CheckAgainPursue => {
                self.enter_catch()?;
                None
            }
            Action::CheckAgainWatch => Some(view().player.facing.anticlockwise().key()),
            Action::BlockedByPig => {
                self.enter_rotate(trace)?;
                None
            }
            Action::BlockedByAi | Action::BlockedByWall => {
                let alternate = match self.buffers.imaginal.block {
                    Some(BlockVerdict::BlockedByAi(alt) | BlockVerdict::BlockedByWall(alt)) => alt,
                    _ => None,
                };
                Some(alternate.unwrap_or(view().player.facing.anticlockwise()).key())
            }
            Action::NotBlocked => {
                if view().player_adjacent_to_pig() {
                    self.enter_rotate(trace)?;
                } else {
                    self.buffers.goal = Goal::Navigate;
                    self.request_moves(trace);
                }
                None
            }
            Action::RotateWaitForAi => {
                self.stats.rotations_fired += 1;
                let chunk = self.buffers.retrieved().expect("matched on retrieval");
                let to: crate::game::Orientation = chunk
                    .slot("to")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| ModelError::MalformedChunk(chunk.name.clone()))?;
                Some(to.key())
            }
            Action::RotationNotRecalled => {
                self.buffers.goal = Goal::Navigate;
                self.request_moves(trace);
                None
            }
            Action::NavClosestToPig | Action::NavFewestRotations => {
                let chunk = self.buffers.retrieved().expect("matched on retrieval");
                let proposals = navigation_proposals(view(), &self.layout, chunk);
                if action == Action::NavClosestToPig {
                    self.stats.nav_closest += 1;
                    Some(proposals.closest_to_pig)
                } else {
                    self.stats.nav_fewest += 1;
                    Some(proposals.fewest_rotations)
                }
            }
            Action::NavGreedyFallback => {
                self.stats.nav_greedy += 1;
                Some(greedy_step(view()))
            }
        };
        Ok(key)
    }

    /// Runs decision cycles against the current board until a key is chosen.
    pub fn choose_key(&mut self, state: &GameState) -> Result<ArrowKey, ModelError> {
        self.pending.clear();
        let all: Vec<ProductionId> = self.procedural.iter().map(|(id, _)| id).collect();
        let mut goals = vec![];
        let mut retrievals = vec![];
        self.buffers.goal = Goal::FindPig;
        self.buffers.retrieval = None;
        self.buffers.imaginal.block = None;

        let mut key = None;
        for _ in 0..MAX_FIRINGS_PER_ACTION {
            goals.push(self.buffers.goal);
            let matching = self.procedural.matching(&all, &self.buffers);
            let id = self.procedural.select(&matching, self.params.utility_noise_s, &mut self.rng)?;
            self.pending.push(id);
            let action = self.actions[id.0];
            if action == Action::AttendBoard {
                self.attend(state)?;
                continue;
            }
            key = self.fire(action, &mut retrievals)?;
            if key.is_some() {
                break;
            }
        }
        let key = key.ok_or(ModelError::NoKeyChosen)?;

        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEntry {
                trial: self.trial_index,
                action: state.actions_used() + 1,
                goals,
                fired: self.pending.iter().map(|id| self.procedural.get(*id).name).collect(),
                retrievals,
                key,
                utilities: self.procedural.iter().map(|(_, p)| (p.name, p.utility)).collect(),
            });
        }
        Ok(key)
    }

    fn attend(&mut self, state: &GameState) -> Result<(), ModelError> {
        let view = Perception::of(state);
        self.buffers.imaginal.pursue_allowed = view.actions_remaining > self.params.pursue_min_remaining;
        self.buffers.visual = Some(view);
        let imaginal = &self.buffers.imaginal;
        if !imaginal.exit_committed && !imaginal.pursuit_committed {
            let had_baseline = imaginal.previous_distance.is_some();
            let decision = exit_strategy_check(&mut self.buffers, &self.params)?;
            if decision == ExitDecision::Proceed && had_baseline && self.params.commit_on_progress {
                self.buffers.imaginal.pursuit_committed = true;
            }
        }
        self.buffers.goal = Goal::CheckExit;
        Ok(())
    }

    /// Charges the action cost to this cycle's productions and stamps them
    /// with the action number for the end-of-trial reward.
    pub fn action_completed(&mut self, actions_used: u32) -> Result<(), ModelError> {
        self.stats.actions += 1;
        let fired: Vec<(ProductionId, u32)> = self.pending.drain(..).map(|id| (id, 0)).collect();
        self.trial_window.extend(fired.iter().map(|(id, _)| (*id, actions_used)));
        let event = RewardEvent { base_reward: -self.params.action_cost, fired_since_last: fired };
        self.procedural.propagate_reward(&event, &self.params)
    }

    /// Delivers the outcome reward to every production fired this trial.
    pub fn end_trial(&mut self, outcome: TrialStatus, actions_used: u32) -> Result<(), ModelError> {
        let base_reward = match outcome {
            TrialStatus::Caught => self.params.reward_catch,
            TrialStatus::Exited => self.params.reward_exit,
            _ => 0.0,
        };
        let event = RewardEvent {
            base_reward,
            fired_since_last: self
                .trial_window
                .drain(..)
                .map(|(id, stamp)| (id, actions_used.saturating_sub(stamp)))
                .collect(),
        };
        self.procedural.propagate_reward(&event, &self.params)
    }
}
