//! Synthetic cohorts: the production-system model sits in the player's seat
//! and plays through the live store, so the exported data has exactly the
//! shape a real deployment produces.

use std::collections::BTreeMap;
use std::sync::Arc;

use pigchase_core::cognitive::{ModelAgent, ModelError, ModelParams};
use pigchase_core::game::{GameError, GameState, TRIALS_PER_SESSION};
use pigchase_core::record::{Demographic, SurveyResponse, SURVEY_QUESTIONS};
use pigchase_core::stats::{CodedLabel, ParticipantRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clock::ManualClock;
use crate::store::{SessionStore, StoreError, VisibleState};

#[derive(Debug, Error)]
pub enum CohortError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone)]
pub struct CohortConfig {
    /// Participants per demographic.
    pub per_demographic: usize,
    pub seed: u64,
    pub params: ModelParams,
    /// Replaces `params` for the listed demographics.
    pub demographic_params: BTreeMap<Demographic, ModelParams>,
    pub latency_ms: u64,
    /// Probability that the second coder copies the first coder's label.
    pub coder_agreement: f64,
    /// When the store runs on this clock, it is advanced by `latency_ms` per
    /// keypress and by a minute between participants, giving reproducible
    /// timestamps.
    pub clock: Option<ManualClock>,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            per_demographic: 20,
            seed: 0,
            params: ModelParams::default(),
            demographic_params: BTreeMap::new(),
            latency_ms: 250,
            coder_agreement: 0.85,
            clock: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CohortOutput {
    pub session_ids: Vec<String>,
    pub coder1: BTreeMap<String, Vec<CodedLabel>>,
    pub coder2: BTreeMap<String, Vec<CodedLabel>>,
}

impl CohortOutput {
    /// Copies the synthetic coder labels onto exported rows by participant id.
    pub fn attach_labels(&self, rows: &mut [ParticipantRow]) {
        for row in rows {
            if let Some(l) = self.coder1.get(&row.id) {
                row.coder1_labels = l.clone();
            }
            if let Some(l) = self.coder2.get(&row.id) {
                row.coder2_labels = l.clone();
            }
        }
    }
}

fn game_view(store: &SessionStore, v: &VisibleState) -> Result<GameState, GameError> {
    let c = store.config();
    Ok(GameState::new(c.layout.clone(), c.rules, v.trial, 0)
        .with_positions(v.player, v.ai, v.pig)?
        .with_actions_used(v.actions_used))
}

fn first_label(caught: u32, exited: u32, rng: &mut ChaCha8Rng) -> CodedLabel {
    const OTHERS: [CodedLabel; 4] =
        [CodedLabel::AiNoPattern, CodedLabel::Vague, CodedLabel::AiNotIntelligent, CodedLabel::AiWorkedAgainst];
    if caught >= 8 {
        CodedLabel::AiCooperated
    } else if caught >= 5 {
        CodedLabel::AiUserDependent
    } else if exited >= 6 {
        CodedLabel::UserFocusedOnOwnMovement
    } else {
        OTHERS[rng.random_range(0..OTHERS.len())]
    }
}

/// Second coder: usually agrees, otherwise picks a neighbouring category.
fn second_label(first: CodedLabel, agreement: f64, rng: &mut ChaCha8Rng) -> CodedLabel {
    if rng.random_bool(agreement) {
        return first;
    }
    let i = CodedLabel::ALL.iter().position(|l| *l == first).unwrap_or(0);
    let j = if i == 0 || (i + 1 < CodedLabel::ALL.len() && rng.random_bool(0.5)) { i + 1 } else { i - 1 };
    CodedLabel::ALL[j]
}

/// Plays one complete session and submits the survey.
fn play_participant(
    store: &SessionStore,
    session_id: &str,
    agent: &mut ModelAgent,
    config: &CohortConfig,
    seq: &mut u64,
) -> Result<(), CohortError> {
    for _ in 0..TRIALS_PER_SESSION {
        let mut view = store.state(session_id)?;
        agent.begin_trial(view.trial);
        loop {
            let key = agent.choose_key(&game_view(store, &view)?)?;
            if let Some(c) = &config.clock {
                c.advance(config.latency_ms);
            }
            *seq += 1;
            let r = store.play_turn(session_id, view.trial, *seq, key, config.latency_ms)?;
            agent.action_completed(r.state.actions_used)?;
            if let Some(end) = r.trial_end {
                agent.end_trial(end.outcome, end.actions_used)?;
                break;
            }
            view = r.state;
        }
    }
    Ok(())
}

/// Creates, plays and completes `per_demographic` sessions for every
/// demographic, interleaving demographics so balanced assignment stays even.
pub fn run_cohort(store: &SessionStore, config: &CohortConfig) -> Result<CohortOutput, CohortError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layout = Arc::clone(&store.config().layout);
    let mut out = CohortOutput::default();
    for i in 0..config.per_demographic {
        for d in Demographic::ALL {
            if let Some(c) = &config.clock {
                c.advance(60_000);
            }
            let pid = format!("syn-{}-{:04}", d.as_str().to_lowercase(), i + 1);
            let session_id = store.create_session(&pid, d)?.session_id;
            let params = config.demographic_params.get(&d).unwrap_or(&config.params);
            let mut agent = ModelAgent::new(params.clone(), layout.clone(), rng.random())?;
            let mut seq = 0;
            play_participant(store, &session_id, &mut agent, config, &mut seq)?;

            let counts = store.record(&session_id)?.outcome_counts();
            let noise = rng.random_range(-15..=15);
            let estimate = (35 + 3 * i64::from(counts.caught) + noise).clamp(0, 100);
            let answers = (1..=SURVEY_QUESTIONS).map(|q| format!("synthetic answer {q}")).collect();
            store.submit_survey(&session_id, SurveyResponse { answers, intelligence_estimate: estimate })?;

            let l1 = first_label(counts.caught, counts.exited, &mut rng);
            let l2 = second_label(l1, config.coder_agreement, &mut rng);
            out.coder1.insert(pid.clone(), vec![l1]);
            out.coder2.insert(pid, vec![l2]);
            out.session_ids.push(session_id);
        }
    }
    Ok(out)
}
