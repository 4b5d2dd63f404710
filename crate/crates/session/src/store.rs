//! Authoritative session state. Every session sits behind its own mutex, so
//! turns for one participant are strictly serialized while different
//! sessions proceed independently.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use pigchase_core::astar::{AStarAgent, PoseModel};
use pigchase_core::game::{
    ArrowKey, BoardLayout, Cell, GameError, GameRules, GameState, MoveEffect, Pose, TileKind, TranscriptEvent,
    TrialStatus, ATTENTION_CHECK_TRIAL, MAX_ACTIONS, TRIALS_PER_SESSION,
};
use pigchase_core::record::{
    Demographic, KeyLogEntry, SessionRecord, SessionStatus, SurveyError, SurveyResponse, Treatment, TreatmentCondition,
    TrialRecord,
};
use pigchase_core::sim::trial_seed;
use pigchase_core::stats::ParticipantRow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("participant id must not be empty")]
    EmptyParticipant,
    #[error("participant already has an active session {0}")]
    DuplicateActive(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session is {0:?}")]
    NotInProgress(SessionStatus),
    #[error("expected trial {expected}, got {got}")]
    OutOfOrder { expected: u32, got: u32 },
    #[error("trial {0} has already ended")]
    TrialTerminated(u32),
    #[error("stale message sequence {got}; last accepted was {last}")]
    StaleSeq { last: u64, got: u64 },
    #[error("survey submitted after {0} of {TRIALS_PER_SESSION} trials")]
    Premature(usize),
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("storage: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    #[default]
    Random,
    /// Round-robin over the seven conditions, separately per demographic.
    Balanced,
}

impl FromStr for AssignmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "balanced" => Ok(Self::Balanced),
            _ => Err(format!("unknown assignment mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub layout: Arc<BoardLayout>,
    pub rules: GameRules,
    pub pose_model: PoseModel,
    pub timeout_ms: u64,
    pub assignment: AssignmentMode,
    pub seed: u64,
    pub data_dir: Option<PathBuf>,
    pub conditions: BTreeMap<Treatment, TreatmentCondition>,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            layout: Arc::new(BoardLayout::default_layout()),
            rules: GameRules::default(),
            pose_model: PoseModel::default(),
            timeout_ms: 120_000,
            assignment: AssignmentMode::Random,
            seed: 0,
            data_dir: None,
            conditions: Treatment::ALL.iter().map(|t| (*t, TreatmentCondition::standard(*t))).collect(),
        }
    }
}

/// What the client is allowed to see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleState {
    pub session_id: String,
    pub trial: u32,
    pub practice: bool,
    pub status: TrialStatus,
    pub actions_used: u32,
    pub actions_remaining: u32,
    pub player: Pose,
    pub ai: Pose,
    pub pig: Cell,
    pub board: Vec<String>,
    pub trials_completed: u32,
    pub score_so_far: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEnd {
    pub trial: u32,
    pub outcome: TrialStatus,
    pub actions_used: u32,
    pub trial_score: i32,
    pub attention_pass: Option<bool>,
    pub all_trials_done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub effect: Option<MoveEffect>,
    pub state: VisibleState,
    pub trial_end: Option<TrialEnd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub participant_id: String,
    pub condition: TreatmentCondition,
    /// The participant id was seen before; the session is excluded from
    /// default exports.
    pub duplicate_participant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub ts: u64,
    pub action: String,
    pub previous: serde_json::Value,
}

/// One line of a session's append-only event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEvent {
    Created { record: SessionRecord, duplicate: bool },
    Transcript { event: TranscriptEvent },
    TrialEnd { trial: TrialRecord },
    Survey { survey: SurveyResponse, overwrite: bool, ts: u64 },
    Status { status: SessionStatus, ts: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Snapshot {
    record: SessionRecord,
    duplicate: bool,
    audit: Vec<AuditEntry>,
    transcript: Vec<TranscriptEvent>,
}

struct LiveSession {
    record: SessionRecord,
    duplicate: bool,
    audit: Vec<AuditEntry>,
    transcript: Vec<TranscriptEvent>,
    game: Option<GameState>,
    trial_started_ms: u64,
    key_log: Vec<KeyLogEntry>,
    last_client_seq: Option<u64>,
}

impl LiveSession {
    fn new(record: SessionRecord, duplicate: bool) -> Self {
        Self {
            record,
            duplicate,
            audit: vec![],
            transcript: vec![],
            game: None,
            trial_started_ms: 0,
            key_log: vec![],
            last_client_seq: None,
        }
    }

    fn trials_done(&self) -> usize {
        self.record.trials.len()
    }
}

/// The default admits completed sessions of first-time participants only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportFilter {
    pub include_in_progress: bool,
    pub include_abandoned: bool,
    pub include_duplicates: bool,
}

impl ExportFilter {
    fn admits(&self, s: &LiveSession) -> bool {
        let status_ok = match s.record.status {
            SessionStatus::Complete => true,
            SessionStatus::InProgress => self.include_in_progress,
            SessionStatus::Abandoned => self.include_abandoned,
        };
        status_ok && (self.include_duplicates || !s.duplicate)
    }
}

struct Allocator {
    rng: ChaCha8Rng,
    balanced: HashMap<Demographic, usize>,
}

pub struct SessionStore {
    config: StoreConfig,
    clock: Arc<dyn Clock>,
    ai: AStarAgent,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<LiveSession>>>>,
    by_participant: Mutex<HashMap<String, Vec<String>>>,
    allocator: Mutex<Allocator>,
}

pub fn board_rows(layout: &BoardLayout) -> Vec<String> {
    (0..layout.height())
        .map(|r| {
            (0..layout.width())
                .map(|c| match layout.tile(Cell::new(r, c)) {
                    Some(TileKind::Passable) => '.',
                    Some(TileKind::Exit) => 'X',
                    _ => '#',
                })
                .collect()
        })
        .collect()
}

fn lock(s: &Arc<Mutex<LiveSession>>) -> std::sync::MutexGuard<'_, LiveSession> {
    s.lock().unwrap_or_else(|e| e.into_inner())
}

impl SessionStore {
    pub fn new(config: StoreConfig, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let store = Self {
            ai: AStarAgent::new(config.pose_model),
            allocator: Mutex::new(Allocator { rng: ChaCha8Rng::seed_from_u64(config.seed), balanced: HashMap::new() }),
            clock,
            sessions: RwLock::new(BTreeMap::new()),
            by_participant: Mutex::new(HashMap::new()),
            config,
        };
        store.load()?;
        Ok(store)
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    fn load(&self) -> Result<(), StoreError> {
        let Some(dir) = &self.config.data_dir else { return Ok(()) };
        fs::create_dir_all(dir)?;
        let mut sessions = self.sessions.write().unwrap();
        let mut alloc = self.allocator.lock().unwrap();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".snapshot.json"))
            .collect();
        paths.sort();
        for path in paths {
            let snap: Snapshot = serde_json::from_reader(BufReader::new(File::open(&path)?))?;
            if let Some(d) = snap.record.demographic {
                *alloc.balanced.entry(d).or_default() += 1;
            }
            self.by_participant
                .lock()
                .unwrap()
                .entry(snap.record.participant_id.clone())
                .or_default()
                .push(snap.record.session_id.clone());
            let mut live = LiveSession::new(snap.record, snap.duplicate);
            live.audit = snap.audit;
            live.transcript = snap.transcript;
            // A trial interrupted by a restart starts over; only finished
            // trials are in the snapshot.
            sessions.insert(live.record.session_id.clone(), Arc::new(Mutex::new(live)));
        }
        Ok(())
    }

    fn log(&self, session_id: &str, events: &[LogEvent]) -> Result<(), StoreError> {
        let Some(dir) = &self.config.data_dir else { return Ok(()) };
        let mut f =
            OpenOptions::new().create(true).append(true).open(dir.join(format!("{session_id}.events.jsonl")))?;
        for e in events {
            serde_json::to_writer(&mut f, e)?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }

    fn snapshot(&self, s: &LiveSession) -> Result<(), StoreError> {
        let Some(dir) = &self.config.data_dir else { return Ok(()) };
        let snap = Snapshot {
            record: s.record.clone(),
            duplicate: s.duplicate,
            audit: s.audit.clone(),
            transcript: s.transcript.clone(),
        };
        let id = &s.record.session_id;
        let tmp = dir.join(format!("{id}.snapshot.json.tmp"));
        serde_json::to_writer(File::create(&tmp)?, &snap)?;
        fs::rename(tmp, dir.join(format!("{id}.snapshot.json")))?;
        Ok(())
    }

    fn get(&self, session_id: &str) -> Result<Arc<Mutex<LiveSession>>, StoreError> {
        self.sessions
            .read()
            .unwrap()
            .get(session_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSession(session_id.to_string()))
    }

    pub fn create_session(&self, participant_id: &str, demographic: Demographic) -> Result<Created, StoreError> {
        let participant_id = participant_id.trim();
        if participant_id.is_empty() {
            return Err(StoreError::EmptyParticipant);
        }
        let mut sessions = self.sessions.write().unwrap();
        let mut by_participant = self.by_participant.lock().unwrap();
        let earlier = by_participant.get(participant_id).map(Vec::as_slice).unwrap_or_default();
        for id in earlier {
            let s = lock(&sessions[id]);
            if s.record.status == SessionStatus::InProgress {
                return Err(StoreError::DuplicateActive(s.record.session_id.clone()));
            }
        }
        let duplicate = !earlier.is_empty();
        let (session_id, treatment, seed) = {
            let mut alloc = self.allocator.lock().unwrap();
            let treatment = match self.config.assignment {
                AssignmentMode::Random => Treatment::ALL[alloc.rng.random_range(0..Treatment::ALL.len())],
                AssignmentMode::Balanced => {
                    let n = alloc.balanced.entry(demographic).or_default();
                    *n += 1;
                    Treatment::ALL[(*n - 1) % Treatment::ALL.len()]
                }
            };
            let mut id = format!("s{:016x}", alloc.rng.random::<u64>());
            while sessions.contains_key(&id) {
                id = format!("s{:016x}", alloc.rng.random::<u64>());
            }
            (id, treatment, alloc.rng.random::<u64>())
        };
        let record = SessionRecord {
            session_id: session_id.clone(),
            participant_id: participant_id.to_string(),
            demographic: Some(demographic),
            treatment,
            created_at: self.clock.now_ms(),
            seed,
            trials: vec![],
            survey: None,
            status: SessionStatus::InProgress,
        };
        let live = LiveSession::new(record.clone(), duplicate);
        self.log(&session_id, &[LogEvent::Created { record, duplicate }])?;
        self.snapshot(&live)?;
        sessions.insert(session_id.clone(), Arc::new(Mutex::new(live)));
        by_participant.entry(participant_id.to_string()).or_default().push(session_id.clone());
        Ok(Created {
            session_id,
            participant_id: participant_id.to_string(),
            condition: self.condition(treatment),
            duplicate_participant: duplicate,
        })
    }

    fn condition(&self, t: Treatment) -> TreatmentCondition {
        self.config.conditions.get(&t).cloned().unwrap_or_else(|| TreatmentCondition::standard(t))
    }

    pub fn instructions(&self, session_id: &str) -> Result<TreatmentCondition, StoreError> {
        let s = self.get(session_id)?;
        let t = lock(&s).record.treatment;
        Ok(self.condition(t))
    }

    pub fn record(&self, session_id: &str) -> Result<SessionRecord, StoreError> {
        Ok(lock(&self.get(session_id)?).record.clone())
    }

    pub fn transcript(&self, session_id: &str) -> Result<Vec<TranscriptEvent>, StoreError> {
        Ok(lock(&self.get(session_id)?).transcript.clone())
    }

    pub fn audit(&self, session_id: &str) -> Result<Vec<AuditEntry>, StoreError> {
        Ok(lock(&self.get(session_id)?).audit.clone())
    }

    /// Starts the next trial if none is running. The per-trial timer starts here.
    fn ensure_trial(&self, s: &mut LiveSession) {
        if s.game.is_none() && s.trials_done() < TRIALS_PER_SESSION as usize {
            let index = s.trials_done() as u32 + 1;
            let seed = trial_seed(s.record.seed, index);
            s.game = Some(GameState::new(self.config.layout.clone(), self.config.rules, index, seed));
            s.trial_started_ms = self.clock.now_ms();
            s.key_log.clear();
        }
    }

    fn visible(&self, s: &LiveSession) -> VisibleState {
        let trials_completed = s.trials_done() as u32;
        let score_so_far = s.record.total_score();
        let board = board_rows(&self.config.layout);
        match &s.game {
            Some(g) => VisibleState {
                session_id: s.record.session_id.clone(),
                trial: g.trial_index(),
                practice: g.is_practice(),
                status: g.status(),
                actions_used: g.actions_used(),
                actions_remaining: g.actions_remaining(),
                player: g.player(),
                ai: g.ai(),
                pig: g.pig(),
                board,
                trials_completed,
                score_so_far,
            },
            None => {
                let last = s.record.trials.last();
                let l = &self.config.layout;
                VisibleState {
                    session_id: s.record.session_id.clone(),
                    trial: trials_completed,
                    practice: false,
                    status: last.map_or(TrialStatus::Running, |t| t.outcome),
                    actions_used: last.map_or(0, |t| t.actions_used),
                    actions_remaining: MAX_ACTIONS - last.map_or(0, |t| t.actions_used),
                    player: l.player_start(),
                    ai: l.ai_start(),
                    pig: l.pig_start(),
                    board,
                    trials_completed,
                    score_so_far,
                }
            }
        }
    }

    /// Current board, starting the next trial when none is running.
    pub fn state(&self, session_id: &str) -> Result<VisibleState, StoreError> {
        let s = self.get(session_id)?;
        let mut s = lock(&s);
        if s.record.status == SessionStatus::InProgress {
            self.expire(&mut s)?;
            self.ensure_trial(&mut s);
        }
        Ok(self.visible(&s))
    }

    /// Records the running trial as finished.
    fn finish_trial(&self, s: &mut LiveSession) -> Result<TrialEnd, StoreError> {
        let game = s.game.take().expect("running trial");
        let trial_index = game.trial_index();
        let record = TrialRecord {
            trial_index,
            outcome: game.status(),
            actions_used: game.actions_used(),
            trial_score: game.score()?,
            key_log: std::mem::take(&mut s.key_log),
            practice: TrialRecord::is_practice_index(trial_index),
            attention_pass: (trial_index == ATTENTION_CHECK_TRIAL).then(|| game.exited_rightmost()),
        };
        let end = TrialEnd {
            trial: trial_index,
            outcome: record.outcome,
            actions_used: record.actions_used,
            trial_score: record.trial_score,
            attention_pass: record.attention_pass,
            all_trials_done: trial_index == TRIALS_PER_SESSION,
        };
        s.record.trials.push(record.clone());
        self.log(&s.record.session_id, &[LogEvent::TrialEnd { trial: record }])?;
        self.snapshot(s)?;
        Ok(end)
    }

    /// Times out the running trial if its clock has run past the limit.
    fn expire(&self, s: &mut LiveSession) -> Result<Option<TrialEnd>, StoreError> {
        let overdue = self.clock.now_ms().saturating_sub(s.trial_started_ms) > self.config.timeout_ms;
        let timed_out = overdue && s.game.as_mut().is_some_and(GameState::time_out);
        if timed_out {
            Ok(Some(self.finish_trial(s)?))
        } else {
            Ok(None)
        }
    }

    /// Expires every overdue trial; returns how many were timed out.
    pub fn expire_all(&self) -> Result<usize, StoreError> {
        let sessions: Vec<_> = self.sessions.read().unwrap().values().cloned().collect();
        let mut n = 0;
        for s in sessions {
            n += usize::from(self.expire(&mut lock(&s))?.is_some());
        }
        Ok(n)
    }

    pub fn play_turn(
        &self,
        session_id: &str,
        trial: u32,
        seq: u64,
        key: ArrowKey,
        latency_ms: u64,
    ) -> Result<TurnResult, StoreError> {
        let s = self.get(session_id)?;
        let mut s = lock(&s);
        if s.record.status != SessionStatus::InProgress {
            return Err(StoreError::NotInProgress(s.record.status));
        }
        if let Some(last) = s.last_client_seq {
            if seq <= last {
                return Err(StoreError::StaleSeq { last, got: seq });
            }
        }
        let expected = s.trials_done() as u32 + 1;
        if trial < expected || expected > TRIALS_PER_SESSION {
            return Err(StoreError::TrialTerminated(trial));
        }
        if trial > expected {
            return Err(StoreError::OutOfOrder { expected, got: trial });
        }
        s.last_client_seq = Some(seq);
        self.ensure_trial(&mut s);
        if let Some(end) = self.expire(&mut s)? {
            return Ok(TurnResult { effect: None, state: self.visible(&s), trial_end: Some(end) });
        }

        let now = self.clock.now_ms();
        let game = s.game.as_mut().expect("trial started");
        let turn = game.play_turn(key, &self.ai)?;
        let first_seq = s.transcript.len() as u64;
        let events = turn.events(&s.record.session_id, trial, first_seq, now);
        s.transcript.extend(events.iter().cloned());
        s.key_log.push(KeyLogEntry { key, latency_ms, server_ts: now });
        let log: Vec<LogEvent> = events.into_iter().map(|event| LogEvent::Transcript { event }).collect();
        self.log(&s.record.session_id, &log)?;

        let mut state = self.visible(&s);
        let trial_end = if turn.status.is_terminal() {
            let end = self.finish_trial(&mut s)?;
            state.trials_completed = s.trials_done() as u32;
            state.score_so_far = s.record.total_score();
            Some(end)
        } else {
            None
        };
        Ok(TurnResult { effect: Some(turn.player), state, trial_end })
    }

    /// Stores the survey and completes the session. A resubmission replaces
    /// the earlier answers and leaves an audit entry.
    pub fn submit_survey(&self, session_id: &str, survey: SurveyResponse) -> Result<(), StoreError> {
        let s = self.get(session_id)?;
        let mut s = lock(&s);
        if s.record.status == SessionStatus::Abandoned {
            return Err(StoreError::NotInProgress(s.record.status));
        }
        if s.trials_done() < TRIALS_PER_SESSION as usize {
            return Err(StoreError::Premature(s.trials_done()));
        }
        survey.validate()?;
        let now = self.clock.now_ms();
        let overwrite = s.record.survey.is_some();
        if let Some(previous) = s.record.survey.take() {
            s.audit.push(AuditEntry {
                ts: now,
                action: "survey_overwrite".into(),
                previous: serde_json::to_value(previous)?,
            });
        }
        s.record.survey = Some(survey.clone());
        s.record.status = SessionStatus::Complete;
        self.log(
            &s.record.session_id,
            &[
                LogEvent::Survey { survey, overwrite, ts: now },
                LogEvent::Status { status: SessionStatus::Complete, ts: now },
            ],
        )?;
        self.snapshot(&s)
    }

    pub fn abandon(&self, session_id: &str) -> Result<(), StoreError> {
        let s = self.get(session_id)?;
        let mut s = lock(&s);
        if s.record.status != SessionStatus::InProgress {
            return Err(StoreError::NotInProgress(s.record.status));
        }
        s.record.status = SessionStatus::Abandoned;
        s.game = None;
        let now = self.clock.now_ms();
        self.log(&s.record.session_id, &[LogEvent::Status { status: SessionStatus::Abandoned, ts: now }])?;
        self.snapshot(&s)
    }

    /// Sessions admitted by `filter`, ordered by creation time then id.
    pub fn export_sessions(&self, filter: &ExportFilter) -> Vec<(SessionRecord, Vec<TranscriptEvent>)> {
        let sessions: Vec<_> = self.sessions.read().unwrap().values().cloned().collect();
        let mut out: Vec<(SessionRecord, Vec<TranscriptEvent>)> = sessions
            .iter()
            .filter_map(|s| {
                let s = lock(s);
                filter.admits(&s).then(|| (s.record.clone(), s.transcript.clone()))
            })
            .collect();
        out.sort_by(|a, b| (a.0.created_at, &a.0.session_id).cmp(&(b.0.created_at, &b.0.session_id)));
        out
    }

    pub fn export_rows(&self, filter: &ExportFilter) -> Vec<ParticipantRow> {
        self.export_sessions(filter).iter().filter_map(|(r, _)| ParticipantRow::from_session(r)).collect()
    }
}

/// Replays an event log into the session record it describes.
pub fn replay_log(path: &Path) -> Result<Option<SessionRecord>, StoreError> {
    let mut record: Option<SessionRecord> = None;
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match (serde_json::from_str::<LogEvent>(&line)?, record.as_mut()) {
            (LogEvent::Created { record: r, .. }, _) => record = Some(r),
            (LogEvent::TrialEnd { trial }, Some(r)) => r.trials.push(trial),
            (LogEvent::Survey { survey, .. }, Some(r)) => r.survey = Some(survey),
            (LogEvent::Status { status, .. }, Some(r)) => r.status = status,
            _ => {}
        }
    }
    Ok(record)
}
