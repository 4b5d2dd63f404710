//! Batch simulation: whole 15-trial sessions played by the model (or a
//! random-key baseline) against the A* collaborator, aggregated into
//! cumulative-score curves and outcome rates.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astar::AStarAgent;
use crate::cognitive::{ModelAgent, ModelError, ModelParams, ModelStats, TraceEntry};
use crate::game::{
    ArrowKey, BoardLayout, GameError, GameRules, GameState, TrialStatus, ATTENTION_CHECK_TRIAL, TRIALS_PER_SESSION,
};
use crate::record::{KeyLogEntry, OutcomeCounts, SessionRecord, SessionStatus, Treatment, TrialRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("n_runs must be at least 1")]
    NoRuns,
    #[error("curves differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference curve has zero variance; R² is undefined")]
    ZeroVariance,
    #[error("bad sweep grid: {0}")]
    Grid(String),
    #[error("bad curve data: {0}")]
    Curve(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that can sit in the player's seat for a whole session.
pub trait Participant {
    fn begin_trial(&mut self, trial_index: u32);
    fn choose_key(&mut self, state: &GameState) -> Result<ArrowKey, SimError>;
    fn action_completed(&mut self, _state: &GameState) -> Result<(), SimError> {
        Ok(())
    }
    fn end_trial(&mut self, _state: &GameState) -> Result<(), SimError> {
        Ok(())
    }
}

impl Participant for ModelAgent {
    fn begin_trial(&mut self, trial_index: u32) {
        ModelAgent::begin_trial(self, trial_index);
    }

    fn choose_key(&mut self, state: &GameState) -> Result<ArrowKey, SimError> {
        Ok(ModelAgent::choose_key(self, state)?)
    }

    fn action_completed(&mut self, state: &GameState) -> Result<(), SimError> {
        Ok(ModelAgent::action_completed(self, state.actions_used())?)
    }

    fn end_trial(&mut self, state: &GameState) -> Result<(), SimError> {
        Ok(ModelAgent::end_trial(self, state.status(), state.actions_used())?)
    }
}

/// Baseline player pressing uniformly random arrow keys.
pub struct RandomKeyAgent {
    rng: ChaCha8Rng,
}

impl RandomKeyAgent {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Participant for RandomKeyAgent {
    fn begin_trial(&mut self, _trial_index: u32) {}

    fn choose_key(&mut self, _state: &GameState) -> Result<ArrowKey, SimError> {
        Ok(ArrowKey::ALL[self.rng.random_range(0..4)])
    }
}

/// Seed for the pig in a given trial; distinct from the participant's stream.
pub fn trial_seed(session_seed: u64, trial_index: u32) -> u64 {
    session_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(u64::from(trial_index))
}

/// Plays 15 trials with `participant` against the A* agent.
pub fn play_session(
    participant: &mut dyn Participant,
    layout: &Arc<BoardLayout>,
    rules: GameRules,
    seed: u64,
) -> Result<SessionRecord, SimError> {
    let ai = AStarAgent::default();
    let mut trials = Vec::with_capacity(TRIALS_PER_SESSION as usize);
    for trial_index in 1..=TRIALS_PER_SESSION {
        let mut state = GameState::new(layout.clone(), rules, trial_index, trial_seed(seed, trial_index));
        participant.begin_trial(trial_index);
        let mut key_log = vec![];
        while state.status() == TrialStatus::Running {
            let key = participant.choose_key(&state)?;
            state.play_turn(key, &ai)?;
            key_log.push(KeyLogEntry { key, latency_ms: 0, server_ts: u64::from(state.actions_used()) });
            participant.action_completed(&state)?;
        }
        participant.end_trial(&state)?;
        trials.push(TrialRecord {
            trial_index,
            outcome: state.status(),
            actions_used: state.actions_used(),
            trial_score: state.score()?,
            key_log,
            practice: TrialRecord::is_practice_index(trial_index),
            attention_pass: (trial_index == ATTENTION_CHECK_TRIAL).then(|| state.exited_rightmost()),
        });
    }
    Ok(SessionRecord {
        session_id: format!("sim-{seed}"),
        participant_id: format!("sim-{seed}"),
        demographic: None,
        treatment: Treatment::Control,
        created_at: 0,
        seed,
        trials,
        survey: None,
        status: SessionStatus::Complete,
    })
}

/// One simulated model session with the agent's behaviour counters.
#[derive(Debug, Clone)]
pub struct SimulatedSession {
    pub record: SessionRecord,
    pub stats: ModelStats,
    pub final_utilities: Vec<(&'static str, f64)>,
    pub trace: Vec<TraceEntry>,
}

fn run_model_session(
    params: &ModelParams,
    layout: &Arc<BoardLayout>,
    seed: u64,
    rules: GameRules,
    trace: bool,
) -> Result<SimulatedSession, SimError> {
    let mut agent = ModelAgent::new(params.clone(), layout.clone(), seed)?;
    if trace {
        agent = agent.with_trace();
    }
    let record = play_session(&mut agent, layout, rules, seed)?;
    Ok(SimulatedSession {
        record,
        stats: agent.stats(),
        final_utilities: agent.procedural().iter().map(|(_, p)| (p.name, p.utility)).collect(),
        trace: agent.take_trace(),
    })
}

pub fn run_session(
    params: &ModelParams,
    layout: &Arc<BoardLayout>,
    seed: u64,
    rules: GameRules,
) -> Result<SimulatedSession, SimError> {
    run_model_session(params, layout, seed, rules, false)
}

/// Same as [`run_session`] with a per-cycle decision trace.
pub fn run_session_traced(
    params: &ModelParams,
    layout: &Arc<BoardLayout>,
    seed: u64,
    rules: GameRules,
) -> Result<SimulatedSession, SimError> {
    run_model_session(params, layout, seed, rules, true)
}

/// Running total of trial scores at each trial index; practice trials add 0.
pub fn cumulative_curve(record: &SessionRecord) -> Vec<i64> {
    let mut total = 0i64;
    let mut curve = vec![0; TRIALS_PER_SESSION as usize];
    for t in &record.trials {
        if !t.practice {
            total += i64::from(t.trial_score);
        }
        if let Some(slot) = curve.get_mut(t.trial_index as usize - 1) {
            *slot = total;
        }
    }
    // Carry forward over any trial index missing from the record.
    for i in 1..curve.len() {
        if record.trials.iter().all(|t| t.trial_index as usize != i + 1) {
            curve[i] = curve[i - 1];
        }
    }
    curve
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Model,
    RandomKeys,
}

#[derive(Debug, Clone)]
pub struct BatchConfig {
    pub n_runs: usize,
    pub base_seed: u64,
    pub model_params: ModelParams,
    pub layout: Arc<BoardLayout>,
    pub rules: GameRules,
    pub agent: AgentKind,
    pub parallel: bool,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            n_runs: 150,
            base_seed: 0,
            model_params: ModelParams::default(),
            layout: Arc::new(BoardLayout::default_layout()),
            rules: GameRules::default(),
            agent: AgentKind::Model,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeRates {
    pub caught: f64,
    pub exited: f64,
    pub exhausted: f64,
    pub timed_out: f64,
}

impl OutcomeRates {
    pub fn from_counts(c: &OutcomeCounts) -> Self {
        let n = f64::from(c.total().max(1));
        Self {
            caught: f64::from(c.caught) / n,
            exited: f64::from(c.exited) / n,
            exhausted: f64::from(c.exhausted) / n,
            timed_out: f64::from(c.timed_out) / n,
        }
    }

    pub fn sum(&self) -> f64 {
        self.caught + self.exited + self.exhausted + self.timed_out
    }
}

/// Aggregate over a batch. Rates cover scored (non-practice) trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub n_runs: usize,
    pub base_seed: u64,
    pub avg_cumulative_score_per_trial: Vec<f64>,
    pub outcome_counts: OutcomeCounts,
    pub outcome_rates: OutcomeRates,
    pub attention_pass_rate: f64,
    pub per_run_totals: Vec<i32>,
    pub model_stats: ModelStats,
    pub mean_final_utilities: BTreeMap<String, f64>,
}

impl BatchSummary {
    pub fn mean_total(&self) -> f64 {
        self.per_run_totals.iter().map(|&t| f64::from(t)).sum::<f64>() / self.n_runs as f64
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("trial_index,avg_cumulative_score\n");
        for (i, v) in self.avg_cumulative_score_per_trial.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises")
    }
}

struct RunResult {
    record: SessionRecord,
    stats: ModelStats,
    utilities: Vec<(&'static str, f64)>,
}

fn run_one(config: &BatchConfig, k: usize) -> Result<RunResult, SimError> {
    let seed = config.base_seed.wrapping_add(k as u64);
    match config.agent {
        AgentKind::Model => {
            let s = run_session(&config.model_params, &config.layout, seed, config.rules)?;
            Ok(RunResult { record: s.record, stats: s.stats, utilities: s.final_utilities })
        }
        AgentKind::RandomKeys => {
            let record = play_session(&mut RandomKeyAgent::new(seed), &config.layout, config.rules, seed)?;
            Ok(RunResult { record, stats: ModelStats::default(), utilities: vec![] })
        }
    }
}

/// Runs `n_runs` sessions seeded `base_seed + k`. Results are reduced in run
/// order, so parallel and serial execution agree exactly.
pub fn run_batch(config: &BatchConfig) -> Result<BatchSummary, SimError> {
    if config.n_runs == 0 {
        return Err(SimError::NoRuns);
    }
    let runs: Vec<RunResult> = if config.parallel {
        (0..config.n_runs).into_par_iter().map(|k| run_one(config, k)).collect::<Result<_, _>>()?
    } else {
        (0..config.n_runs).map(|k| run_one(config, k)).collect::<Result<_, _>>()?
    };
    Ok(summarise(config, &runs))
}

fn summarise(config: &BatchConfig, runs: &[RunResult]) -> BatchSummary {
    let n = runs.len();
    let mut curve_sums = vec![0i64; TRIALS_PER_SESSION as usize];
    let mut counts = OutcomeCounts::default();
    let mut stats = ModelStats::default();
    let mut attention = 0usize;
    let mut utilities: BTreeMap<String, f64> = BTreeMap::new();
    for run in runs {
        for (sum, v) in curve_sums.iter_mut().zip(cumulative_curve(&run.record)) {
            *sum += v;
        }
        let c = run.record.outcome_counts();
        counts.caught += c.caught;
        counts.exited += c.exited;
        counts.exhausted += c.exhausted;
        counts.timed_out += c.timed_out;
        stats += run.stats;
        attention += usize::from(run.record.attention_pass() == Some(true));
        for (name, u) in &run.utilities {
            *utilities.entry(name.to_string()).or_default() += u;
        }
    }
    utilities.values_mut().for_each(|u| *u /= n as f64);
    BatchSummary {
        n_runs: n,
        base_seed: config.base_seed,
        avg_cumulative_score_per_trial: curve_sums.iter().map(|&s| s as f64 / n as f64).collect(),
        outcome_rates: OutcomeRates::from_counts(&counts),
        outcome_counts: counts,
        attention_pass_rate: attention as f64 / n as f64,
        per_run_totals: runs.iter().map(|r| r.record.total_score()).collect(),
        model_stats: stats,
        mean_final_utilities: utilities,
    }
}

/// Coefficient of determination of `model` against `reference`.
pub fn fit_r2(model: &[f64], reference: &[f64]) -> Result<f64, SimError> {
    if model.len() != reference.len() {
        return Err(SimError::LengthMismatch(model.len(), reference.len()));
    }
    if reference.is_empty() {
        return Err(SimError::ZeroVariance);
    }
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let ss_tot: f64 = reference.iter().map(|r| (r - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(SimError::ZeroVariance);
    }
    let ss_res: f64 = model.iter().zip(reference).map(|(m, r)| (r - m).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Deserialize)]
struct CurveRow {
    #[serde(default)]
    group: Option<String>,
    trial_index: u32,
    avg_cumulative_score: f64,
}

/// Reads `[group,]trial_index,avg_cumulative_score` rows into one curve per
/// group (rows without a group column land under `""`). Each curve must
/// cover trials 1..=15 exactly once.
pub fn read_curves<R: Read>(reader: R) -> Result<BTreeMap<String, Vec<f64>>, SimError> {
    let mut raw: BTreeMap<String, BTreeMap<u32, f64>> = BTreeMap::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let row: CurveRow = row?;
        let group = row.group.unwrap_or_default();
        if raw.entry(group.clone()).or_default().insert(row.trial_index, row.avg_cumulative_score).is_some() {
            return Err(SimError::Curve(format!("duplicate trial {} in group {group:?}", row.trial_index)));
        }
    }
    raw.into_iter()
        .map(|(group, points)| {
            let expected: Vec<u32> = (1..=TRIALS_PER_SESSION).collect();
            if points.keys().copied().collect::<Vec<_>>() != expected {
                return Err(SimError::Curve(format!("group {group:?} must cover trials 1..={TRIALS_PER_SESSION}")));
            }
            Ok((group, points.into_values().collect()))
        })
        .collect()
}

/// Parameter grid for [`sweep`]: `[grid]` maps parameter names to value lists.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub runs: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SweepGrid {
    pub fn from_text(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Grid(e.to_string()))
    }

    /// Cartesian product in key order, last key varying fastest.
    pub fn points(&self) -> Vec<Vec<(String, f64)>> {
        if self.grid.is_empty() || self.grid.values().any(Vec::is_empty) {
            return vec![];
        }
        let mut points: Vec<Vec<(String, f64)>> = vec![vec![]];
        for (key, values) in &self.grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut p = p.clone();
                        p.push((key.clone(), *v));
                        p
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: Vec<(String, f64)>,
    pub summary: BatchSummary,
    pub r2: BTreeMap<String, Result<f64, String>>,
}

/// One batch per grid point, each fitted against every reference curve.
pub fn sweep(
    grid: &SweepGrid,
    base: &BatchConfig,
    references: &BTreeMap<String, Vec<f64>>,
) -> Result<Vec<SweepRow>, SimError> {
    let mut rows = vec![];
    for point in grid.points() {
        let mut config = base.clone();
        if let Some(runs) = grid.runs {
            config.n_runs = runs;
        }
        if let Some(seed) = grid.seed {
            config.base_seed = seed;
        }
        for (key, value) in &point {
            config.model_params.set(key, *value)?;
        }
        config.model_params.validate()?;
        let summary = run_batch(&config)?;
        let r2 = references
            .iter()
            .map(|(g, curve)| {
                let fit = fit_r2(&summary.avg_cumulative_score_per_trial, curve).map_err(|e| e.to_string());
                (g.clone(), fit)
            })
            .collect();
        rows.push(SweepRow { point, summary, r2 });
    }
    Ok(rows)
}

/// CSV for sweep output; the header is written even for an empty table.
pub fn write_sweep_csv<W: Write>(
    out: W,
    grid: &SweepGrid,
    references: &BTreeMap<String, Vec<f64>>,
    rows: &[SweepRow],
) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = grid.grid.keys().cloned().collect();
    header.extend(
        ["n_runs", "catch_rate", "exit_rate", "exhausted_rate", "timed_out_rate", "mean_total", "rotation_rate"]
            .map(String::from),
    );
    header.extend(references.keys().map(|g| format!("r2_{g}")));
    w.write_record(&header)?;
    for row in rows {
        let s = &row.summary;
        let mut record: Vec<String> = row.point.iter().map(|(_, v)| v.to_string()).collect();
        record.push(s.n_runs.to_string());
        for v in [
            s.outcome_rates.caught,
            s.outcome_rates.exited,
            s.outcome_rates.exhausted,
            s.outcome_rates.timed_out,
            s.mean_total(),
            s.model_stats.rotation_rate(),
        ] {
            record.push(v.to_string());
        }
        for g in references.keys() {
            record.push(match &row.r2[g] {
                Ok(v) => v.to_string(),
                Err(_) => "NA".to_string(),
            });
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
