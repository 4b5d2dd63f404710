//! Trial and session records shared by the simulator, the live service and
//! the analysis pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{ArrowKey, TrialStatus, PRACTICE_TRIALS};

#[derive(Debug, Error, PartialEq, Eq, Clone)]
#[error("unknown {kind} {value:?}")]
pub struct ParseCodeError {
    pub kind: &'static str,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Treatment {
    B1,
    B2,
    BNP,
    W1,
    W2,
    WNP,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TreatmentGroup {
    Black,
    White,
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Demographic {
    Black,
    White,
    NonWhite,
}

impl Treatment {
    pub const ALL: [Treatment; 7] = [
        Treatment::B1,
        Treatment::B2,
        Treatment::BNP,
        Treatment::W1,
        Treatment::W2,
        Treatment::WNP,
        Treatment::Control,
    ];

    pub fn group(self) -> TreatmentGroup {
        match self {
            Treatment::B1 | Treatment::B2 | Treatment::BNP => TreatmentGroup::Black,
            Treatment::W1 | Treatment::W2 | Treatment::WNP => TreatmentGroup::White,
            Treatment::Control => TreatmentGroup::Control,
        }
    }

    pub fn has_picture(self) -> bool {
        matches!(self, Treatment::B1 | Treatment::B2 | Treatment::W1 | Treatment::W2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Treatment::B1 => "B1",
            Treatment::B2 => "B2",
            Treatment::BNP => "BNP",
            Treatment::W1 => "W1",
            Treatment::W2 => "W2",
            Treatment::WNP => "WNP",
            Treatment::Control => "Control",
        }
    }

    pub fn index(self) -> usize {
        Treatment::ALL.iter().position(|t| *t == self).unwrap()
    }
}

impl TreatmentGroup {
    pub const ALL: [TreatmentGroup; 3] = [TreatmentGroup::Black, TreatmentGroup::White, TreatmentGroup::Control];

    pub fn as_str(self) -> &'static str {
        match self {
            TreatmentGroup::Black => "Black",
            TreatmentGroup::White => "White",
            TreatmentGroup::Control => "Control",
        }
    }
}

impl Demographic {
    pub const ALL: [Demographic; 3] = [Demographic::Black, Demographic::White, Demographic::NonWhite];

    pub fn as_str(self) -> &'static str {
        match self {
            Demographic::Black => "Black",
            Demographic::White => "White",
            Demographic::NonWhite => "NonWhite",
        }
    }

    pub fn index(self) -> usize {
        Demographic::ALL.iter().position(|d| *d == self).unwrap()
    }
}

macro_rules! code_text {
    ($ty:ty, $kind:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = ParseCodeError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                <$ty>::ALL
                    .into_iter()
                    .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
                    .ok_or_else(|| ParseCodeError { kind: $kind, value: s.to_string() })
            }
        }
    };
}

code_text!(Treatment, "treatment");
code_text!(TreatmentGroup, "treatment group");
code_text!(Demographic, "demographic");

/// A treatment code together with what the participant is shown before play.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentCondition {
    pub code: Treatment,
    pub instruction_text: String,
    pub picture_asset: Option<String>,
}

impl TreatmentCondition {
    /// Default instruction payload. Pictures are placeholder asset ids that a
    /// deployment maps onto licensed images.
    pub fn standard(code: Treatment) -> Self {
        let race = match code.group() {
            TreatmentGroup::Black => Some("Black or African American"),
            TreatmentGroup::White => Some("White or Caucasian"),
            TreatmentGroup::Control => None,
        };
        let instruction_text = match race {
            Some(race) => format!(
                "The AI agent you will play with learned by observing the behavior of people who identify as {race}."
            ),
            None => "The AI agent you will play with was trained by observing people's behavior.".to_string(),
        };
        let picture_asset = code.has_picture().then(|| format!("placeholder-{}", code.as_str().to_lowercase()));
        Self { code, instruction_text, picture_asset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyLogEntry {
    pub key: ArrowKey,
    pub latency_ms: u64,
    pub server_ts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u32,
    pub outcome: TrialStatus,
    pub actions_used: u32,
    pub trial_score: i32,
    pub key_log: Vec<KeyLogEntry>,
    pub practice: bool,
    pub attention_pass: Option<bool>,
}

impl TrialRecord {
    pub fn is_practice_index(trial_index: u32) -> bool {
        trial_index <= PRACTICE_TRIALS
    }
}

pub const SURVEY_QUESTIONS: usize = 5;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum SurveyError {
    #[error("intelligence estimate {0} outside 0..=100")]
    SliderOutOfRange(i64),
    #[error("expected {SURVEY_QUESTIONS} answers, got {0}")]
    AnswerCount(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub answers: Vec<String>,
    pub intelligence_estimate: i64,
}

impl SurveyResponse {
    pub fn validate(&self) -> Result<(), SurveyError> {
        if self.answers.len() != SURVEY_QUESTIONS {
            return Err(SurveyError::AnswerCount(self.answers.len()));
        }
        if !(0..=100).contains(&self.intelligence_estimate) {
            return Err(SurveyError::SliderOutOfRange(self.intelligence_estimate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    InProgress,
    Complete,
    Abandoned,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub caught: u32,
    pub exited: u32,
    pub exhausted: u32,
    pub timed_out: u32,
}

impl OutcomeCounts {
    pub fn add(&mut self, outcome: TrialStatus) {
        match outcome {
            TrialStatus::Caught => self.caught += 1,
            TrialStatus::Exited => self.exited += 1,
            TrialStatus::Exhausted => self.exhausted += 1,
            TrialStatus::TimedOut => self.timed_out += 1,
            TrialStatus::Running => {}
        }
    }

    pub fn total(&self) -> u32 {
        self.caught + self.exited + self.exhausted + self.timed_out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub participant_id: String,
    pub demographic: Option<Demographic>,
    pub treatment: Treatment,
    pub created_at: u64,
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    pub survey: Option<SurveyResponse>,
    pub status: SessionStatus,
}

impl SessionRecord {
    /// Trials that count towards analysis (practice excluded).
    pub fn scored_trials(&self) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(|t| !t.practice)
    }

    pub fn total_score(&self) -> i32 {
        self.scored_trials().map(|t| t.trial_score).sum()
    }

    pub fn outcome_counts(&self) -> OutcomeCounts {
        let mut counts = OutcomeCounts::default();
        for t in self.scored_trials() {
            counts.add(t.outcome);
        }
        counts
    }

    pub fn attention_pass(&self) -> Option<bool> {
        self.trials.iter().find_map(|t| t.attention_pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pictures_only_for_numbered_conditions() {
        for t in Treatment::ALL {
            let c = TreatmentCondition::standard(t);
            assert_eq!(
                c.picture_asset.is_some(),
                matches!(t, Treatment::B1 | Treatment::B2 | Treatment::W1 | Treatment::W2)
            );
        }
    }

    #[test]
    fn control_text_does_not_mention_race() {
        let text = TreatmentCondition::standard(Treatment::Control).instruction_text.to_lowercase();
        for word in ["black", "white", "african", "caucasian", "race", "racial"] {
            assert!(!text.contains(word), "{word}");
        }
    }

    #[test]
    fn groups() {
        assert_eq!(Treatment::BNP.group(), TreatmentGroup::Black);
        assert_eq!(Treatment::W2.group(), TreatmentGroup::White);
        assert_eq!(Treatment::Control.group(), TreatmentGroup::Control);
    }

    #[test]
    fn codes_parse_case_insensitively() {
        assert_eq!("wnp".parse::<Treatment>(), Ok(Treatment::WNP));
        assert_eq!("NonWhite".parse::<Demographic>(), Ok(Demographic::NonWhite));
        assert!("Asian".parse::<Demographic>().is_err());
    }

    #[test]
    fn slider_bounds() {
        let mut s = SurveyResponse { answers: vec![String::new(); 5], intelligence_estimate: 0 };
        assert!(s.validate().is_ok());
        s.intelligence_estimate = 100;
        assert!(s.validate().is_ok());
        s.intelligence_estimate = 101;
        assert_eq!(s.validate(), Err(SurveyError::SliderOutOfRange(101)));
        s.intelligence_estimate = -1;
        assert!(s.validate().is_err());
    }
}
