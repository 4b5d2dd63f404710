//! Participant-level rows: the exchange format between the session export
//! and the analysis pipeline.

use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::record::{Demographic, OutcomeCounts, ParseCodeError, SessionRecord, Treatment, TreatmentGroup};

/// Survey-response codes, in their reporting order from most positive to
/// most negative opinion of the AI. The order drives the kappa weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodedLabel {
    AiCooperated,
    AiUserDependent,
    AiNoPattern,
    Vague,
    UserFocusedOnOwnMovement,
    AiNotIntelligent,
    AiWorkedAgainst,
}

impl CodedLabel {
    pub const ALL: [CodedLabel; 7] = [
        CodedLabel::AiCooperated,
        CodedLabel::AiUserDependent,
        CodedLabel::AiNoPattern,
        CodedLabel::Vague,
        CodedLabel::UserFocusedOnOwnMovement,
        CodedLabel::AiNotIntelligent,
        CodedLabel::AiWorkedAgainst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CodedLabel::AiCooperated => "ai-cooperated",
            CodedLabel::AiUserDependent => "ai-user-dependent",
            CodedLabel::AiNoPattern => "ai-no-pattern",
            CodedLabel::Vague => "vague",
            CodedLabel::UserFocusedOnOwnMovement => "user-focused-on-own-movement",
            CodedLabel::AiNotIntelligent => "ai-not-intelligent",
            CodedLabel::AiWorkedAgainst => "ai-worked-against",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            CodedLabel::AiCooperated => "AI Cooperated with Human",
            CodedLabel::AiUserDependent => "AI Movement was User Dependent",
            CodedLabel::AiNoPattern => "AI had no pattern",
            CodedLabel::Vague => "Vague",
            CodedLabel::UserFocusedOnOwnMovement => "User Focused on own Movement",
            CodedLabel::AiNotIntelligent => "AI not intelligent",
            CodedLabel::AiWorkedAgainst => "AI Worked against Human",
        }
    }
}

impl fmt::Display for CodedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodedLabel {
    type Err = ParseCodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        CodedLabel::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s) || l.title().eq_ignore_ascii_case(s))
            .ok_or_else(|| ParseCodeError { kind: "label", value: s.to_string() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRow {
    pub id: String,
    pub demographic: Demographic,
    pub treatment: Treatment,
    pub treatment_group: TreatmentGroup,
    pub total_score: i64,
    pub intelligence_estimate: Option<i64>,
    pub caught: u32,
    pub exited: u32,
    pub exhausted: u32,
    pub timed_out: u32,
    #[serde(default)]
    pub coder1_labels: Vec<CodedLabel>,
    #[serde(default)]
    pub coder2_labels: Vec<CodedLabel>,
}

impl ParticipantRow {
    /// Row for a finished session. `None` when no demographic was recorded.
    pub fn from_session(session: &SessionRecord) -> Option<Self> {
        let counts = session.outcome_counts();
        Some(Self {
            id: session.participant_id.clone(),
            demographic: session.demographic?,
            treatment: session.treatment,
            treatment_group: session.treatment.group(),
            total_score: i64::from(session.total_score()),
            intelligence_estimate: session.survey.as_ref().map(|s| s.intelligence_estimate),
            caught: counts.caught,
            exited: counts.exited,
            exhausted: counts.exhausted,
            timed_out: counts.timed_out,
            coder1_labels: vec![],
            coder2_labels: vec![],
        })
    }

    pub fn outcomes(&self) -> OutcomeCounts {
        OutcomeCounts { caught: self.caught, exited: self.exited, exhausted: self.exhausted, timed_out: self.timed_out }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |why: String| Err(StatsError::InvalidRow { id: self.id.clone(), why });
        if self.treatment.group() != self.treatment_group {
            return bad(format!("group {} does not match treatment {}", self.treatment_group, self.treatment));
        }
        if let Some(est) = self.intelligence_estimate {
            if !(0..=100).contains(&est) {
                return bad(format!("intelligence estimate {est} outside 0..=100"));
            }
        }
        Ok(())
    }
}

/// Flat CSV form; label lists are `;`-separated.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    id: String,
    demographic: Demographic,
    treatment: Treatment,
    treatment_group: TreatmentGroup,
    total_score: i64,
    intelligence_estimate: Option<i64>,
    caught: u32,
    exited: u32,
    exhausted: u32,
    timed_out: u32,
    #[serde(default)]
    coder1_labels: String,
    #[serde(default)]
    coder2_labels: String,
}

fn join_labels(labels: &[CodedLabel]) -> String {
    labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(";")
}

fn split_labels(text: &str) -> Result<Vec<CodedLabel>, ParseCodeError> {
    text.split(';').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

pub const CSV_HEADER: [&str; 12] = [
    "id",
    "demographic",
    "treatment",
    "treatment_group",
    "total_score",
    "intelligence_estimate",
    "caught",
    "exited",
    "exhausted",
    "timed_out",
    "coder1_labels",
    "coder2_labels",
];

pub fn write_rows_csv<W: Write>(out: W, rows: &[ParticipantRow]) -> Result<(), StatsError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(CsvRow {
            id: r.id.clone(),
            demographic: r.demographic,
            treatment: r.treatment,
            treatment_group: r.treatment_group,
            total_score: r.total_score,
            intelligence_estimate: r.intelligence_estimate,
            caught: r.caught,
            exited: r.exited,
            exhausted: r.exhausted,
            timed_out: r.timed_out,
            coder1_labels: join_labels(&r.coder1_labels),
            coder2_labels: join_labels(&r.coder2_labels),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ParticipantRow>, StatsError> {
    let mut rows = vec![];
    for rec in csv::Reader::from_reader(input).deserialize() {
        let r: CsvRow = rec?;
        let row = ParticipantRow {
            coder1_labels: split_labels(&r.coder1_labels)?,
            coder2_labels: split_labels(&r.coder2_labels)?,
            id: r.id,
            demographic: r.demographic,
            treatment: r.treatment,
            treatment_group: r.treatment_group,
            total_score: r.total_score,
            intelligence_estimate: r.intelligence_estimate,
            caught: r.caught,
            exited: r.exited,
            exhausted: r.exhausted,
            timed_out: r.timed_out,
        };
        row.validate()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_rows_jsonl<W: Write>(mut out: W, rows: &[ParticipantRow]) -> Result<(), StatsError> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_rows_jsonl<R: BufRead>(input: R) -> Result<Vec<ParticipantRow>, StatsError> {
    let mut rows = vec![];
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ParticipantRow = serde_json::from_str(&line)?;
        row.validate()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads CSV or JSONL, chosen by the first non-blank character.
pub fn read_rows(text: &str) -> Result<Vec<ParticipantRow>, StatsError> {
    if text.trim_start().starts_with('{') {
        read_rows_jsonl(text.as_bytes())
    } else {
        read_rows_csv(text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ParticipantRow {
        ParticipantRow {
            id: "p1".into(),
            demographic: Demographic::NonWhite,
            treatment: Treatment::WNP,
            treatment_group: TreatmentGroup::White,
            total_score: 42,
            intelligence_estimate: Some(100),
            caught: 7,
            exited: 2,
            exhausted: 3,
            timed_out: 0,
            coder1_labels: vec![CodedLabel::AiCooperated, CodedLabel::Vague],
            coder2_labels: vec![CodedLabel::AiUserDependent],
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            row(),
            ParticipantRow { id: "p2".into(), intelligence_estimate: None, coder1_labels: vec![], ..row() },
        ];
        let mut out = vec![];
        write_rows_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("id,demographic,treatment,treatment_group,total_score,"));
        assert!(text.contains("ai-cooperated;vague"));
        assert_eq!(read_rows(&text).unwrap(), rows);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut out = vec![];
        write_rows_jsonl(&mut out, &[row()]).unwrap();
        assert_eq!(read_rows(std::str::from_utf8(&out).unwrap()).unwrap(), vec![row()]);
    }

    #[test]
    fn empty_export_has_header_only() {
        let mut out = vec![];
        write_rows_csv(&mut out, &[]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim_end(), CSV_HEADER.join(","));
    }

    #[test]
    fn inconsistent_group_rejected() {
        let r = ParticipantRow { treatment_group: TreatmentGroup::Black, ..row() };
        assert!(r.validate().is_err());
        let r = ParticipantRow { intelligence_estimate: Some(101), ..row() };
        assert!(r.validate().is_err());
    }

    #[test]
    fn labels_parse_from_either_spelling() {
        assert_eq!("AI Worked against Human".parse::<CodedLabel>().unwrap(), CodedLabel::AiWorkedAgainst);
        assert_eq!("vague".parse::<CodedLabel>().unwrap(), CodedLabel::Vague);
        assert!("nonsense".parse::<CodedLabel>().is_err());
    }
}
