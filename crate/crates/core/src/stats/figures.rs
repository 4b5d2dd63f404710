//! Tables behind the outcome-rate, score/intelligence and coded-response
//! figures, emitted as CSV.

use std::collections::BTreeMap;

use serde::Serialize;

use super::rows::{CodedLabel, ParticipantRow};
use crate::record::{Demographic, OutcomeCounts, Treatment, TreatmentGroup};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRateRow {
    /// A treatment code, or `All` for the pooled mean line.
    pub treatment: String,
    pub participants: usize,
    pub trials: u32,
    pub caught_pct: f64,
    pub exited_pct: f64,
    pub exhausted_pct: f64,
    pub timed_out_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreCellRow {
    pub treatment: Treatment,
    pub demographic: Demographic,
    pub participants: usize,
    pub mean_score: f64,
    pub mean_intelligence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelShareRow {
    pub treatment_group: TreatmentGroup,
    pub demographic: Demographic,
    pub label: CodedLabel,
    pub count: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FigureData {
    pub outcome_rates: Vec<OutcomeRateRow>,
    pub score_cells: Vec<ScoreCellRow>,
    pub label_shares: Vec<LabelShareRow>,
}

fn pct(part: u32, whole: u32) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * f64::from(part) / f64::from(whole)
    }
}

fn rate_row(name: String, participants: usize, c: &OutcomeCounts) -> OutcomeRateRow {
    let trials = c.total();
    OutcomeRateRow {
        treatment: name,
        participants,
        trials,
        caught_pct: pct(c.caught, trials),
        exited_pct: pct(c.exited, trials),
        exhausted_pct: pct(c.exhausted, trials),
        timed_out_pct: pct(c.timed_out, trials),
    }
}

fn add(total: &mut OutcomeCounts, c: OutcomeCounts) {
    total.caught += c.caught;
    total.exited += c.exited;
    total.exhausted += c.exhausted;
    total.timed_out += c.timed_out;
}

pub fn aggregate_figures(rows: &[ParticipantRow]) -> FigureData {
    let mut data = FigureData::default();

    let mut all = OutcomeCounts::default();
    for t in Treatment::ALL {
        let group: Vec<&ParticipantRow> = rows.iter().filter(|r| r.treatment == t).collect();
        if group.is_empty() {
            continue;
        }
        let mut c = OutcomeCounts::default();
        group.iter().for_each(|r| add(&mut c, r.outcomes()));
        add(&mut all, c);
        data.outcome_rates.push(rate_row(t.to_string(), group.len(), &c));
    }
    if !rows.is_empty() {
        data.outcome_rates.push(rate_row("All".into(), rows.len(), &all));
    }

    for t in Treatment::ALL {
        for d in Demographic::ALL {
            let cell: Vec<&ParticipantRow> = rows.iter().filter(|r| r.treatment == t && r.demographic == d).collect();
            if cell.is_empty() {
                continue;
            }
            let estimates: Vec<f64> = cell.iter().filter_map(|r| r.intelligence_estimate).map(|v| v as f64).collect();
            data.score_cells.push(ScoreCellRow {
                treatment: t,
                demographic: d,
                participants: cell.len(),
                mean_score: cell.iter().map(|r| r.total_score as f64).sum::<f64>() / cell.len() as f64,
                mean_intelligence: (!estimates.is_empty())
                    .then(|| estimates.iter().sum::<f64>() / estimates.len() as f64),
            });
        }
    }

    for g in TreatmentGroup::ALL {
        for d in Demographic::ALL {
            let mut counts: BTreeMap<CodedLabel, usize> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.treatment_group == g && r.demographic == d) {
                for l in r.coder1_labels.iter().chain(&r.coder2_labels) {
                    *counts.entry(*l).or_default() += 1;
                }
            }
            let total: usize = counts.values().sum();
            if total == 0 {
                continue;
            }
            for label in CodedLabel::ALL {
                let count = counts.get(&label).copied().unwrap_or(0);
                data.label_shares.push(LabelShareRow {
                    treatment_group: g,
                    demographic: d,
                    label,
                    count,
                    pct: 100.0 * count as f64 / total as f64,
                });
            }
        }
    }
    data
}

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(vec![]);
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

impl FigureData {
    pub fn outcome_rates_csv(&self) -> String {
        to_csv(
            &self.outcome_rates,
            &["treatment", "participants", "trials", "caught_pct", "exited_pct", "exhausted_pct", "timed_out_pct"],
        )
    }

    pub fn score_cells_csv(&self) -> String {
        to_csv(&self.score_cells, &["treatment", "demographic", "participants", "mean_score", "mean_intelligence"])
    }

    pub fn label_shares_csv(&self) -> String {
        to_csv(&self.label_shares, &["treatment_group", "demographic", "label", "count", "pct"])
    }
}
