//! Analysis of participant-level data: cleaning, ANOVA, correlation,
//! coder agreement and figure tables.

mod anova;
mod describe;
pub mod dist;
mod figures;
mod report;
mod rows;

use thiserror::Error;

pub use anova::{format_p, two_way_anova, two_way_anova_labels, AnovaEffect, AnovaTable};
pub use describe::{
    agreement_band, label_kappa, pearson_r, weighted_quadratic_kappa, zscore_filter, zscore_outliers, ScoreField,
};
pub use figures::{aggregate_figures, FigureData, LabelShareRow, OutcomeRateRow, ScoreCellRow};
pub use report::{analyze, merge_second_coder, AnalysisOptions, AnalysisReport};
pub use rows::{
    read_rows, read_rows_csv, read_rows_jsonl, write_rows_csv, write_rows_jsonl, CodedLabel, ParticipantRow, CSV_HEADER,
};

use crate::record::ParseCodeError;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("inputs differ in length")]
    LengthMismatch,
    #[error("need at least 3 observations, got {0}")]
    TooFew(usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("zero variance; statistic undefined")]
    ZeroVariance,
    #[error("empty design cell: {0}")]
    EmptyCell(String),
    #[error("singular design matrix")]
    SingularDesign,
    #[error("kappa undefined: expected agreement is degenerate")]
    DegenerateKappa,
    #[error("label {0} not in the label order")]
    UnknownLabel(String),
    #[error("row {id}: {why}")]
    InvalidRow { id: String, why: String },
    #[error(transparent)]
    Parse(#[from] ParseCodeError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
