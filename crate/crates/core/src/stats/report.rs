//! The full analysis pass over participant rows and its written outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::anova::{two_way_anova, AnovaTable};
use super::describe::{agreement_band, label_kappa, pearson_r, zscore_filter, ScoreField};
use super::figures::{aggregate_figures, FigureData};
use super::rows::{write_rows_csv, CodedLabel, ParticipantRow};
use super::StatsError;

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub zscore_threshold: f64,
    pub zscore_field: ScoreField,
    pub anova: bool,
    pub kappa: bool,
    pub figures: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { zscore_threshold: 3.0, zscore_field: ScoreField::TotalScore, anova: true, kappa: true, figures: true }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    pub n_input: usize,
    pub kept: Vec<ParticipantRow>,
    pub removed: Vec<ParticipantRow>,
    pub figures: FigureData,
    pub anova: Option<Result<AnovaTable, String>>,
    pub correlation: Option<Result<(f64, usize), String>>,
    pub kappa: Option<Result<(f64, usize), String>>,
    pub options: AnalysisOptions,
}

pub fn analyze(rows: &[ParticipantRow], options: &AnalysisOptions) -> AnalysisReport {
    let (kept, removed) = zscore_filter(rows, options.zscore_field, options.zscore_threshold);
    let anova = options.anova.then(|| two_way_anova(&kept).map_err(|e| e.to_string()));
    let (scores, estimates): (Vec<f64>, Vec<f64>) =
        kept.iter().filter_map(|r| Some((r.total_score as f64, r.intelligence_estimate? as f64))).unzip();
    let correlation = Some(pearson_r(&scores, &estimates).map(|r| (r, scores.len())).map_err(|e| e.to_string()));
    let kappa = options.kappa.then(|| label_kappa(&kept).map_err(|e| e.to_string()));
    AnalysisReport {
        n_input: rows.len(),
        figures: aggregate_figures(&kept),
        kept,
        removed,
        anova,
        correlation,
        kappa,
        options: options.clone(),
    }
}

impl AnalysisReport {
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Analysis report\n");
        let _ = writeln!(
            s,
            "Participants: {} read, {} removed as outliers (|z| > {} on {:?}, per treatment), {} analysed.\n",
            self.n_input,
            self.removed.len(),
            self.options.zscore_threshold,
            self.options.zscore_field,
            self.kept.len()
        );

        let _ = writeln!(s, "## Outcome rates (% of scored trials)\n");
        let _ = writeln!(s, "| Treatment | n | Caught | Exited | Exhausted | Timed out |");
        let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|");
        for r in &self.figures.outcome_rates {
            let _ = writeln!(
                s,
                "| {} | {} | {:.1} | {:.1} | {:.1} | {:.1} |",
                r.treatment, r.participants, r.caught_pct, r.exited_pct, r.exhausted_pct, r.timed_out_pct
            );
        }

        if let Some(anova) = &self.anova {
            let _ = writeln!(s, "\n## Two-way ANOVA of total score (demographic x treatment, Type II)\n");
            match anova {
                Ok(t) => {
                    let _ = write!(s, "{t}");
                }
                Err(e) => {
                    let _ = writeln!(s, "not computed: {e}");
                }
            }
        }

        if let Some(c) = &self.correlation {
            let _ = writeln!(s, "\n## Score vs intelligence estimate\n");
            match c {
                Ok((r, n)) => {
                    let _ = writeln!(s, "Pearson r = {r:.2} (n = {n})");
                }
                Err(e) => {
                    let _ = writeln!(s, "not computed: {e}");
                }
            }
        }

        if let Some(k) = &self.kappa {
            let _ = writeln!(s, "\n## Inter-coder agreement\n");
            match k {
                Ok((k, n)) => {
                    let _ = writeln!(
                        s,
                        "Weighted quadratic kappa = {k:.2} (n = {n}), indicating {} agreement",
                        agreement_band(*k)
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "not computed: {e}");
                }
            }
        }
        s
    }

    /// Writes `report.md`, `cleaned.csv`, `removed.csv`, `anova.csv` and the
    /// figure CSVs into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), StatsError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.md"), self.to_markdown())?;
        write_rows_csv(std::fs::File::create(dir.join("cleaned.csv"))?, &self.kept)?;
        write_rows_csv(std::fs::File::create(dir.join("removed.csv"))?, &self.removed)?;
        if let Some(Ok(t)) = &self.anova {
            std::fs::write(dir.join("anova.csv"), t.to_csv())?;
        }
        if self.options.figures {
            std::fs::write(dir.join("fig_outcome_rates.csv"), self.figures.outcome_rates_csv())?;
            std::fs::write(dir.join("fig_score_intelligence.csv"), self.figures.score_cells_csv())?;
            std::fs::write(dir.join("fig_coded_responses.csv"), self.figures.label_shares_csv())?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct CoderRow {
    id: String,
    labels: String,
}

/// Replaces second-coder labels from an `id,labels` CSV (labels `;`-separated).
pub fn merge_second_coder(rows: &mut [ParticipantRow], csv_text: &str) -> Result<usize, StatsError> {
    let mut by_id: BTreeMap<String, Vec<CodedLabel>> = BTreeMap::new();
    for rec in csv::Reader::from_reader(csv_text.as_bytes()).deserialize() {
        let r: CoderRow = rec?;
        let labels = r.labels.split(';').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_, _>>()?;
        by_id.insert(r.id, labels);
    }
    let mut merged = 0;
    for row in rows.iter_mut() {
        if let Some(labels) = by_id.remove(&row.id) {
            row.coder2_labels = labels;
            merged += 1;
        }
    }
    Ok(merged)
}
