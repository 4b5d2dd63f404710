//! Outlier filtering, correlation and inter-coder agreement.

use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::rows::{CodedLabel, ParticipantRow};
use super::StatsError;
use crate::record::Treatment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreField {
    #[default]
    TotalScore,
    IntelligenceEstimate,
}

impl ScoreField {
    fn value(self, row: &ParticipantRow) -> Option<f64> {
        match self {
            ScoreField::TotalScore => Some(row.total_score as f64),
            ScoreField::IntelligenceEstimate => row.intelligence_estimate.map(|v| v as f64),
        }
    }
}

/// Flags values whose |z| exceeds `threshold` (population sd). Nothing is
/// flagged when the sd is zero or there are fewer than two values.
pub fn zscore_outliers(values: &[f64], threshold: f64) -> Vec<bool> {
    let n = values.len();
    if n < 2 {
        return vec![false; n];
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if sd == 0.0 {
        return vec![false; n];
    }
    values.iter().map(|v| ((v - mean) / sd).abs() > threshold).collect()
}

/// One pass of per-treatment z-score cleaning. Rows missing the field are
/// kept. Returns `(kept, removed)` in input order.
pub fn zscore_filter(
    rows: &[ParticipantRow],
    field: ScoreField,
    threshold: f64,
) -> (Vec<ParticipantRow>, Vec<ParticipantRow>) {
    let mut by_treatment: BTreeMap<Treatment, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if field.value(r).is_some() {
            by_treatment.entry(r.treatment).or_default().push(i);
        }
    }
    let mut drop = vec![false; rows.len()];
    for idx in by_treatment.values() {
        let values: Vec<f64> = idx.iter().map(|&i| field.value(&rows[i]).unwrap()).collect();
        for (&i, out) in idx.iter().zip(zscore_outliers(&values, threshold)) {
            drop[i] = out;
        }
    }
    let (mut kept, mut removed) = (vec![], vec![]);
    for (r, d) in rows.iter().zip(drop) {
        if d {
            removed.push(r.clone())
        } else {
            kept.push(r.clone())
        }
    }
    (kept, removed)
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch);
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Quadratic-weighted Cohen's kappa over the ordered `labels`.
pub fn weighted_quadratic_kappa<T: PartialEq + Debug>(
    coder1: &[T],
    coder2: &[T],
    labels: &[T],
) -> Result<f64, StatsError> {
    if coder1.len() != coder2.len() {
        return Err(StatsError::LengthMismatch);
    }
    if coder1.is_empty() {
        return Err(StatsError::TooFew(0));
    }
    let k = labels.len();
    if k < 2 {
        return Err(StatsError::DegenerateKappa);
    }
    let index = |v: &T| labels.iter().position(|l| l == v).ok_or_else(|| StatsError::UnknownLabel(format!("{v:?}")));
    let mut observed = vec![vec![0.0; k]; k];
    for (a, b) in coder1.iter().zip(coder2) {
        observed[index(a)?][index(b)?] += 1.0;
    }
    let n = coder1.len() as f64;
    let rows: Vec<f64> = observed.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..k).map(|j| observed.iter().map(|r| r[j]).sum()).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64) / (k as f64 - 1.0)).powi(2);
            num += w * observed[i][j];
            den += w * rows[i] * cols[j] / n;
        }
    }
    if den == 0.0 {
        return Err(StatsError::DegenerateKappa);
    }
    Ok(1.0 - num / den)
}

/// Kappa over rows coded by both coders, pairing each coder's first label.
pub fn label_kappa(rows: &[ParticipantRow]) -> Result<(f64, usize), StatsError> {
    let (c1, c2): (Vec<CodedLabel>, Vec<CodedLabel>) =
        rows.iter().filter_map(|r| Some((*r.coder1_labels.first()?, *r.coder2_labels.first()?))).unzip();
    Ok((weighted_quadratic_kappa(&c1, &c2, &CodedLabel::ALL)?, c1.len()))
}

/// Conventional verbal band for a kappa value.
pub fn agreement_band(kappa: f64) -> &'static str {
    match kappa {
        k if k < 0.0 => "poor",
        k if k <= 0.20 => "slight",
        k if k <= 0.40 => "fair",
        k if k <= 0.60 => "moderate",
        k if k <= 0.80 => "substantial",
        _ => "almost perfect",
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::record::{Demographic, TreatmentGroup};

    fn row(id: usize, treatment: Treatment, score: i64) -> ParticipantRow {
        ParticipantRow {
            id: format!("p{id}"),
            demographic: Demographic::White,
            treatment,
            treatment_group: treatment.group(),
            total_score: score,
            intelligence_estimate: Some(50),
            caught: 0,
            exited: 0,
            exhausted: 0,
            timed_out: 0,
            coder1_labels: vec![],
            coder2_labels: vec![],
        }
    }

    #[test]
    fn planted_outlier_is_the_only_removal() {
        let mut rows: Vec<ParticipantRow> = (0..99).map(|i| row(i, Treatment::B1, 0)).collect();
        rows.push(row(99, Treatment::B1, 1000));
        let (kept, removed) = zscore_filter(&rows, ScoreField::TotalScore, 3.0);
        assert_eq!(kept.len(), 99);
        assert_eq!(removed.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), vec!["p99"]);
    }

    #[test]
    fn constant_and_infinite_threshold_remove_nothing() {
        let rows: Vec<ParticipantRow> = (0..10).map(|i| row(i, Treatment::W2, 7)).collect();
        assert!(zscore_filter(&rows, ScoreField::TotalScore, 3.0).1.is_empty());
        let mut rows: Vec<ParticipantRow> = (0..20).map(|i| row(i, Treatment::W2, i as i64)).collect();
        rows.push(row(20, Treatment::W2, 10_000));
        assert_eq!(zscore_filter(&rows, ScoreField::TotalScore, f64::INFINITY).0, rows);
    }

    #[test]
    fn filter_is_per_treatment() {
        // 1000 is ordinary among its own treatment, extreme against the pooled set.
        let mut rows: Vec<ParticipantRow> = (0..30).map(|i| row(i, Treatment::B1, i as i64 % 3)).collect();
        rows.extend((30..40).map(|i| row(i, Treatment::Control, 1000 + i as i64 % 2)));
        assert!(zscore_filter(&rows, ScoreField::TotalScore, 3.0).1.is_empty());
    }

    #[test]
    fn second_pass_can_remove_more() {
        // Single-pass cleaning is intentional: recomputed stats expose new outliers.
        let mut values = vec![0.0; 200];
        values.push(30.0);
        values.push(10_000.0);
        let rows: Vec<ParticipantRow> =
            values.iter().enumerate().map(|(i, v)| row(i, Treatment::BNP, *v as i64)).collect();
        let (kept, removed) = zscore_filter(&rows, ScoreField::TotalScore, 3.0);
        assert_eq!(removed.len(), 1);
        let (_, removed_again) = zscore_filter(&kept, ScoreField::TotalScore, 3.0);
        assert_eq!(removed_again.len(), 1);
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson_r(&x, &x.map(|v| 2.0 * v)).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &x.map(|v| -v)).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson_r(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(pearson_r(&x, &[1.0; 4]), Err(StatsError::ZeroVariance)));
        assert!(matches!(pearson_r(&x[..2], &x[..2]), Err(StatsError::TooFew(2))));
    }

    #[test]
    fn kappa_examples() {
        let labels = CodedLabel::ALL;
        let v = [labels[0], labels[3], labels[6], labels[2]];
        assert!((weighted_quadratic_kappa(&v, &v, &labels).unwrap() - 1.0).abs() < 1e-12);
        // Opposite extremes, 4 items: sum wO = 4, sum wE = 2, so kappa = -1.
        let a = [labels[0], labels[0], labels[6], labels[6]];
        let b = [labels[6], labels[6], labels[0], labels[0]];
        assert!((weighted_quadratic_kappa(&a, &b, &labels).unwrap() + 1.0).abs() < 1e-12);
        let same = [labels[1]; 5];
        assert!(matches!(weighted_quadratic_kappa(&same, &same, &labels), Err(StatsError::DegenerateKappa)));
        assert_eq!(agreement_band(0.73), "substantial");
    }

    #[test]
    fn group_label_consistency_of_helper_rows() {
        assert_eq!(row(0, Treatment::BNP, 0).treatment_group, TreatmentGroup::Black);
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(
            x in proptest::collection::vec(-100.0f64..100.0, 3..30),
            noise in proptest::collection::vec(-10.0f64..10.0, 30),
            a in 0.1f64..10.0, b in -50.0f64..50.0,
        ) {
            let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| v * 0.5 + e).collect();
            if let Ok(r) = pearson_r(&x, &y) {
                let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                prop_assert!((pearson_r(&x2, &y).unwrap() - r).abs() < 1e-9);
            }
        }

        #[test]
        fn kappa_reversal_invariant(pairs in proptest::collection::vec((0usize..7, 0usize..7), 2..40)) {
            let labels: Vec<usize> = (0..7).collect();
            let reversed: Vec<usize> = (0..7).rev().collect();
            let (a, b): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let k1 = weighted_quadratic_kappa(&a, &b, &labels);
            let k2 = weighted_quadratic_kappa(&a, &b, &reversed);
            match (k1, k2) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
            if a == b {
                if let Ok(k) = weighted_quadratic_kappa(&a, &b, &labels) {
                    prop_assert!((k - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
