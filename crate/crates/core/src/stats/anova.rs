//! Two-way factorial ANOVA with Type II sums of squares, computed by
//! comparing nested least-squares fits.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::dist::f_sf;
use super::rows::ParticipantRow;
use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaEffect {
    pub name: String,
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
    pub f: f64,
    pub p: f64,
}

impl AnovaEffect {
    /// `(F = 6.85, p < .001)` style summary.
    pub fn report(&self) -> String {
        format!("(F = {:.2}, {})", self.f, format_p(self.p))
    }
}

/// `p < .001`, or the value to three places without the leading zero.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "p < .001".to_string()
    } else {
        let text = format!("{p:.3}");
        format!("p = {}", text.strip_prefix('0').unwrap_or(&text))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTable {
    pub factor_a: String,
    pub factor_b: String,
    /// A, B and A×B, in that order.
    pub effects: Vec<AnovaEffect>,
    pub residual_ss: f64,
    pub residual_df: usize,
    pub residual_ms: f64,
    pub total_ss: f64,
    pub n: usize,
    /// Set when the residual mean square is zero or has no degrees of freedom.
    pub degenerate: bool,
}

impl AnovaTable {
    pub fn effect(&self, name: &str) -> Option<&AnovaEffect> {
        self.effects.iter().find(|e| e.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("effect,ss,df,ms,f,p\n");
        for e in &self.effects {
            out.push_str(&format!("{},{},{},{},{},{}\n", e.name, e.ss, e.df, e.ms, e.f, e.p));
        }
        out.push_str(&format!("Residual,{},{},{},,\n", self.residual_ss, self.residual_df, self.residual_ms));
        out
    }
}

impl fmt::Display for AnovaTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "| Effect | SS | df | MS | F | p |")?;
        writeln!(f, "|---|---:|---:|---:|---:|---:|")?;
        for e in &self.effects {
            writeln!(f, "| {} | {:.2} | {} | {:.2} | {:.2} | {:.4} |", e.name, e.ss, e.df, e.ms, e.f, e.p)?;
        }
        writeln!(f, "| Residual | {:.2} | {} | {:.2} | | |", self.residual_ss, self.residual_df, self.residual_ms)?;
        writeln!(f)?;
        for e in &self.effects {
            writeln!(f, "- {}: {}", e.name, e.report())?;
        }
        if self.degenerate {
            writeln!(f, "- degenerate design: residual mean square is zero or undefined")?;
        }
        Ok(())
    }
}

fn levels(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Residual sum of squares of the least-squares fit of `y` on `x`.
fn rss(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64, StatsError> {
    let svd = x.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max().max(1.0);
    if svd.rank(tol) < x.ncols() {
        return Err(StatsError::SingularDesign);
    }
    let beta = svd.solve(y, tol).map_err(|_| StatsError::SingularDesign)?;
    Ok((y - x * beta).norm_squared())
}

/// ANOVA of `y` on two categorical factors given as per-observation labels.
pub fn two_way_anova_labels(y: &[f64], a: &[&str], b: &[&str], names: (&str, &str)) -> Result<AnovaTable, StatsError> {
    let n = y.len();
    if a.len() != n || b.len() != n {
        return Err(StatsError::LengthMismatch);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (la, lb) = (levels(a), levels(b));
    for x in &la {
        for z in &lb {
            if !a.iter().zip(b).any(|(p, q)| p == x && q == z) {
                return Err(StatsError::EmptyCell(format!("{}={x}, {}={z}", names.0, names.1)));
            }
        }
    }
    let ia: Vec<usize> = a.iter().map(|s| la.iter().position(|l| l == s).unwrap()).collect();
    let ib: Vec<usize> = b.iter().map(|s| lb.iter().position(|l| l == s).unwrap()).collect();
    let (ka, kb) = (la.len(), lb.len());

    // Treatment (dummy) coding with the first level of each factor as baseline.
    let design = |with_a: bool, with_b: bool, with_ab: bool| {
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
        if with_a {
            cols.extend((1..ka).map(|l| ia.iter().map(|&i| f64::from(u8::from(i == l))).collect()));
        }
        if with_b {
            cols.extend((1..kb).map(|l| ib.iter().map(|&i| f64::from(u8::from(i == l))).collect()));
        }
        if with_ab {
            for p in 1..ka {
                for q in 1..kb {
                    cols.push((0..n).map(|r| f64::from(u8::from(ia[r] == p && ib[r] == q))).collect());
                }
            }
        }
        DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r])
    };
    let yv = DVector::from_column_slice(y);
    let rss_a = rss(&design(true, false, false), &yv)?;
    let rss_b = rss(&design(false, true, false), &yv)?;
    let rss_ab = rss(&design(true, true, false), &yv)?;
    let rss_full = rss(&design(true, true, true), &yv)?;

    let mean = y.iter().sum::<f64>() / n as f64;
    let total_ss = y.iter().map(|v| (v - mean).powi(2)).sum();
    let residual_df = n.saturating_sub(ka * kb);
    let residual_ms = if residual_df > 0 { rss_full / residual_df as f64 } else { f64::NAN };
    let degenerate = residual_df == 0 || !residual_ms.is_finite() || residual_ms <= 1e-12 * (1.0 + total_ss);

    let effect = |name: String, ss: f64, df: usize| {
        let ss = ss.max(0.0);
        let ms = if df > 0 { ss / df as f64 } else { 0.0 };
        let (f, p) = if !degenerate {
            let f = ms / residual_ms;
            (f, f_sf(f, df as f64, residual_df as f64))
        } else if ss <= 1e-12 * (1.0 + total_ss) {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        };
        AnovaEffect { name, ss, df, ms, f, p }
    };
    let (na, nb) = names;
    Ok(AnovaTable {
        factor_a: na.to_string(),
        factor_b: nb.to_string(),
        effects: vec![
            effect(na.to_string(), rss_b - rss_ab, ka - 1),
            effect(nb.to_string(), rss_a - rss_ab, kb - 1),
            effect(format!("{na} x {nb}"), rss_ab - rss_full, (ka - 1) * (kb - 1)),
        ],
        residual_ss: rss_full,
        residual_df,
        residual_ms,
        total_ss,
        n,
        degenerate,
    })
}

/// Demographic × treatment ANOVA of total score.
pub fn two_way_anova(rows: &[ParticipantRow]) -> Result<AnovaTable, StatsError> {
    let y: Vec<f64> = rows.iter().map(|r| r.total_score as f64).collect();
    let a: Vec<&str> = rows.iter().map(|r| r.demographic.as_str()).collect();
    let b: Vec<&str> = rows.iter().map(|r| r.treatment.as_str()).collect();
    two_way_anova_labels(&y, &a, &b, ("Demographic", "Treatment"))
}
