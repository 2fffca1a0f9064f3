//! Reconstruction metrics: accuracy, token edit distance (TED), token error
//! rate (TER), feature error rate (FER) and B-Cubed F score (BCFS).
//!
//! FER uses a weighted Levenshtein distance: insertions and deletions cost
//! 1, a substitution costs the fraction of articulatory features on which
//! the two segments differ. Corpus TER and FER pool edit distance over
//! total gold length; per-item means are reported alongside.

mod bcubed;
mod edit;
mod features;

pub use bcubed::bcubed_f;
pub use edit::{align, token_edit_distance, weighted_edit_distance, Column};
pub use features::FeatureTable;

use crate::{Error, Result};

/// `TED(pred, gold) / |gold|`.
pub fn ter<T: PartialEq>(pred: &[T], gold: &[T]) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::Data("TER is undefined for an empty gold sequence".into()));
    }
    Ok(token_edit_distance(pred, gold) as f64 / gold.len() as f64)
}

/// Pooled TER over a corpus: `Σ TED / Σ |gold|`.
pub fn corpus_ter<T: PartialEq>(preds: &[Vec<T>], golds: &[Vec<T>]) -> Result<f64> {
    check_lengths(preds.len(), golds.len())?;
    let total: usize = golds.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Data("TER is undefined for empty gold sequences".into()));
    }
    let ted: usize = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| token_edit_distance(p, g))
        .sum();
    Ok(ted as f64 / total as f64)
}

pub fn accuracy<T: PartialEq>(preds: &[Vec<T>], golds: &[Vec<T>]) -> Result<f64> {
    check_lengths(preds.len(), golds.len())?;
    if preds.is_empty() {
        return Err(Error::Data("accuracy over an empty prediction set".into()));
    }
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Data(format!("{a} predictions for {b} gold items")));
    }
    Ok(())
}

/// Feature-weighted edit distance. Errors list every token the table lacks.
pub fn feature_edit_distance<S: AsRef<str>>(a: &[S], b: &[S], table: &FeatureTable) -> Result<f64> {
    let missing = table.missing([a, b]);
    if !missing.is_empty() {
        return Err(Error::MissingFeatures(missing));
    }
    Ok(weighted_edit_distance(a, b, |x, y| {
        table
            .substitution_cost(x.as_ref(), y.as_ref())
            .expect("checked above")
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemMetrics {
    pub correct: bool,
    pub ted: usize,
    pub gold_len: usize,
    pub feature_distance: Option<f64>,
    pub bcfs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n: usize,
    pub acc: f64,
    /// Mean TED per item.
    pub ted: f64,
    pub ter: f64,
    pub fer: Option<f64>,
    pub ter_item_mean: f64,
    pub fer_item_mean: Option<f64>,
    pub bcfs: f64,
    pub items: Vec<ItemMetrics>,
}

pub const REPORT_HEADER: &str = "ACC%\tTED\tTER\tFER\tBCFS";

impl MetricsReport {
    /// One TSV row in `ACC% TED TER FER BCFS` order at 4 decimals. FER is
    /// `NA` when no feature table was supplied.
    pub fn tsv_row(&self, per_item_mean: bool) -> String {
        let (ter, fer) = if per_item_mean {
            (self.ter_item_mean, self.fer_item_mean)
        } else {
            (self.ter, self.fer)
        };
        let fer = fer.map_or_else(|| "NA".to_string(), |f| format!("{f:.4}"));
        format!(
            "{:.4}\t{:.4}\t{:.4}\t{}\t{:.4}",
            self.acc * 100.0,
            self.ted,
            ter,
            fer,
            self.bcfs
        )
    }
}

/// All metrics over aligned prediction and gold lists.
pub fn evaluate<S: AsRef<str> + PartialEq + Eq + std::hash::Hash>(
    preds: &[Vec<S>],
    golds: &[Vec<S>],
    table: Option<&FeatureTable>,
) -> Result<MetricsReport> {
    check_lengths(preds.len(), golds.len())?;
    if preds.is_empty() {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    if let Some(bad) = golds.iter().position(Vec::is_empty) {
        return Err(Error::Data(format!("gold item {bad} is empty")));
    }
    if let Some(table) = table {
        let missing = table.missing(preds.iter().chain(golds).map(Vec::as_slice));
        if !missing.is_empty() {
            return Err(Error::MissingFeatures(missing));
        }
    }
    let mut items = Vec::with_capacity(preds.len());
    for (p, g) in preds.iter().zip(golds) {
        items.push(ItemMetrics {
            correct: p == g,
            ted: token_edit_distance(p, g),
            gold_len: g.len(),
            feature_distance: table.map(|t| feature_edit_distance(p, g, t)).transpose()?,
            bcfs: bcubed_f(p, g),
        });
    }
    let n = items.len() as f64;
    let gold_total: usize = items.iter().map(|i| i.gold_len).sum();
    let ted_total: usize = items.iter().map(|i| i.ted).sum();
    let fer = table.map(|_| {
        items
            .iter()
            .map(|i| i.feature_distance.unwrap())
            .sum::<f64>()
            / gold_total as f64
    });
    let fer_item_mean = table.map(|_| {
        items
            .iter()
            .map(|i| i.feature_distance.unwrap() / i.gold_len as f64)
            .sum::<f64>()
            / n
    });
    Ok(MetricsReport {
        n: items.len(),
        acc: items.iter().filter(|i| i.correct).count() as f64 / n,
        ted: ted_total as f64 / n,
        ter: ted_total as f64 / gold_total as f64,
        fer,
        ter_item_mean: items
            .iter()
            .map(|i| i.ted as f64 / i.gold_len as f64)
            .sum::<f64>()
            / n,
        fer_item_mean,
        bcfs: items.iter().map(|i| i.bcfs).sum::<f64>() / n,
        items,
    })
}
