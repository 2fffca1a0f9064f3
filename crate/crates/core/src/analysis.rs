//! Post hoc analysis of reranking behavior.
//!
//! Items are grouped by how reranking moved the gold protoform, predicted
//! and gold protoforms are compared by their distance to the attested
//! reflexes, and reflex prediction error rates are broken down by daughter
//! language.

use std::collections::BTreeMap;
use std::fmt;

use crate::corpus::CognateSet;
use crate::decode::{greedy_decode_batch, TokenDecoder};
use crate::metrics::{feature_edit_distance, token_edit_distance, FeatureTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Behavior {
    Improved,
    Worsened,
    Unchanged,
    NotIn,
}

impl Behavior {
    pub const ALL: [Behavior; 4] = [Behavior::Improved, Behavior::Worsened, Behavior::Unchanged, Behavior::NotIn];
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Behavior::Improved => "Improved",
            Behavior::Worsened => "Worsened",
            Behavior::Unchanged => "Unchanged",
            Behavior::NotIn => "Not-in",
        })
    }
}

/// Where the gold protoform sat before and after reranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RerankBehavior {
    pub behavior: Behavior,
    pub r_bs: Option<usize>,
    pub r_rk: Option<usize>,
}

/// Locate `gold` in both lists by exact match.
pub fn categorize<T: PartialEq>(beam: &[Vec<T>], reranked: &[Vec<T>], gold: &[T]) -> Result<RerankBehavior> {
    let r_bs = beam.iter().position(|c| c.as_slice() == gold);
    let Some(bs) = r_bs else {
        return Ok(RerankBehavior { behavior: Behavior::NotIn, r_bs: None, r_rk: None });
    };
    let rk = reranked
        .iter()
        .position(|c| c.as_slice() == gold)
        .ok_or_else(|| Error::Contract("reranked list is not a permutation of the beam list".into()))?;
    let behavior = match rk.cmp(&bs) {
        std::cmp::Ordering::Less => Behavior::Improved,
        std::cmp::Ordering::Greater => Behavior::Worsened,
        std::cmp::Ordering::Equal => Behavior::Unchanged,
    };
    Ok(RerankBehavior { behavior, r_bs: Some(bs), r_rk: Some(rk) })
}

/// Category counts and the Improved/(Improved+Worsened) ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorSummary {
    pub counts: BTreeMap<Behavior, usize>,
    pub improved_ratio: Option<f64>,
}

pub fn summarize(behaviors: &[Behavior]) -> BehaviorSummary {
    let mut counts: BTreeMap<Behavior, usize> = Behavior::ALL.iter().map(|&b| (b, 0)).collect();
    for b in behaviors {
        *counts.get_mut(b).unwrap() += 1;
    }
    let (imp, wor) = (counts[&Behavior::Improved], counts[&Behavior::Worsened]);
    BehaviorSummary {
        improved_ratio: (imp + wor > 0).then(|| imp as f64 / (imp + wor) as f64),
        counts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityRecord {
    pub d_t: f64,
    pub d_f: f64,
}

fn strip_tones<'a, S: AsRef<str>>(seq: &'a [S], table: &FeatureTable) -> Vec<&'a str> {
    seq.iter().map(AsRef::as_ref).filter(|t| !table.is_tone(t)).collect()
}

/// Mean max-length-normalized token and feature edit distance from `form`
/// to each reflex, with tone tokens removed first.
pub fn similarity_to_reflexes<S: AsRef<str>>(
    form: &[S],
    reflexes: &[&[S]],
    table: &FeatureTable,
) -> Result<SimilarityRecord> {
    if reflexes.is_empty() {
        return Err(Error::Data("similarity needs at least one reflex".into()));
    }
    let f = strip_tones(form, table);
    let (mut d_t, mut d_f) = (0.0, 0.0);
    for r in reflexes {
        let r = strip_tones(r, table);
        let denom = f.len().max(r.len());
        if denom == 0 {
            continue;
        }
        d_t += token_edit_distance(&f, &r) as f64 / denom as f64;
        d_f += feature_edit_distance(&f, &r, table)? / denom as f64;
    }
    let n = reflexes.len() as f64;
    Ok(SimilarityRecord { d_t: d_t / n, d_f: d_f / n })
}

/// A reconstruction error ready for similarity analysis.
#[derive(Debug, Clone)]
pub struct ErrorItem {
    pub behavior: Behavior,
    pub pred: Vec<String>,
    pub gold: Vec<String>,
    pub reflexes: Vec<Vec<String>>,
}

/// Share of items per category whose prediction is strictly closer to the
/// reflexes than the gold protoform is. `None` marks an empty category.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRow {
    pub behavior: Option<Behavior>,
    pub n: usize,
    pub pct_t: Option<f64>,
    pub pct_f: Option<f64>,
}

pub fn similarity_comparison_table(items: &[ErrorItem], table: &FeatureTable) -> Result<Vec<SimilarityRow>> {
    let mut per: BTreeMap<Option<Behavior>, (usize, usize, usize)> = BTreeMap::new();
    for b in Behavior::ALL {
        per.insert(Some(b), (0, 0, 0));
    }
    per.insert(None, (0, 0, 0));
    for item in items {
        let refl: Vec<&[String]> = item.reflexes.iter().map(Vec::as_slice).collect();
        let p = similarity_to_reflexes(&item.pred, &refl, table)?;
        let g = similarity_to_reflexes(&item.gold, &refl, table)?;
        for key in [Some(item.behavior), None] {
            let e = per.get_mut(&key).unwrap();
            e.0 += 1;
            e.1 += usize::from(p.d_t < g.d_t);
            e.2 += usize::from(p.d_f < g.d_f);
        }
    }
    if items.is_empty() {
        return Ok(Vec::new());
    }
    Ok(Behavior::ALL
        .iter()
        .map(|&b| Some(b))
        .chain([None])
        .map(|key| {
            let (n, t, f) = per[&key];
            let pct = |c: usize| (n > 0).then(|| 100.0 * c as f64 / n as f64);
            SimilarityRow { behavior: key, n, pct_t: pct(t), pct_f: pct(f) }
        })
        .collect())
}

/// An item for per-language error analysis.
#[derive(Debug, Clone)]
pub struct LanguageItem<'a> {
    pub behavior: Behavior,
    pub set: &'a CognateSet,
}

/// Error rate per language, per behavior group, plus an overall row
/// (`None` key). Languages never present are omitted.
pub type ErrorRateTable = BTreeMap<Option<Behavior>, BTreeMap<String, f64>>;

/// Decode every present reflex from the gold protoform and count misses.
pub fn per_language_error_rates<F: TokenDecoder + ?Sized>(
    reflex: &F,
    items: &[LanguageItem<'_>],
    languages: &[String],
) -> Result<ErrorRateTable> {
    let vocab = reflex.vocabulary();
    let mut inputs = Vec::new();
    let mut meta = Vec::new();
    for item in items {
        let proto = item
            .set
            .protoform
            .as_ref()
            .ok_or_else(|| Error::Data(format!("set `{}` has no gold protoform", item.set.id)))?;
        for (lang, gold) in item.set.reflexes_in_order(languages) {
            inputs.push(crate::corpus::assemble_reflex_input(proto, lang, vocab, true)?);
            meta.push((item.behavior, lang.to_string(), gold.to_vec()));
        }
    }
    let refs: Vec<&[usize]> = inputs.iter().map(Vec::as_slice).collect();
    let preds = greedy_decode_batch(reflex, &refs, reflex.max_len())?;
    let mut counts: BTreeMap<Option<Behavior>, BTreeMap<String, (usize, usize)>> = BTreeMap::new();
    for ((behavior, lang, gold), pred) in meta.into_iter().zip(preds) {
        let wrong = usize::from(vocab.decode(&pred) != gold);
        for key in [Some(behavior), None] {
            let e = counts.entry(key).or_default().entry(lang.clone()).or_default();
            e.0 += wrong;
            e.1 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(k, langs)| {
            (
                k,
                langs.into_iter().map(|(l, (w, n))| (l, w as f64 / n as f64)).collect(),
            )
        })
        .collect())
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.decimals$}"))
}

fn group_name(b: Option<Behavior>) -> String {
    b.map_or_else(|| "All".to_string(), |b| b.to_string())
}

/// Category counts in one row, ending with the Improved/Changed ratio.
pub fn behavior_tsv(summary: &BehaviorSummary) -> String {
    let mut out = String::from("Improved\tWorsened\tUnchanged\tNot-in\tImproved/Changed\n");
    let c = &summary.counts;
    out.push_str(&format!(
        "{}\t{}\t{}\t{}\t{}\n",
        c[&Behavior::Improved],
        c[&Behavior::Worsened],
        c[&Behavior::Unchanged],
        c[&Behavior::NotIn],
        opt(summary.improved_ratio.map(|r| 100.0 * r), 2)
    ));
    out
}

pub fn similarity_tsv(rows: &[SimilarityRow]) -> String {
    let mut out = String::from("category\tn\tD_T%\tD_F%\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            group_name(r.behavior),
            r.n,
            opt(r.pct_t, 2),
            opt(r.pct_f, 2)
        ));
    }
    out
}

/// One row per group, one column per language in `languages` order that
/// occurs anywhere in the table.
pub fn error_rate_tsv(table: &ErrorRateTable, languages: &[String]) -> String {
    let cols: Vec<&String> = languages
        .iter()
        .filter(|l| table.values().any(|m| m.contains_key(*l)))
        .collect();
    let mut out = String::from("category");
    for l in &cols {
        out.push('\t');
        out.push_str(l);
    }
    out.push('\n');
    let keys = Behavior::ALL.iter().map(|&b| Some(b)).chain([None]);
    for key in keys {
        let Some(row) = table.get(&key) else { continue };
        out.push_str(&group_name(key));
        for l in &cols {
            out.push('\t');
            out.push_str(&opt(row.get(*l).map(|r| 100.0 * r), 2));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn worked_example_is_improved() {
        let beam = vec![t("p j e t 入"), t("p e t 入"), t("p i t 入"), t("p e p 入"), t("p j 去")];
        let reranked = vec![t("p i t 入"), t("p j e t 入"), t("p e t 入"), t("p e p 入"), t("p j 去")];
        let b = categorize(&beam, &reranked, &t("p i t 入")).unwrap();
        assert_eq!(b, RerankBehavior { behavior: Behavior::Improved, r_bs: Some(2), r_rk: Some(0) });
        let b = categorize(&beam, &reranked, &t("k i t 入")).unwrap();
        assert_eq!(b.behavior, Behavior::NotIn);
        assert_eq!(categorize(&beam, &reranked, &t("p j e t 入")).unwrap().behavior, Behavior::Worsened);
        assert_eq!(categorize(&beam, &beam, &t("p e t 入")).unwrap().behavior, Behavior::Unchanged);
    }

    #[test]
    fn summary_ratio() {
        let s = summarize(&[Behavior::Improved, Behavior::Improved, Behavior::Worsened, Behavior::NotIn]);
        assert_eq!(s.counts[&Behavior::Unchanged], 0);
        assert!((s.improved_ratio.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(summarize(&[Behavior::NotIn]).improved_ratio, None);
    }

    #[test]
    fn similarity_identity_and_tones() {
        let table = FeatureTable::bundled();
        let form = t("p i t");
        let s = similarity_to_reflexes(&form, &[form.as_slice()], &table).unwrap();
        assert_eq!(s, SimilarityRecord { d_t: 0.0, d_f: 0.0 });
        let a = t("p i t ˥");
        let b = t("p i t ˩");
        let s = similarity_to_reflexes(&a, &[b.as_slice()], &table).unwrap();
        assert_eq!(s, SimilarityRecord { d_t: 0.0, d_f: 0.0 });
    }

    #[test]
    fn similarity_table_single_error() {
        let table = FeatureTable::bundled();
        let items = vec![ErrorItem {
            behavior: Behavior::Worsened,
            pred: t("p a"),
            gold: t("k o"),
            reflexes: vec![t("p a"), t("p e")],
        }];
        let rows = similarity_comparison_table(&items, &table).unwrap();
        let w = rows.iter().find(|r| r.behavior == Some(Behavior::Worsened)).unwrap();
        assert_eq!((w.n, w.pct_t, w.pct_f), (1, Some(100.0), Some(100.0)));
        let i = rows.iter().find(|r| r.behavior == Some(Behavior::Improved)).unwrap();
        assert_eq!((i.n, i.pct_t), (0, None));
        assert!(similarity_comparison_table(&[], &table).unwrap().is_empty());
    }
}
