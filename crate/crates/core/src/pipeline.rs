//! Experiment orchestration: batch prediction, (k, λ) grid search and the
//! multi-seed train/decode/rerank/evaluate protocol.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    behavior_tsv, categorize, error_rate_tsv, per_language_error_rates, similarity_comparison_table,
    similarity_tsv, summarize, ErrorItem, LanguageItem,
};
use crate::autodiff::DType;
use crate::corpus::{
    apply_split_file, assemble_reconstruction_input, parse_dataset, split_dataset, CognateSet, Dataset,
    IngestOptions, Split, SplitRatios, Tokenization,
};
use crate::decode::{beam_search, BeamConfig, Candidate, TokenDecoder};
use crate::metrics::{evaluate, FeatureTable, MetricsReport, REPORT_HEADER};
use crate::models::{self, ReconModel, ReconModelConfig, ReflexModel, ReflexModelConfig};
use crate::rerank::{rerank_beam, PredictionCache, RerankConfig, RerankOutcome};
use crate::{Error, Result};

pub const DEFAULT_K_RANGE: [usize; 5] = [2, 4, 6, 8, 10];
pub const DEFAULT_BEAM_SIZE: usize = 5;

/// `λ ∈ {0.3, 0.6, …, 4.2}`.
pub fn default_lambda_range() -> Vec<f64> {
    (1..=14).map(|i| (i as f64 * 0.3 * 1e6).round() / 1e6).collect()
}

/// Map `f` over `items` on up to `workers` threads, keeping input order.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Reconstruction input for each set.
pub fn recon_inputs<R: TokenDecoder + ?Sized>(
    recon: &R,
    sets: &[&CognateSet],
    languages: &[String],
    allow_unk: bool,
) -> Result<Vec<Vec<usize>>> {
    sets.iter()
        .map(|s| assemble_reconstruction_input(s, languages, recon.vocabulary(), allow_unk))
        .collect()
}

/// Beam lists for every set.
pub fn beam_all<R: TokenDecoder + Sync + ?Sized>(
    recon: &R,
    inputs: &[Vec<usize>],
    k: usize,
    alpha: f64,
    workers: usize,
) -> Result<Vec<Vec<Candidate>>> {
    let cfg = BeamConfig { k, alpha, max_len: recon.max_len() };
    parallel_map(inputs, workers, |input| beam_search(recon, input, cfg))
        .into_iter()
        .collect()
}

/// Reranked reconstruction for every set.
#[allow(clippy::too_many_arguments)]
pub fn predict_sets<R, F>(
    recon: &R,
    reflex: &F,
    sets: &[&CognateSet],
    languages: &[String],
    config: RerankConfig,
    allow_unk: bool,
    cache: &PredictionCache,
    workers: usize,
) -> Result<Vec<RerankOutcome>>
where
    R: TokenDecoder + Sync + ?Sized,
    F: TokenDecoder + Sync + ?Sized,
{
    config.validate()?;
    let inputs = recon_inputs(recon, sets, languages, allow_unk)?;
    let beams = beam_all(recon, &inputs, config.k, config.alpha, workers)?;
    let jobs: Vec<(&CognateSet, Vec<Candidate>)> = sets.iter().copied().zip(beams).collect();
    parallel_map(&jobs, workers, |(set, beam)| {
        rerank_beam(recon, reflex, beam.clone(), set, languages, config.lambda, cache)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: usize,
    pub lambda: f64,
    pub acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: GridPoint,
    pub grid: Vec<GridPoint>,
}

/// Reranked top-1 accuracy on `sets` for every `(k, λ)`. The best point
/// maximizes accuracy; ties go to the smaller k, then the smaller λ. Beam
/// search runs once per k and reflex scores are reused across λ.
#[allow(clippy::too_many_arguments)]
pub fn grid_search<R, F>(
    recon: &R,
    reflex: &F,
    sets: &[&CognateSet],
    languages: &[String],
    alpha: f64,
    k_range: &[usize],
    lambda_range: &[f64],
    allow_unk: bool,
    workers: usize,
) -> Result<GridResult>
where
    R: TokenDecoder + Sync + ?Sized,
    F: TokenDecoder + Sync + ?Sized,
{
    if sets.is_empty() {
        return Err(Error::Data("grid search needs a non-empty validation split".into()));
    }
    if k_range.is_empty() || lambda_range.is_empty() {
        return Err(Error::Config("grid search ranges must be non-empty".into()));
    }
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut lambdas = lambda_range.to_vec();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let golds: Vec<&Vec<String>> = sets
        .iter()
        .map(|s| {
            s.protoform
                .as_ref()
                .ok_or_else(|| Error::Data(format!("validation set `{}` has no protoform", s.id)))
        })
        .collect::<Result<_>>()?;
    let cache = PredictionCache::new();
    let mut grid = Vec::with_capacity(ks.len() * lambdas.len());
    let mut best: Option<GridPoint> = None;
    for &k in &ks {
        let outcomes = predict_sets(
            recon,
            reflex,
            sets,
            languages,
            RerankConfig { lambda: 0.0, k, alpha },
            allow_unk,
            &cache,
            workers,
        )?;
        for &lambda in &lambdas {
            let mut hits = 0usize;
            for (o, gold) in outcomes.iter().zip(&golds) {
                let r: Vec<f64> = o.scores.iter().map(|s| s.r).collect();
                let top = &crate::rerank::rerank(&o.beam, &r, lambda)?[0];
                hits += usize::from(recon.vocabulary().decode(&top.ids) == **gold);
            }
            let p = GridPoint { k, lambda, acc: hits as f64 / sets.len() as f64 };
            if best.is_none_or(|b| p.acc > b.acc) {
                best = Some(p);
            }
            grid.push(p);
        }
    }
    Ok(GridResult { best: best.unwrap(), grid })
}

/// Average several grid choices: k is the rounded mean (halves round up),
/// λ the plain mean.
pub fn average_choices(choices: &[(usize, f64)]) -> Result<(usize, f64)> {
    if choices.is_empty() {
        return Err(Error::Data("nothing to average".into()));
    }
    let n = choices.len() as f64;
    let k = choices.iter().map(|c| c.0 as f64).sum::<f64>() / n;
    let lambda = choices.iter().map(|c| c.1).sum::<f64>() / n;
    Ok(((k + 0.5).floor() as usize, lambda))
}

pub fn grid_tsv(result: &GridResult) -> String {
    let mut out = String::from("k\tlambda\tACC%\n");
    for p in &result.grid {
        let _ = writeln!(out, "{}\t{:.4}\t{:.4}", p.k, p.lambda, 100.0 * p.acc);
    }
    let _ = writeln!(
        out,
        "# best\t{}\t{:.4}\t{:.4}",
        result.best.k,
        result.best.lambda,
        100.0 * result.best.acc
    );
    out
}

/// Full experiment description. Its TOML serialization is hashed into
/// every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub split_file: Option<PathBuf>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub codepoint_tokenization: bool,
    pub recon: ReconModelConfig,
    pub reflex: ReflexModelConfig,
    pub seeds: Vec<u64>,
    /// Fixed beam size; grid-searched when absent.
    #[serde(default)]
    pub beam_size: Option<usize>,
    /// Overrides the reconstruction config's α.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Fixed λ; grid-searched when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    pub k_range: Vec<usize>,
    pub lambda_range: Vec<f64>,
    #[serde(default)]
    pub feature_table: Option<PathBuf>,
    #[serde(default)]
    pub allow_unk: bool,
    #[serde(default)]
    pub ablation_no_reranker: bool,
    pub out: PathBuf,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.recon.validate()?;
        self.reflex.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if !self.dataset.exists() {
            return Err(Error::Config(format!("dataset {} does not exist", self.dataset.display())));
        }
        for p in self.split_file.iter().chain(&self.feature_table) {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                return Err(Error::Config(format!("lambda {l} must be >= 0")));
            }
        }
        if self.beam_size == Some(0) {
            return Err(Error::Config("beam size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("experiment config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse a dataset file, then tag it with a split file or a seeded split.
pub fn load_split_dataset(
    path: &Path,
    split_file: Option<&Path>,
    split_seed: u64,
    tokenization: Tokenization,
) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ds = parse_dataset(&text, &IngestOptions { tokenization })?;
    match split_file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            apply_split_file(&ds, &text)
        }
        None => split_dataset(&ds, SplitRatios::default(), split_seed),
    }
}

/// Feature table for FER: the given file (which must cover the data), or
/// the bundled table when it happens to cover every token.
pub fn feature_table_for(path: Option<&Path>, dataset: &Dataset) -> Result<Option<FeatureTable>> {
    // predictions may contain any vocabulary token, so cover them all
    let tokens: Vec<&[String]> = dataset
        .sets
        .iter()
        .flat_map(|s| s.protoform.iter().chain(s.reflexes.values()).map(Vec::as_slice))
        .collect();
    match path {
        Some(p) => {
            let t = FeatureTable::load(p)?;
            let missing = t.missing(tokens.iter().copied());
            if !missing.is_empty() {
                return Err(Error::MissingFeatures(missing));
            }
            Ok(Some(t))
        }
        None => {
            let t = FeatureTable::bundled();
            Ok(t.missing(tokens.iter().copied()).is_empty().then_some(t))
        }
    }
}

fn provenance(hash: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# config_hash={hash} seed={s}\n"),
        None => format!("# config_hash={hash}\n"),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Metrics for plain beam top-1 and reranked top-1 on one seed.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub k: usize,
    pub lambda: f64,
    pub beam: MetricsReport,
    pub reranked: MetricsReport,
}

/// Summary of a multi-seed run.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub results: Vec<SeedResult>,
    /// `(seed, message)` for seeds that failed.
    pub failures: Vec<(u64, String)>,
}

fn predictions_tsv(hash: &str, seed: u64, sets: &[&CognateSet], outcomes: &[RerankOutcome], recon: &ReconModel) -> String {
    let mut out = provenance(hash, Some(seed));
    out.push_str("id\tgold\tbeam_top\treranked_top\n");
    let v = recon.vocabulary();
    for (s, o) in sets.iter().zip(outcomes) {
        let gold = s.protoform.as_ref().map(|p| p.join(" ")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            s.id,
            gold,
            v.render(&o.beam[0].ids),
            v.render(&o.top().ids)
        );
    }
    out
}

fn run_seed(cfg: &ExperimentConfig, hash: &str, dataset: &Dataset, table: Option<&FeatureTable>, seed: u64) -> Result<SeedResult> {
    let dir = cfg.out.join(format!("seed-{seed}"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let vocab = std::sync::Arc::new(crate::corpus::Vocabulary::build(dataset));
    let mut rc = cfg.recon.clone();
    rc.training.seed = seed;
    let mut fc = cfg.reflex.clone();
    fc.training.seed = seed;
    let recon = models::train(ReconModel::new(rc, vocab.clone())?, dataset)?;
    let reflex = models::train(ReflexModel::new(fc, vocab)?, dataset)?;
    for (name, mut ckpt) in [
        ("recon.ckpt", models::to_checkpoint(&recon, DType::F64)),
        ("reflex.ckpt", models::to_checkpoint(&reflex, DType::F64)),
    ] {
        ckpt.meta.push(("config_hash".into(), hash.to_string()));
        ckpt.save(&dir.join(name))?;
    }
    let langs = &dataset.languages;
    let alpha = cfg.alpha.unwrap_or(recon.config.beam_alpha);
    let val = dataset.split(Split::Val);
    let (k, lambda) = if cfg.ablation_no_reranker {
        (cfg.beam_size.unwrap_or(DEFAULT_BEAM_SIZE), 0.0)
    } else if let (Some(k), Some(l)) = (cfg.beam_size, cfg.lambda) {
        (k, l)
    } else {
        let ks = cfg.beam_size.map_or_else(|| cfg.k_range.clone(), |k| vec![k]);
        let ls = cfg.lambda.map_or_else(|| cfg.lambda_range.clone(), |l| vec![l]);
        let g = grid_search(&recon, &reflex, &val, langs, alpha, &ks, &ls, cfg.allow_unk, cfg.workers)?;
        write(&dir.join("grid.tsv"), &(provenance(hash, Some(seed)) + &grid_tsv(&g)))?;
        (g.best.k, g.best.lambda)
    };
    let test = dataset.split(Split::Test);
    let cache = PredictionCache::new();
    let outcomes = predict_sets(
        &recon,
        &reflex,
        &test,
        langs,
        RerankConfig { lambda, k, alpha },
        cfg.allow_unk,
        &cache,
        cfg.workers,
    )?;
    write(&dir.join("predictions.tsv"), &predictions_tsv(hash, seed, &test, &outcomes, &recon))?;
    let v = recon.vocabulary();
    let golds: Vec<Vec<String>> = test
        .iter()
        .map(|s| s.protoform.clone().ok_or_else(|| Error::Data(format!("test set `{}` has no protoform", s.id))))
        .collect::<Result<_>>()?;
    let beam_preds: Vec<Vec<String>> = outcomes.iter().map(|o| v.decode(&o.beam[0].ids)).collect();
    let rerank_preds: Vec<Vec<String>> = outcomes.iter().map(|o| v.decode(&o.top().ids)).collect();
    let beam = evaluate(&beam_preds, &golds, table)?;
    let reranked = evaluate(&rerank_preds, &golds, table)?;
    let mut report = provenance(hash, Some(seed));
    let _ = writeln!(report, "system\tk\tlambda\t{REPORT_HEADER}");
    let _ = writeln!(report, "GRU-BS\t{k}\t-\t{}", beam.tsv_row(false));
    if !cfg.ablation_no_reranker {
        let _ = writeln!(report, "GRU-BS+reranker\t{k}\t{lambda:.4}\t{}", reranked.tsv_row(false));
    }
    write(&dir.join("report.tsv"), &report)?;

    if !cfg.ablation_no_reranker {
        let a = analyze_outcomes(&reflex, &test, &outcomes, langs, table)?;
        let head = provenance(hash, Some(seed));
        write(&dir.join("behavior.tsv"), &(head.clone() + &a.behavior))?;
        if let Some(sim) = &a.similarity {
            write(&dir.join("similarity.tsv"), &(head.clone() + sim))?;
        }
        write(&dir.join("language_errors.tsv"), &(head + &a.language_errors))?;
    }
    Ok(SeedResult { seed, k, lambda, beam, reranked })
}

/// Error-analysis tables for one reranked test run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisTables {
    pub behavior: String,
    /// Absent without a feature table.
    pub similarity: Option<String>,
    pub language_errors: String,
}

/// Behavior counts, similarity comparison and per-language reflex error
/// rates over `sets` and their reranking outcomes.
pub fn analyze_outcomes<F: TokenDecoder + ?Sized>(
    reflex: &F,
    sets: &[&CognateSet],
    outcomes: &[RerankOutcome],
    languages: &[String],
    table: Option<&FeatureTable>,
) -> Result<AnalysisTables> {
    let v = reflex.vocabulary();
    let mut behaviors = Vec::with_capacity(sets.len());
    let mut errors = Vec::new();
    let mut lang_items = Vec::new();
    for (set, o) in sets.iter().zip(outcomes) {
        let gold = set
            .protoform
            .as_ref()
            .ok_or_else(|| Error::Data(format!("set `{}` has no protoform", set.id)))?;
        let beam_list: Vec<Vec<String>> = o.beam.iter().map(|c| v.decode(&c.ids)).collect();
        let rk_list: Vec<Vec<String>> = o.reranked.iter().map(|c| v.decode(&c.ids)).collect();
        let b = categorize(&beam_list, &rk_list, gold)?.behavior;
        behaviors.push(b);
        if rk_list[0] != *gold {
            errors.push(ErrorItem {
                behavior: b,
                pred: rk_list[0].clone(),
                gold: gold.clone(),
                reflexes: set.reflexes_in_order(languages).map(|(_, r)| r.to_vec()).collect(),
            });
            lang_items.push(LanguageItem { behavior: b, set });
        }
    }
    let similarity = match table {
        Some(t) => Some(similarity_tsv(&similarity_comparison_table(&errors, t)?)),
        None => None,
    };
    let rates = per_language_error_rates(reflex, &lang_items, languages)?;
    Ok(AnalysisTables {
        behavior: behavior_tsv(&summarize(&behaviors)),
        similarity,
        language_errors: error_rate_tsv(&rates, languages),
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Per-run metric rows (one per seed) in `ACC% TED TER FER BCFS` order.
pub fn runs_tsv(hash: &str, results: &[SeedResult], reranked: bool) -> String {
    let mut out = provenance(hash, None);
    let _ = writeln!(out, "seed\t{REPORT_HEADER}");
    for r in results {
        let rep = if reranked { &r.reranked } else { &r.beam };
        let _ = writeln!(out, "{}\t{}", r.seed, rep.tsv_row(false));
    }
    out
}

/// Mean and sample standard deviation per metric across seeds.
pub fn aggregate_tsv(hash: &str, results: &[SeedResult], include_reranked: bool) -> String {
    let mut out = provenance(hash, None);
    out.push_str("system\tmetric\tmean\tstd\tn\n");
    let systems: &[(&str, bool)] = if include_reranked {
        &[("GRU-BS", false), ("GRU-BS+reranker", true)]
    } else {
        &[("GRU-BS", false)]
    };
    for &(name, rr) in systems {
        let pick = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Vec<f64> {
            results
                .iter()
                .filter_map(|r| f(if rr { &r.reranked } else { &r.beam }))
                .collect()
        };
        let metrics: [(&str, Vec<f64>); 5] = [
            ("ACC%", pick(&|m| Some(100.0 * m.acc))),
            ("TED", pick(&|m| Some(m.ted))),
            ("TER", pick(&|m| Some(m.ter))),
            ("FER", pick(&|m| m.fer)),
            ("BCFS", pick(&|m| Some(m.bcfs))),
        ];
        for (metric, xs) in metrics {
            if xs.is_empty() {
                let _ = writeln!(out, "{name}\t{metric}\tNA\tNA\t0");
            } else {
                let (m, s) = mean_std(&xs);
                let _ = writeln!(out, "{name}\t{metric}\t{m:.4}\t{s:.4}\t{}", xs.len());
            }
        }
    }
    out
}

/// Train, decode, rerank and evaluate once per seed. A failing seed is
/// logged to `seed-N/error.txt` and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let hash = cfg.hash();
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let tokenization = if cfg.codepoint_tokenization {
        Tokenization::Codepoint
    } else {
        Tokenization::Whitespace
    };
    let dataset = load_split_dataset(&cfg.dataset, cfg.split_file.as_deref(), cfg.split_seed, tokenization)?;
    let table = feature_table_for(cfg.feature_table.as_deref(), &dataset)?;
    write(&cfg.out.join("config.toml"), &(provenance(&hash, None) + &toml::to_string(cfg).unwrap()))?;
    let mut seeds = cfg.seeds.clone();
    seeds.sort_unstable();
    // seeds run in parallel; each seed's own work is single-threaded
    let inner = ExperimentConfig { workers: 1, ..cfg.clone() };
    let runs = parallel_map(&seeds, cfg.workers, |&seed| (seed, run_seed(&inner, &hash, &dataset, table.as_ref(), seed)));
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in runs {
        match r {
            Ok(r) => results.push(r),
            Err(e) => {
                let dir = cfg.out.join(format!("seed-{seed}"));
                let _ = fs::create_dir_all(&dir);
                let msg = e.to_string();
                eprintln!("seed {seed} failed: {msg}");
                write(&dir.join("error.txt"), &(provenance(&hash, Some(seed)) + &msg + "\n"))?;
                failures.push((seed, msg));
            }
        }
    }
    let rr = !cfg.ablation_no_reranker;
    write(&cfg.out.join("runs_beam.tsv"), &runs_tsv(&hash, &results, false))?;
    if rr {
        write(&cfg.out.join("runs_reranked.tsv"), &runs_tsv(&hash, &results, true))?;
    }
    write(&cfg.out.join("aggregate.tsv"), &aggregate_tsv(&hash, &results, rr))?;
    Ok(ExperimentSummary { config_hash: hash, results, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lambda_grid() {
        let l = default_lambda_range();
        assert_eq!(l.len(), 14);
        assert_eq!(l[0], 0.3);
        assert_eq!(l[3], 1.2);
        assert_eq!(l[13], 4.2);
    }

    #[test]
    fn averaging_rounds_k_and_means_lambda() {
        let (k, l) = average_choices(&[(6, 1.2), (7, 1.4)]).unwrap();
        assert_eq!(k, 7);
        assert!((l - 1.3).abs() < 1e-12);
        assert!(average_choices(&[]).is_err());
    }

    #[test]
    fn parallel_map_keeps_order() {
        let xs: Vec<u32> = (0..37).collect();
        let ys = parallel_map(&xs, 4, |x| x * 2);
        assert_eq!(ys, xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
