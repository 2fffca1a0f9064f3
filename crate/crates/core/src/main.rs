// `!(x >= 0.0)` rejects NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use protorecon::autodiff::DType;
use protorecon::corpus::synthetic::{generate, SyntheticConfig};
use protorecon::corpus::{
    parse_dataset, serialize_split_file, split_dataset, CognateSet, Dataset, IngestOptions, Split, SplitRatios,
    Tokenization, Vocabulary,
};
use protorecon::decode::TokenDecoder;
use protorecon::metrics::{evaluate, FeatureTable, REPORT_HEADER};
use protorecon::models::{
    self, load_checkpoint, parse_config, preset_names, recon_preset, reflex_preset, save_checkpoint, ReconModel,
    ReconModelConfig, ReflexModel, ReflexModelConfig, SequenceModel,
};
use protorecon::pipeline::{
    analyze_outcomes, beam_all, default_lambda_range, feature_table_for, grid_search, grid_tsv,
    load_split_dataset, predict_sets, recon_inputs, run_experiment, ExperimentConfig, DEFAULT_BEAM_SIZE,
    DEFAULT_K_RANGE,
};
use protorecon::rerank::{PredictionCache, RerankConfig};
use protorecon::stats::{compare, pearson_correlation, significant, Alternative, DEFAULT_RESAMPLES};
use protorecon::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "protorecon", version, about = "Protoform reconstruction with reflex-prediction reranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a cognate table and print its inventory.
    Ingest {
        #[command(flatten)]
        data: DatasetArgs,
        /// Write the normalized table (with ids) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded train/val/test split file.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        codepoint: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// train,val,test proportions.
        #[arg(long, default_value = "0.7,0.1,0.2")]
        ratios: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the reconstruction model.
    TrainRecon(TrainArgs),
    /// Train the reflex-prediction model.
    TrainReflex(TrainArgs),
    /// Beam-search candidates for every set of a split.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        select: SplitSelect,
        #[arg(long, default_value_t = DEFAULT_BEAM_SIZE)]
        beam_size: usize,
        /// Defaults to the model's configured value.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        allow_unk: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Rerank beam candidates by reflex prediction accuracy.
    Rerank {
        #[command(flatten)]
        models: ModelPair,
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        select: SplitSelect,
        #[arg(long, default_value_t = DEFAULT_BEAM_SIZE)]
        beam_size: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        allow_unk: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Score a prediction file: one row of ACC% TED TER FER BCFS.
    Eval {
        /// TSV with an `id` column and a prediction column.
        #[arg(long)]
        pred: PathBuf,
        /// Prediction column; defaults to `prediction`, else the last column.
        #[arg(long)]
        column: Option<String>,
        /// Gold protoforms by id; otherwise the file's `gold` column.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        codepoint: bool,
        #[arg(long)]
        feature_table: Option<PathBuf>,
        /// Average TER and FER per item instead of pooling.
        #[arg(long)]
        per_item_mean: bool,
    },
    /// Grid search (k, λ) for reranked accuracy.
    Gridsearch {
        #[command(flatten)]
        models: ModelPair,
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        alpha: Option<f64>,
        /// Comma list or start:stop:step.
        #[arg(long)]
        k_range: Option<String>,
        #[arg(long)]
        lambda_range: Option<String>,
        #[arg(long)]
        allow_unk: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Significance of per-run metric differences between two systems.
    Compare {
        /// Per-run metric TSV of the first system.
        a: PathBuf,
        b: PathBuf,
        /// Overrides the per-metric default direction.
        #[arg(long)]
        alternative: Option<String>,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, default_value_t = 0.99)]
        level: f64,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pearson correlation between two numeric columns.
    Correlate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Reranking error analysis tables.
    Analyze {
        #[command(flatten)]
        models: ModelPair,
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        select: SplitSelect,
        #[arg(long, default_value_t = DEFAULT_BEAM_SIZE)]
        beam_size: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        feature_table: Option<PathBuf>,
        #[arg(long)]
        allow_unk: bool,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full multi-seed experiment.
    Run(RunArgs),
    /// Generate a synthetic language family.
    Synth {
        #[arg(long, default_value_t = 2000)]
        sets: usize,
        #[arg(long, default_value_t = 4)]
        daughters: usize,
        #[arg(long, default_value_t = 0.1)]
        missing_rate: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List bundled hyperparameter presets.
    Presets,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Two-column id/split TSV; otherwise a seeded 70/10/20 split.
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// One token per code point.
    #[arg(long)]
    codepoint: bool,
}

impl DatasetArgs {
    fn load(&self) -> Result<Dataset> {
        load_split_dataset(&self.dataset, self.split_file.as_deref(), self.split_seed, tokenization(self.codepoint))
    }
}

#[derive(Args, Debug)]
struct SplitSelect {
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args, Debug)]
struct ModelPair {
    #[arg(long)]
    recon: PathBuf,
    #[arg(long)]
    reflex: PathBuf,
}

impl ModelPair {
    fn load(&self) -> Result<(ReconModel, ReflexModel)> {
        let recon: ReconModel = load_checkpoint(&self.recon, None)?;
        let reflex: ReflexModel = load_checkpoint(&self.reflex, Some(&recon.vocabulary().hash()))?;
        Ok((recon, reflex))
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Preset name; the family part alone (e.g. `synthetic`) also works.
    #[arg(long)]
    preset: Option<String>,
    /// TOML model config; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Ablation {
    NoReranker,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment TOML; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    codepoint: bool,
    /// Preset family for both models, e.g. `synthetic`.
    #[arg(long)]
    preset: Option<String>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    beam_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long)]
    k_range: Option<String>,
    #[arg(long)]
    lambda_range: Option<String>,
    #[arg(long)]
    feature_table: Option<PathBuf>,
    #[arg(long)]
    allow_unk: bool,
    #[arg(long, value_enum)]
    ablation: Option<Ablation>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn tokenization(codepoint: bool) -> Tokenization {
    if codepoint {
        Tokenization::Codepoint
    } else {
        Tokenization::Whitespace
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.into(), source })
}

fn sets_for<'a>(ds: &'a Dataset, split: &str) -> Result<Vec<&'a CognateSet>> {
    if split == "all" {
        return Ok(ds.sets.iter().collect());
    }
    Ok(ds.split(split.parse::<Split>()?))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad {what} value `{p}`")))
        })
        .collect()
}

/// `a,b,c` or `start:stop:step` (inclusive).
fn parse_range(text: &str, what: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 1 {
        return parse_list(text, what);
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad {what} range `{text}`"))))
        .collect::<Result<_>>()?;
    let [start, stop, step] = nums[..] else {
        return Err(Error::Config(format!("{what} range `{text}` needs start:stop:step")));
    };
    if !(step > 0.0) || stop < start {
        return Err(Error::Config(format!("{what} range `{text}` is empty")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e6).round() / 1e6).collect())
}

fn parse_k_range(text: &str) -> Result<Vec<usize>> {
    parse_range(text, "k")?
        .into_iter()
        .map(|k| {
            if k >= 1.0 && k.fract() == 0.0 {
                Ok(k as usize)
            } else {
                Err(Error::Config(format!("beam size {k} must be a positive integer")))
            }
        })
        .collect()
}

fn preset_pair(family: &str) -> Result<(ReconModelConfig, ReflexModelConfig)> {
    let family = family.rsplit('/').next().unwrap_or(family);
    Ok((recon_preset(&format!("gru-bs/{family}"))?, reflex_preset(&format!("gru-reflex/{family}"))?))
}

/// Simple TSV table: `#` lines and blank lines are skipped, the first
/// remaining line is the header.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let text = read(path)?;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::Schema { line: 1, message: "missing header".into() })?;
        let header: Vec<String> = header.split('\t').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, l) in lines {
            let row: Vec<String> = l.split('\t').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(Error::Schema {
                    line: i + 1,
                    message: format!("expected {} cells, found {}", header.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("no column `{name}`")))
    }

    fn numbers(&self, col: usize) -> Result<Vec<Option<f64>>> {
        self.rows
            .iter()
            .map(|r| match r[col].as_str() {
                "NA" | "" => Ok(None),
                v => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Data(format!("`{v}` in column `{}` is not a number", self.header[col]))),
            })
            .collect()
    }
}

fn tokens(cell: &str, mode: Tokenization) -> Vec<String> {
    match mode {
        Tokenization::Whitespace => cell.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
        Tokenization::Codepoint => cell.chars().filter(|c| !c.is_whitespace()).map(String::from).collect(),
    }
}

fn cmd_ingest(data: &DatasetArgs, out: Option<&Path>) -> Result<String> {
    let ds = parse_dataset(&read(&data.dataset)?, &IngestOptions { tokenization: tokenization(data.codepoint) })?;
    let vocab = Vocabulary::build(&ds);
    if let Some(out) = out {
        write(out, &ds.to_tsv())?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "sets\t{}", ds.len());
    let _ = writeln!(s, "with_protoform\t{}", ds.sets.iter().filter(|x| x.protoform.is_some()).count());
    let _ = writeln!(s, "languages\t{}", ds.languages.join(","));
    let _ = writeln!(s, "phonemes\t{}", vocab.phonemes().len());
    let _ = writeln!(s, "vocab_size\t{}", vocab.len());
    let _ = writeln!(s, "vocab_hash\t{}", vocab.hash());
    Ok(s)
}

fn cmd_split(dataset: &Path, codepoint: bool, seed: u64, ratios: &str, out: Option<&Path>) -> Result<String> {
    let ds = parse_dataset(&read(dataset)?, &IngestOptions { tokenization: tokenization(codepoint) })?;
    let r: Vec<f64> = parse_list(ratios, "ratio")?;
    let [train, val, test] = r[..] else {
        return Err(Error::Config("ratios need three values".into()));
    };
    let tagged = split_dataset(&ds, SplitRatios { train, val, test }, seed)?;
    let text = serialize_split_file(&tagged);
    match out {
        Some(p) => write(p, &text).map(|_| String::new()),
        None => Ok(text),
    }
}

fn train_model<M: SequenceModel>(model: M, data: &Dataset, out: &Path) -> Result<String> {
    let trained = models::train(model, data)?;
    save_checkpoint(&trained, out, DType::F64)?;
    let h = trained.history();
    let mut s = String::from("epoch\tloss\tval_ted\n");
    for (e, l) in h.epoch_loss.iter().enumerate() {
        let v = h.validation.iter().find(|(ve, _)| *ve == e).map(|(_, t)| format!("{t:.4}"));
        let _ = writeln!(s, "{e}\t{l:.6}\t{}", v.unwrap_or_else(|| "-".into()));
    }
    Ok(s)
}

fn cmd_train(args: &TrainArgs, recon: bool) -> Result<String> {
    let ds = args.data.load()?;
    let vocab = Arc::new(Vocabulary::build(&ds));
    let preset = args.preset.as_deref().unwrap_or("synthetic");
    let preset = preset.rsplit('/').next().unwrap_or(preset);
    if recon {
        let mut cfg: ReconModelConfig = match &args.config {
            Some(p) => parse_config(&read(p)?)?,
            None => recon_preset(&format!("gru-bs/{preset}"))?,
        };
        cfg.training.seed = args.seed;
        if let Some(e) = args.max_epochs {
            cfg.training.max_epochs = e;
        }
        train_model(ReconModel::new(cfg, vocab)?, &ds, &args.out)
    } else {
        let mut cfg: ReflexModelConfig = match &args.config {
            Some(p) => parse_config(&read(p)?)?,
            None => reflex_preset(&format!("gru-reflex/{preset}"))?,
        };
        cfg.training.seed = args.seed;
        if let Some(e) = args.max_epochs {
            cfg.training.max_epochs = e;
        }
        train_model(ReflexModel::new(cfg, vocab)?, &ds, &args.out)
    }
}

fn cmd_decode(model: &Path, data: &DatasetArgs, split: &str, k: usize, alpha: Option<f64>, allow_unk: bool, workers: usize) -> Result<String> {
    let recon: ReconModel = load_checkpoint(model, None)?;
    let ds = data.load()?;
    let sets = sets_for(&ds, split)?;
    let inputs = recon_inputs(&recon, &sets, &ds.languages, allow_unk)?;
    let alpha = alpha.unwrap_or(recon.config.beam_alpha);
    let beams = beam_all(&recon, &inputs, k, alpha, workers)?;
    let v = recon.vocabulary();
    let mut s = String::from("id\trank\ttokens\tm\n");
    for (set, beam) in sets.iter().zip(&beams) {
        for (i, c) in beam.iter().enumerate() {
            let _ = writeln!(s, "{}\t{i}\t{}\t{:.6}", set.id, v.render(&c.ids), c.m);
        }
    }
    Ok(s)
}

#[allow(clippy::too_many_arguments)]
fn cmd_rerank(pair: &ModelPair, data: &DatasetArgs, split: &str, k: usize, alpha: Option<f64>, lambda: f64, allow_unk: bool, workers: usize) -> Result<String> {
    let (recon, reflex) = pair.load()?;
    let ds = data.load()?;
    let sets = sets_for(&ds, split)?;
    let alpha = alpha.unwrap_or(recon.config.beam_alpha);
    let cache = PredictionCache::new();
    let outcomes = predict_sets(&recon, &reflex, &sets, &ds.languages, RerankConfig { lambda, k, alpha }, allow_unk, &cache, workers)?;
    let v = recon.vocabulary();
    let mut s = String::from("id\tbeam_rank\tcandidate\tm");
    for l in &ds.languages {
        let _ = write!(s, "\t{l}");
    }
    s.push_str("\tr\trerank_rank\ts\n");
    for (set, o) in sets.iter().zip(&outcomes) {
        for (c, score) in o.beam.iter().zip(&o.scores) {
            if let Some(w) = &score.warning {
                eprintln!("warning: {w}");
            }
            let _ = write!(s, "{}\t", set.id);
            let rr = o.reranked.iter().find(|x| x.ids == c.ids).expect("reranked is a permutation");
            let _ = write!(s, "{}\t{}\t{:.6}", rr.beam_rank, v.render(&c.ids), c.m);
            for l in &ds.languages {
                let cell = match score.predictions.iter().find(|(pl, _)| pl == l) {
                    None => "-".to_string(),
                    Some((_, None)) => "NA".to_string(),
                    Some((_, Some(p))) => p.join(" "),
                };
                let _ = write!(s, "\t{cell}");
            }
            let _ = writeln!(s, "\t{:.4}\t{}\t{:.6}", rr.r, rr.rerank_rank, rr.s);
        }
    }
    Ok(s)
}

fn cmd_eval(
    pred: &Path,
    column: Option<&str>,
    dataset: Option<&Path>,
    codepoint: bool,
    feature_table: Option<&Path>,
    per_item_mean: bool,
) -> Result<String> {
    let mode = tokenization(codepoint);
    let t = Table::read(pred)?;
    let id_col = t.column("id")?;
    let pred_col = match column {
        Some(c) => t.column(c)?,
        None => t.column("prediction").unwrap_or(t.header.len() - 1),
    };
    let preds: Vec<Vec<String>> = t.rows.iter().map(|r| tokens(&r[pred_col], mode)).collect();
    let golds: Vec<Vec<String>> = match dataset {
        Some(p) => {
            let ds = parse_dataset(&read(p)?, &IngestOptions { tokenization: mode })?;
            t.rows
                .iter()
                .map(|r| {
                    ds.sets
                        .iter()
                        .find(|s| s.id == r[id_col])
                        .and_then(|s| s.protoform.clone())
                        .ok_or_else(|| Error::Data(format!("no gold protoform for `{}`", r[id_col])))
                })
                .collect::<Result<_>>()?
        }
        None => {
            let g = t.column("gold")?;
            t.rows.iter().map(|r| tokens(&r[g], mode)).collect()
        }
    };
    let table = match feature_table {
        Some(p) => Some(FeatureTable::load(p)?),
        None => {
            let b = FeatureTable::bundled();
            b.missing(preds.iter().chain(&golds).map(Vec::as_slice)).is_empty().then_some(b)
        }
    };
    let report = evaluate(&preds, &golds, table.as_ref())?;
    Ok(format!("{REPORT_HEADER}\n{}\n", report.tsv_row(per_item_mean)))
}

#[allow(clippy::too_many_arguments)]
fn cmd_gridsearch(
    pair: &ModelPair,
    data: &DatasetArgs,
    split: &str,
    alpha: Option<f64>,
    k_range: Option<&str>,
    lambda_range: Option<&str>,
    allow_unk: bool,
    workers: usize,
) -> Result<String> {
    let (recon, reflex) = pair.load()?;
    let ds = data.load()?;
    let sets = sets_for(&ds, split)?;
    let ks = k_range.map_or_else(|| Ok(DEFAULT_K_RANGE.to_vec()), parse_k_range)?;
    let ls = lambda_range.map_or_else(|| Ok(default_lambda_range()), |r| parse_range(r, "lambda"))?;
    let alpha = alpha.unwrap_or(recon.config.beam_alpha);
    let g = grid_search(&recon, &reflex, &sets, &ds.languages, alpha, &ks, &ls, allow_unk, workers)?;
    Ok(grid_tsv(&g))
}

/// Higher is better for ACC and BCFS, lower for the distances.
fn default_alternative(metric: &str) -> Alternative {
    match metric {
        "ACC%" | "ACC" | "BCFS" => Alternative::Greater,
        _ => Alternative::Less,
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(a: &Path, b: &Path, alternative: Option<&str>, resamples: usize, level: f64, alpha: f64, seed: u64) -> Result<String> {
    let (ta, tb) = (Table::read(a)?, Table::read(b)?);
    let forced = alternative.map(str::parse::<Alternative>).transpose()?;
    let mut s = String::from("metric\talternative\tmean_a\tmean_b\tdiff\tp\tci_low\tci_high\tsignificant\n");
    for (ca, name) in ta.header.iter().enumerate() {
        if name == "seed" || name == "id" {
            continue;
        }
        let Ok(cb) = tb.column(name) else { continue };
        let xa: Vec<f64> = ta.numbers(ca)?.into_iter().flatten().collect();
        let xb: Vec<f64> = tb.numbers(cb)?.into_iter().flatten().collect();
        if xa.is_empty() || xb.is_empty() {
            let _ = writeln!(s, "{name}\t-\tNA\tNA\tNA\tNA\tNA\tNA\tNA");
            continue;
        }
        let alt = forced.unwrap_or_else(|| default_alternative(name));
        let c = compare(&xa, &xb, alt, resamples, level, seed)?;
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let _ = writeln!(
            s,
            "{name}\t{alt}\t{:.4}\t{:.4}\t{:.4}\t{:.4e}\t{:.4}\t{:.4}\t{}",
            mean(&xa),
            mean(&xb),
            c.mean_diff,
            c.p_value,
            c.ci_low,
            c.ci_high,
            significant(&c, alpha)
        );
    }
    let _ = writeln!(s, "# wilcoxon rank-sum; percentile bootstrap {level} CI, {resamples} resamples, seed {seed}");
    Ok(s)
}

fn cmd_correlate(input: &Path, x: &str, y: &str) -> Result<String> {
    let t = Table::read(input)?;
    let (xs, ys) = (t.numbers(t.column(x)?)?, t.numbers(t.column(y)?)?);
    let (xs, ys): (Vec<f64>, Vec<f64>) = xs.into_iter().zip(ys).filter_map(|(a, b)| Some((a?, b?))).unzip();
    let r = pearson_correlation(&xs, &ys)?;
    Ok(format!("x\ty\tn\tr\n{x}\t{y}\t{}\t{r:.4}\n", xs.len()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    pair: &ModelPair,
    data: &DatasetArgs,
    split: &str,
    k: usize,
    alpha: Option<f64>,
    lambda: f64,
    feature_table: Option<&Path>,
    allow_unk: bool,
    workers: usize,
    out: &Path,
) -> Result<String> {
    let (recon, reflex) = pair.load()?;
    let ds = data.load()?;
    let sets = sets_for(&ds, split)?;
    let table = feature_table_for(feature_table, &ds)?;
    let alpha = alpha.unwrap_or(recon.config.beam_alpha);
    let cache = PredictionCache::new();
    let outcomes = predict_sets(&recon, &reflex, &sets, &ds.languages, RerankConfig { lambda, k, alpha }, allow_unk, &cache, workers)?;
    let a = analyze_outcomes(&reflex, &sets, &outcomes, &ds.languages, table.as_ref())?;
    write(&out.join("behavior.tsv"), &a.behavior)?;
    if let Some(sim) = &a.similarity {
        write(&out.join("similarity.tsv"), sim)?;
    } else {
        eprintln!("no feature table covers the data; similarity.tsv skipped");
    }
    write(&out.join("language_errors.tsv"), &a.language_errors)?;
    Ok(a.behavior)
}

fn experiment_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => parse_config::<ExperimentConfig>(&read(p)?)?,
        None => {
            let (recon, reflex) = preset_pair(args.preset.as_deref().unwrap_or("synthetic"))?;
            ExperimentConfig {
                dataset: args
                    .dataset
                    .clone()
                    .ok_or_else(|| Error::Config("--dataset or --config is required".into()))?,
                split_file: None,
                split_seed: 0,
                codepoint_tokenization: false,
                recon,
                reflex,
                seeds: vec![0],
                beam_size: None,
                alpha: None,
                lambda: None,
                k_range: DEFAULT_K_RANGE.to_vec(),
                lambda_range: default_lambda_range(),
                feature_table: None,
                allow_unk: false,
                ablation_no_reranker: false,
                out: args
                    .out
                    .clone()
                    .ok_or_else(|| Error::Config("--out or --config is required".into()))?,
                workers: 1,
            }
        }
    };
    if args.config.is_some() {
        if let Some(p) = &args.preset {
            (cfg.recon, cfg.reflex) = preset_pair(p)?;
        }
    }
    if let Some(d) = &args.dataset {
        cfg.dataset = d.clone();
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if args.split_file.is_some() {
        cfg.split_file = args.split_file.clone();
    }
    if let Some(s) = args.split_seed {
        cfg.split_seed = s;
    }
    cfg.codepoint_tokenization |= args.codepoint;
    if args.seed.is_some() || args.seeds.is_some() {
        let first = args.seed.unwrap_or(0);
        cfg.seeds = (0..args.seeds.unwrap_or(1) as u64).map(|i| first + i).collect();
    }
    if args.beam_size.is_some() {
        cfg.beam_size = args.beam_size;
    }
    if args.alpha.is_some() {
        cfg.alpha = args.alpha;
    }
    if args.lambda.is_some() {
        cfg.lambda = args.lambda;
    }
    if let Some(k) = &args.k_range {
        cfg.k_range = parse_k_range(k)?;
    }
    if let Some(l) = &args.lambda_range {
        cfg.lambda_range = parse_range(l, "lambda")?;
    }
    if args.feature_table.is_some() {
        cfg.feature_table = args.feature_table.clone();
    }
    cfg.allow_unk |= args.allow_unk;
    if matches!(args.ablation, Some(Ablation::NoReranker)) {
        cfg.ablation_no_reranker = true;
    }
    if let Some(e) = args.max_epochs {
        cfg.recon.training.max_epochs = e;
        cfg.reflex.training.max_epochs = e;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<String> {
    let cfg = experiment_config(args)?;
    let summary = run_experiment(&cfg)?;
    let mut s = read(&cfg.out.join("aggregate.tsv"))?;
    for (seed, msg) in &summary.failures {
        let _ = writeln!(s, "# seed {seed} failed: {msg}");
    }
    if summary.results.is_empty() {
        return Err(Error::Training(format!("all {} seeds failed", summary.failures.len())));
    }
    Ok(s)
}

fn cmd_synth(sets: usize, daughters: usize, missing_rate: f64, seed: u64, out: &Path) -> Result<String> {
    if !(0.0..1.0).contains(&missing_rate) || daughters == 0 {
        return Err(Error::Config("need at least one daughter and a missing rate in [0, 1)".into()));
    }
    let (ds, family) = generate(&SyntheticConfig { n_sets: sets, n_daughters: daughters, missing_rate, seed });
    write(out, &ds.to_tsv())?;
    let mut s = String::from("language\trules\n");
    for d in &family {
        let rules: Vec<String> = d.rules.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "{}\t{}", d.name, rules.join("; "));
    }
    Ok(s)
}

fn dispatch(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Ingest { data, out } => cmd_ingest(&data, out.as_deref()),
        Command::Split { dataset, codepoint, seed, ratios, out } => cmd_split(&dataset, codepoint, seed, &ratios, out.as_deref()),
        Command::TrainRecon(a) => cmd_train(&a, true),
        Command::TrainReflex(a) => cmd_train(&a, false),
        Command::Decode { model, data, select, beam_size, alpha, allow_unk, workers } => {
            cmd_decode(&model, &data, &select.split, beam_size, alpha, allow_unk, workers)
        }
        Command::Rerank { models, data, select, beam_size, alpha, lambda, allow_unk, workers } => {
            cmd_rerank(&models, &data, &select.split, beam_size, alpha, lambda, allow_unk, workers)
        }
        Command::Eval { pred, column, dataset, codepoint, feature_table, per_item_mean } => cmd_eval(
            &pred,
            column.as_deref(),
            dataset.as_deref(),
            codepoint,
            feature_table.as_deref(),
            per_item_mean,
        ),
        Command::Gridsearch { models, data, split, alpha, k_range, lambda_range, allow_unk, workers } => cmd_gridsearch(
            &models,
            &data,
            &split,
            alpha,
            k_range.as_deref(),
            lambda_range.as_deref(),
            allow_unk,
            workers,
        ),
        Command::Compare { a, b, alternative, resamples, level, alpha, seed } => {
            cmd_compare(&a, &b, alternative.as_deref(), resamples, level, alpha, seed)
        }
        Command::Correlate { input, x, y } => cmd_correlate(&input, &x, &y),
        Command::Analyze { models, data, select, beam_size, alpha, lambda, feature_table, allow_unk, workers, out } => {
            cmd_analyze(
                &models,
                &data,
                &select.split,
                beam_size,
                alpha,
                lambda,
                feature_table.as_deref(),
                allow_unk,
                workers,
                &out,
            )
        }
        Command::Run(a) => cmd_run(&a),
        Command::Synth { sets, daughters, missing_rate, seed, out } => cmd_synth(sets, daughters, missing_rate, seed, &out),
        Command::Presets => Ok(preset_names().map(|n| format!("{n}\n")).collect()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(out) => {
            // a closed pipe (e.g. `| head`) is not an error
            let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
