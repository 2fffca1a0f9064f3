//! Cognate-set datasets: TSV ingestion, vocabulary, model inputs and splits.
//!
//! A dataset file is UTF-8 TSV. The header row optionally starts with an
//! `id` column, followed by the protoform column and one column per
//! daughter language. Cells hold space-separated tokens (or one token per
//! code point in [`Tokenization::Codepoint`] mode); an empty cell is a
//! missing reflex.

mod split;
pub mod synthetic;
mod vocab;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::{Error, Result};

pub use split::{apply_split_file, serialize_split_file, split_dataset, Split, SplitRatios};
pub use vocab::{TokenId, Vocabulary, BOS, DELIM, EOS, PAD, SEP, STRUCTURAL_TOKENS, UNK};

/// Characters that frame the concatenated reconstruction input and so may
/// never occur inside a cell.
pub const RESERVED_CHARS: [char; 2] = ['*', ':'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tokenization {
    /// Split each cell on single spaces.
    #[default]
    Whitespace,
    /// One token per Unicode code point; whitespace is skipped.
    Codepoint,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub tokenization: Tokenization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CognateSet {
    pub id: String,
    pub protoform: Option<Vec<String>>,
    /// Daughter language name to reflex tokens. Only attested reflexes
    /// appear here.
    pub reflexes: BTreeMap<String, Vec<String>>,
}

impl CognateSet {
    /// Present reflexes in the given canonical language order.
    pub fn reflexes_in_order<'a>(
        &'a self,
        languages: &'a [String],
    ) -> impl Iterator<Item = (&'a str, &'a [String])> + 'a {
        languages.iter().filter_map(move |lang| {
            self.reflexes
                .get(lang)
                .map(|tokens| (lang.as_str(), tokens.as_slice()))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    /// Header name of the protoform column.
    pub proto_name: String,
    /// Canonical language order (header order).
    pub languages: Vec<String>,
    pub sets: Vec<CognateSet>,
    pub split_tags: Option<BTreeMap<String, Split>>,
}

impl Dataset {
    pub fn empty(languages: Vec<String>) -> Self {
        Dataset {
            proto_name: "proto".to_string(),
            languages,
            sets: Vec::new(),
            split_tags: None,
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn language_index(&self, name: &str) -> Option<usize> {
        self.languages.iter().position(|l| l == name)
    }

    /// Sets tagged with `split`. Untagged datasets yield nothing.
    pub fn split(&self, split: Split) -> Vec<&CognateSet> {
        match &self.split_tags {
            None => Vec::new(),
            Some(tags) => self
                .sets
                .iter()
                .filter(|s| tags.get(&s.id) == Some(&split))
                .collect(),
        }
    }

    /// Write the dataset back out as whitespace-tokenized TSV with an id
    /// column.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("id\t");
        out.push_str(&self.proto_name);
        for lang in &self.languages {
            out.push('\t');
            out.push_str(lang);
        }
        out.push('\n');
        for set in &self.sets {
            out.push_str(&set.id);
            out.push('\t');
            if let Some(p) = &set.protoform {
                out.push_str(&p.join(" "));
            }
            for lang in &self.languages {
                out.push('\t');
                if let Some(r) = set.reflexes.get(lang) {
                    let _ = write!(out, "{}", r.join(" "));
                }
            }
            out.push('\n');
        }
        out
    }
}

fn tokenize(cell: &str, mode: Tokenization, line: usize) -> Result<Vec<String>> {
    if let Some(c) = cell.chars().find(|c| RESERVED_CHARS.contains(c)) {
        return Err(Error::schema(
            line,
            format!("reserved character `{c}` inside cell `{cell}`"),
        ));
    }
    let tokens: Vec<String> = match mode {
        Tokenization::Whitespace => cell.split(' ').map(str::to_string).collect(),
        Tokenization::Codepoint => cell
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
    };
    for t in &tokens {
        if t.is_empty() {
            return Err(Error::schema(line, format!("empty token in cell `{cell}`")));
        }
        if vocab::looks_like_tag(t) {
            return Err(Error::schema(
                line,
                format!("token `{t}` collides with the language-tag syntax"),
            ));
        }
    }
    Ok(tokens)
}

/// Parse a cognate table.
pub fn parse_dataset(tsv: &str, options: &IngestOptions) -> Result<Dataset> {
    let mut lines = tsv
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::schema(1, "missing header row"))?;
    let header: Vec<&str> = header.split('\t').collect();
    let has_id = header[0].eq_ignore_ascii_case("id");
    let first_lang = if has_id { 2 } else { 1 };
    if header.len() <= first_lang {
        return Err(Error::schema(
            1,
            "header needs a protoform column and at least one language column",
        ));
    }
    let proto_name = header[first_lang - 1].to_string();
    let languages: Vec<String> = header[first_lang..].iter().map(|s| s.to_string()).collect();
    let mut seen_langs = HashSet::new();
    for lang in &languages {
        if lang.is_empty() || !seen_langs.insert(lang.as_str()) {
            return Err(Error::schema(1, format!("bad or duplicate language `{lang}`")));
        }
    }

    let mut sets = Vec::new();
    let mut ids = HashSet::new();
    let mut row_no = 0usize;
    for (line, row) in lines {
        if row.is_empty() {
            continue;
        }
        row_no += 1;
        let cells: Vec<&str> = row.split('\t').collect();
        if cells.len() != header.len() {
            return Err(Error::schema(
                line,
                format!("expected {} cells, found {}", header.len(), cells.len()),
            ));
        }
        let id = if has_id {
            cells[0].to_string()
        } else {
            format!("row{row_no}")
        };
        if id.is_empty() {
            return Err(Error::schema(line, "empty id"));
        }
        if !ids.insert(id.clone()) {
            return Err(Error::schema(line, format!("duplicate id `{id}`")));
        }
        let proto_cell = cells[first_lang - 1];
        let protoform = if proto_cell.is_empty() {
            None
        } else {
            Some(tokenize(proto_cell, options.tokenization, line)?)
        };
        let mut reflexes = BTreeMap::new();
        for (lang, cell) in languages.iter().zip(&cells[first_lang..]) {
            if !cell.is_empty() {
                reflexes.insert(lang.clone(), tokenize(cell, options.tokenization, line)?);
            }
        }
        if reflexes.is_empty() {
            return Err(Error::schema(line, format!("set `{id}` has no reflexes")));
        }
        sets.push(CognateSet {
            id,
            protoform,
            reflexes,
        });
    }
    Ok(Dataset {
        proto_name,
        languages,
        sets,
        split_tags: None,
    })
}

/// `* <L1> : d1 * <L2> : d2 ... *` over the present reflexes.
pub fn assemble_reconstruction_input(
    set: &CognateSet,
    languages: &[String],
    vocab: &Vocabulary,
    allow_unk: bool,
) -> Result<Vec<TokenId>> {
    let mut ids = vec![SEP];
    for (lang, tokens) in set.reflexes_in_order(languages) {
        ids.push(vocab.language_id(lang)?);
        ids.push(DELIM);
        for t in tokens {
            ids.push(vocab.encode_token(t, allow_unk)?);
        }
        ids.push(SEP);
    }
    if ids.len() == 1 {
        return Err(Error::Data(format!(
            "set `{}` has no reflexes in the language inventory",
            set.id
        )));
    }
    Ok(ids)
}

/// `<target> p1 p2 ...`
pub fn assemble_reflex_input(
    protoform: &[String],
    target: &str,
    vocab: &Vocabulary,
    allow_unk: bool,
) -> Result<Vec<TokenId>> {
    let mut ids = Vec::with_capacity(protoform.len() + 1);
    ids.push(vocab.language_id(target)?);
    for t in protoform {
        ids.push(vocab.encode_token(t, allow_unk)?);
    }
    Ok(ids)
}
