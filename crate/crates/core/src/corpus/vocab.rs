use std::collections::{BTreeSet, HashMap};

use sha2::{Digest, Sha256};

use super::Dataset;
use crate::{Error, Result};

pub type TokenId = usize;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const UNK: TokenId = 3;
pub const SEP: TokenId = 4;
pub const DELIM: TokenId = 5;

pub const STRUCTURAL_TOKENS: [&str; 6] = ["<pad>", "<bos>", "<eos>", "<unk>", "*", ":"];

pub(crate) fn looks_like_tag(token: &str) -> bool {
    token.len() > 2 && token.starts_with('<') && token.ends_with('>')
}

fn tag(language: &str) -> String {
    format!("<{language}>")
}

/// Token/id bijection. Layout: structural ids, then one tag per language in
/// canonical order, then phoneme tokens in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, TokenId>,
    languages: Vec<String>,
}

impl Vocabulary {
    pub fn build(dataset: &Dataset) -> Self {
        let mut phonemes = BTreeSet::new();
        for set in &dataset.sets {
            if let Some(p) = &set.protoform {
                phonemes.extend(p.iter().cloned());
            }
            for r in set.reflexes.values() {
                phonemes.extend(r.iter().cloned());
            }
        }
        Self::from_parts(dataset.languages.clone(), phonemes.into_iter().collect())
            .expect("parsed datasets never contain reserved tokens")
    }

    /// Rebuild from a language list and phoneme list (e.g. from a checkpoint).
    pub fn from_parts(languages: Vec<String>, phonemes: Vec<String>) -> Result<Self> {
        let mut id_to_token: Vec<String> =
            STRUCTURAL_TOKENS.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(languages.iter().map(|l| tag(l)));
        id_to_token.extend(phonemes);
        let mut token_to_id = HashMap::with_capacity(id_to_token.len());
        for (i, t) in id_to_token.iter().enumerate() {
            if token_to_id.insert(t.clone(), i).is_some() {
                return Err(Error::Vocabulary(format!("token `{t}` appears twice")));
            }
        }
        Ok(Vocabulary {
            id_to_token,
            token_to_id,
            languages,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn num_languages(&self) -> usize {
        self.languages.len()
    }

    fn first_phoneme(&self) -> TokenId {
        STRUCTURAL_TOKENS.len() + self.languages.len()
    }

    pub fn phonemes(&self) -> &[String] {
        &self.id_to_token[self.first_phoneme()..]
    }

    pub fn is_phoneme(&self, id: TokenId) -> bool {
        id >= self.first_phoneme() && id < self.len()
    }

    pub fn language_id(&self, language: &str) -> Result<TokenId> {
        self.languages
            .iter()
            .position(|l| l == language)
            .map(|i| STRUCTURAL_TOKENS.len() + i)
            .ok_or_else(|| Error::Vocabulary(format!("unknown language `{language}`")))
    }

    /// Index of `language` within the canonical language list.
    pub fn language_index(&self, language: &str) -> Result<usize> {
        self.language_id(language)
            .map(|id| id - STRUCTURAL_TOKENS.len())
    }

    /// Language index for a tag id, `None` for any other id.
    pub fn language_of_id(&self, id: TokenId) -> Option<usize> {
        let lo = STRUCTURAL_TOKENS.len();
        (id >= lo && id < self.first_phoneme()).then(|| id - lo)
    }

    pub fn lookup(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    /// Id of a phoneme token. Unknown tokens map to UNK only when allowed.
    pub fn encode_token(&self, token: &str, allow_unk: bool) -> Result<TokenId> {
        match self.token_to_id.get(token) {
            Some(&id) if self.is_phoneme(id) => Ok(id),
            Some(_) => Err(Error::Vocabulary(format!(
                "`{token}` is a reserved token, not a phoneme"
            ))),
            None if allow_unk => Ok(UNK),
            None => Err(Error::Vocabulary(format!("unknown token `{token}`"))),
        }
    }

    pub fn encode(&self, tokens: &[String], allow_unk: bool) -> Result<Vec<TokenId>> {
        tokens
            .iter()
            .map(|t| self.encode_token(t, allow_unk))
            .collect()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.id_to_token[id]
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&i| self.id_to_token[i].clone()).collect()
    }

    pub fn render(&self, ids: &[TokenId]) -> String {
        self.decode(ids).join(" ")
    }

    /// Ids a decoder may emit: EOS plus every phoneme.
    pub fn output_allowed(&self) -> Vec<bool> {
        (0..self.len())
            .map(|id| id == EOS || self.is_phoneme(id))
            .collect()
    }

    /// Hex SHA-256 over the id order, used to pair checkpoints with data.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.id_to_token {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update([0xffu8]);
        for l in &self.languages {
            hasher.update(l.as_bytes());
            hasher.update([0u8]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_dataset, IngestOptions};

    fn small() -> Dataset {
        parse_dataset(
            "id\tproto\tLangA\tLangB\nw1\tp a\tp a\tp o\n",
            &IngestOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn counts_and_layout() {
        let v = Vocabulary::build(&small());
        assert_eq!(v.len(), 6 + 2 + 3);
        assert_eq!(v.phonemes(), ["a", "o", "p"]);
        assert_eq!(v.token(EOS), "<eos>");
        assert_eq!(v.token(SEP), "*");
        assert_eq!(v.language_id("LangB").unwrap(), 7);
        assert_eq!(v.language_of_id(7), Some(1));
        assert_eq!(v.language_of_id(8), None);
    }

    #[test]
    fn deterministic_and_bijective() {
        let a = Vocabulary::build(&small());
        let b = Vocabulary::build(&small());
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        for id in 0..a.len() {
            assert_eq!(a.lookup(a.token(id)), Some(id));
        }
    }

    #[test]
    fn empty_dataset_has_structural_ids_only() {
        let v = Vocabulary::build(&Dataset::empty(vec![]));
        assert_eq!(v.len(), STRUCTURAL_TOKENS.len());
    }

    #[test]
    fn reserved_tokens_are_not_phonemes() {
        let v = Vocabulary::build(&small());
        assert!(v.encode_token("*", false).is_err());
        assert!(v.encode_token("<LangA>", true).is_err());
        assert!(!v.is_phoneme(EOS));
    }
}
