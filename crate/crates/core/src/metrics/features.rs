use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use crate::{Error, Result};

const BUNDLED: &str = include_str!("../../data/features.tsv");

/// Articulatory feature vectors (values in {-1, 0, +1}) plus a tone flag per
/// token.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    feature_names: Vec<String>,
    entries: HashMap<String, (bool, Vec<i8>)>,
}

fn parse_value(cell: &str) -> Option<i8> {
    match cell {
        "+" | "1" | "+1" => Some(1),
        "-" | "−" | "-1" => Some(-1),
        "0" => Some(0),
        _ => None,
    }
}

fn parse_flag(cell: &str) -> Option<bool> {
    match cell {
        "1" | "true" | "True" | "yes" => Some(true),
        "0" | "false" | "False" | "no" => Some(false),
        _ => None,
    }
}

impl FeatureTable {
    /// IPA segments, Chao tone letters and Middle Chinese tone classes.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled feature table is well formed")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Header: `token<TAB>tone<TAB>feat1...`; one row per token.
    pub fn parse(tsv: &str) -> Result<Self> {
        let mut lines = tsv.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::schema(1, "empty feature table"))?;
        let header: Vec<&str> = header.split('\t').collect();
        if header.len() < 3 {
            return Err(Error::schema(1, "need token, tone and at least one feature column"));
        }
        let feature_names: Vec<String> = header[2..].iter().map(|s| s.to_string()).collect();
        let mut entries = HashMap::new();
        for (i, line) in lines {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != header.len() {
                return Err(Error::schema(line_no, "feature row arity mismatch"));
            }
            let tone = parse_flag(cells[1])
                .ok_or_else(|| Error::schema(line_no, format!("bad tone flag `{}`", cells[1])))?;
            let vector = cells[2..]
                .iter()
                .map(|c| {
                    parse_value(c)
                        .ok_or_else(|| Error::schema(line_no, format!("bad feature value `{c}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if entries
                .insert(cells[0].to_string(), (tone, vector))
                .is_some()
            {
                return Err(Error::schema(line_no, format!("duplicate token `{}`", cells[0])));
            }
        }
        Ok(FeatureTable {
            feature_names,
            entries,
        })
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[i8]> {
        self.entries.get(token).map(|(_, v)| v.as_slice())
    }

    pub fn is_tone(&self, token: &str) -> bool {
        self.entries.get(token).is_some_and(|(t, _)| *t)
    }

    /// Tokens absent from the table, sorted and deduplicated.
    pub fn missing<'a, S: AsRef<str> + 'a>(
        &self,
        seqs: impl IntoIterator<Item = &'a [S]>,
    ) -> Vec<String> {
        let mut out = BTreeSet::new();
        for seq in seqs {
            for t in seq {
                if !self.contains(t.as_ref()) {
                    out.insert(t.as_ref().to_string());
                }
            }
        }
        out.into_iter().collect()
    }

    /// Fraction of features on which two tokens differ.
    pub fn substitution_cost(&self, a: &str, b: &str) -> Option<f64> {
        let (va, vb) = (self.vector(a)?, self.vector(b)?);
        let diff = va.iter().zip(vb).filter(|(x, y)| x != y).count();
        Some(diff as f64 / self.num_features() as f64)
    }

    pub fn add(&mut self, token: &str, tone: bool, vector: Vec<i8>) -> Result<()> {
        if vector.len() != self.num_features() {
            return Err(Error::Config(format!(
                "feature vector for `{token}` has {} values, table has {}",
                vector.len(),
                self.num_features()
            )));
        }
        self.entries.insert(token.to_string(), (tone, vector));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_shape() {
        let t = FeatureTable::bundled();
        assert_eq!(t.num_features(), 24);
        assert!(t.contains("p") && t.contains("ʔ") && t.contains("t͡ʃ"));
        assert!(t.is_tone("˥") && t.is_tone("入"));
        assert!(!t.is_tone("a"));
        assert_eq!(t.substitution_cost("p", "p"), Some(0.0));
        // p and b differ only in voicing
        assert_eq!(t.substitution_cost("p", "b"), Some(1.0 / 24.0));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(FeatureTable::parse("token\ttone\tsyl\np\t0\t+\np\t0\t-\n").is_err());
        assert!(FeatureTable::parse("token\ttone\tsyl\np\tmaybe\t+\n").is_err());
        assert!(FeatureTable::parse("token\ttone\tsyl\np\t0\t2\n").is_err());
    }
}
