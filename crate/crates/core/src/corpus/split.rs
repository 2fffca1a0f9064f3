use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "dev" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Seeded shuffle followed by a contiguous partition.
pub fn split_dataset(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Result<Dataset> {
    ratios.validate()?;
    let n = dataset.sets.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_train = ((n as f64 * ratios.train).round() as usize).min(n);
    let n_val = ((n as f64 * ratios.val).round() as usize).min(n - n_train);
    let mut tags = BTreeMap::new();
    for (pos, &idx) in order.iter().enumerate() {
        let tag = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        tags.insert(dataset.sets[idx].id.clone(), tag);
    }
    let mut out = dataset.clone();
    out.split_tags = Some(tags);
    Ok(out)
}

/// Tag a dataset from a two-column `id<TAB>split` file. Every set must be
/// tagged exactly once.
pub fn apply_split_file(dataset: &Dataset, tsv: &str) -> Result<Dataset> {
    let known: std::collections::HashSet<&str> =
        dataset.sets.iter().map(|s| s.id.as_str()).collect();
    let mut tags = BTreeMap::new();
    for (i, line) in tsv.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 2 {
            return Err(Error::schema(line_no, "split file rows need exactly two cells"));
        }
        if line_no == 1 && cells[0] == "id" {
            continue;
        }
        let tag: Split = cells[1]
            .parse()
            .map_err(|_| Error::schema(line_no, format!("bad split tag `{}`", cells[1])))?;
        if !known.contains(cells[0]) {
            return Err(Error::schema(line_no, format!("unknown id `{}`", cells[0])));
        }
        if tags.insert(cells[0].to_string(), tag).is_some() {
            return Err(Error::schema(line_no, format!("id `{}` tagged twice", cells[0])));
        }
    }
    if let Some(missing) = dataset.sets.iter().find(|s| !tags.contains_key(&s.id)) {
        return Err(Error::Data(format!("id `{}` missing from split file", missing.id)));
    }
    let mut out = dataset.clone();
    out.split_tags = Some(tags);
    Ok(out)
}

pub fn serialize_split_file(dataset: &Dataset) -> String {
    let mut out = String::from("id\tsplit\n");
    if let Some(tags) = &dataset.split_tags {
        for set in &dataset.sets {
            if let Some(tag) = tags.get(&set.id) {
                out.push_str(&format!("{}\t{}\n", set.id, tag));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_dataset, IngestOptions};

    fn ten() -> Dataset {
        let mut tsv = String::from("id\tproto\tA\n");
        for i in 0..10 {
            tsv.push_str(&format!("s{i}\tp\tp\n"));
        }
        parse_dataset(&tsv, &IngestOptions::default()).unwrap()
    }

    fn sizes(ds: &Dataset) -> (usize, usize, usize) {
        (
            ds.split(Split::Train).len(),
            ds.split(Split::Val).len(),
            ds.split(Split::Test).len(),
        )
    }

    #[test]
    fn seventy_ten_twenty() {
        let ds = split_dataset(&ten(), SplitRatios::default(), 1).unwrap();
        assert_eq!(sizes(&ds), (7, 1, 2));
    }

    #[test]
    fn same_seed_same_tags() {
        let a = split_dataset(&ten(), SplitRatios::default(), 1).unwrap();
        let b = split_dataset(&ten(), SplitRatios::default(), 1).unwrap();
        assert_eq!(a.split_tags, b.split_tags);
    }

    #[test]
    fn all_train() {
        let r = SplitRatios {
            train: 1.0,
            val: 0.0,
            test: 0.0,
        };
        assert_eq!(sizes(&split_dataset(&ten(), r, 3).unwrap()), (10, 0, 0));
    }

    #[test]
    fn bad_ratio_sum() {
        let r = SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.1,
        };
        assert!(matches!(split_dataset(&ten(), r, 1), Err(Error::Config(_))));
    }

    #[test]
    fn split_file_round_trip_and_override() {
        let ds = split_dataset(&ten(), SplitRatios::default(), 9).unwrap();
        let file = serialize_split_file(&ds);
        let again = apply_split_file(&ten(), &file).unwrap();
        assert_eq!(ds.split_tags, again.split_tags);

        let partial = "s0\ttrain\n";
        assert!(matches!(apply_split_file(&ten(), partial), Err(Error::Data(_))));
        let unknown = "zz\ttrain\n";
        assert!(apply_split_file(&ten(), unknown).is_err());
    }
}
