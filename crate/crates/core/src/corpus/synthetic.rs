//! Generated language families with regular, invertible sound changes.
//!
//! Each daughter applies a small ordered list of rewrite rules to every
//! protoform. Rule targets are fresh symbols that never occur in the
//! protolanguage and are distinct within a daughter, so each reflex
//! determines its protoform uniquely.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CognateSet, Dataset};

pub const PROTO_CONSONANTS: [&str; 13] = ["p", "t", "k", "b", "d", "g", "m", "n", "s", "l", "r", "w", "j"];
pub const PROTO_VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 5] = ["k", "t", "n", "m", "s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Context {
    Anywhere,
    WordFinal,
    Intervocalic,
    BeforeFrontVowel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub source: &'static str,
    pub target: &'static str,
    pub context: Context,
}

impl RewriteRule {
    fn matches(&self, form: &[&str], pos: usize) -> bool {
        if form[pos] != self.source {
            return false;
        }
        let is_vowel = |i: usize| PROTO_VOWELS.contains(&form[i]);
        match self.context {
            Context::Anywhere => true,
            Context::WordFinal => pos + 1 == form.len(),
            Context::Intervocalic => pos > 0 && pos + 1 < form.len() && is_vowel(pos - 1) && is_vowel(pos + 1),
            Context::BeforeFrontVowel => pos + 1 < form.len() && matches!(form[pos + 1], "i" | "e"),
        }
    }
}

impl std::fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let env = match self.context {
            Context::Anywhere => "",
            Context::WordFinal => " / _#",
            Context::Intervocalic => " / V_V",
            Context::BeforeFrontVowel => " / _[i e]",
        };
        write!(f, "{} > {}{env}", self.source, self.target)
    }
}

const RULE_POOL: [(&str, &str, Context); 22] = [
    ("k", "ʔ", Context::WordFinal),
    ("t", "ʔ", Context::WordFinal),
    ("n", "ŋ", Context::WordFinal),
    ("m", "ŋ", Context::WordFinal),
    ("p", "β", Context::Intervocalic),
    ("t", "ð", Context::Intervocalic),
    ("k", "ɣ", Context::Intervocalic),
    ("k", "t͡ʃ", Context::BeforeFrontVowel),
    ("s", "ɕ", Context::BeforeFrontVowel),
    ("p", "f", Context::Anywhere),
    ("t", "θ", Context::Anywhere),
    ("k", "x", Context::Anywhere),
    ("b", "v", Context::Anywhere),
    ("d", "ɾ", Context::Anywhere),
    ("g", "ʒ", Context::Anywhere),
    ("s", "ʃ", Context::Anywhere),
    ("l", "ɬ", Context::Anywhere),
    ("a", "ɛ", Context::Anywhere),
    ("o", "ɔ", Context::Anywhere),
    ("u", "y", Context::Anywhere),
    ("e", "ø", Context::Anywhere),
    ("i", "ɪ", Context::Anywhere),
];

#[derive(Debug, Clone)]
pub struct Daughter {
    pub name: String,
    pub rules: Vec<RewriteRule>,
}

impl Daughter {
    pub fn apply(&self, protoform: &[&str]) -> Vec<String> {
        (0..protoform.len())
            .map(|pos| {
                self.rules
                    .iter()
                    .find(|r| r.matches(protoform, pos))
                    .map(|r| r.target)
                    .unwrap_or(protoform[pos])
                    .to_string()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_sets: usize,
    pub n_daughters: usize,
    /// Probability that a reflex is unattested; every set keeps at least one.
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_sets: 2000,
            n_daughters: 4,
            missing_rate: 0.1,
            seed: 7,
        }
    }
}

const NAMES: [&str; 8] = ["Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta", "Eta", "Theta"];

/// Draw 3 to 5 rules with distinct targets. Conditioned rules come first so
/// they take precedence over unconditioned rules on the same source.
fn draw_rules(rng: &mut ChaCha8Rng) -> Vec<RewriteRule> {
    let want = rng.gen_range(3..=5);
    let mut pool: Vec<_> = RULE_POOL.to_vec();
    pool.shuffle(rng);
    let mut targets = HashSet::new();
    let mut rules: Vec<RewriteRule> = Vec::new();
    for (source, target, context) in pool {
        if rules.len() == want {
            break;
        }
        if !targets.insert(target) {
            continue;
        }
        rules.push(RewriteRule {
            source,
            target,
            context,
        });
    }
    rules.sort_by_key(|r| r.context == Context::Anywhere);
    rules
}

fn draw_protoform(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let syllables = rng.gen_range(1..=3);
    let mut form = Vec::new();
    for _ in 0..syllables {
        form.push(*PROTO_CONSONANTS.choose(rng).unwrap());
        form.push(*PROTO_VOWELS.choose(rng).unwrap());
    }
    if rng.gen_bool(0.4) {
        form.push(*CODAS.choose(rng).unwrap());
    }
    form
}

pub fn daughters(config: &SyntheticConfig) -> Vec<Daughter> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_daughters)
        .map(|i| Daughter {
            name: NAMES
                .get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("Lang{i}")),
            rules: draw_rules(&mut rng),
        })
        .collect()
}

/// Generate a family: distinct protoforms, one reflex per daughter.
pub fn generate(config: &SyntheticConfig) -> (Dataset, Vec<Daughter>) {
    let family = daughters(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_f00d);
    let mut seen = HashSet::new();
    let mut sets = Vec::with_capacity(config.n_sets);
    while sets.len() < config.n_sets {
        let proto = draw_protoform(&mut rng);
        if !seen.insert(proto.clone()) {
            continue;
        }
        let mut reflexes = BTreeMap::new();
        let keep: Vec<bool> = (0..family.len())
            .map(|_| !rng.gen_bool(config.missing_rate))
            .collect();
        let forced = if keep.iter().any(|&k| k) {
            None
        } else {
            Some(rng.gen_range(0..family.len()))
        };
        for (i, d) in family.iter().enumerate() {
            if keep[i] || forced == Some(i) {
                reflexes.insert(d.name.clone(), d.apply(&proto));
            }
        }
        sets.push(CognateSet {
            id: format!("syn{:05}", sets.len()),
            protoform: Some(proto.iter().map(|s| s.to_string()).collect()),
            reflexes,
        });
    }
    let dataset = Dataset {
        proto_name: "Proto".to_string(),
        languages: family.iter().map(|d| d.name.clone()).collect(),
        sets,
        split_tags: None,
    };
    (dataset, family)
}
