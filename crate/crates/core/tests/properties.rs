mod common;

use std::collections::BTreeMap;

use common::*;
use proptest::prelude::*;
use protorecon::corpus::{parse_dataset, split_dataset, CognateSet, Dataset, IngestOptions, Split, SplitRatios};
use protorecon::decode::{beam_search, beam_search_reference, normalized_score, BeamConfig, Candidate};
use protorecon::metrics::{bcubed_f, feature_edit_distance, ter, token_edit_distance, FeatureTable};
use protorecon::rerank::rerank;
use protorecon::stats::{compare, significant, wilcoxon_rank_sum, Alternative};

fn seq(alphabet: usize, max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0..alphabet as u8, 0..=max)
}

fn ipa(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(&IPA[..]), 0..=max)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

proptest! {
    #[test]
    fn ted_is_a_metric(a in seq(4, 7), b in seq(4, 7), c in seq(4, 7)) {
        let d = |x: &[u8], y: &[u8]| token_edit_distance(x, y);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert!(d(&a, &b) <= a.len().max(b.len()));
        prop_assert!(d(&a, &b) >= a.len().abs_diff(b.len()));
    }

    #[test]
    fn ter_is_bounded(a in seq(4, 7), b in seq(4, 7)) {
        prop_assume!(!b.is_empty());
        let t = ter(&a, &b).unwrap();
        prop_assert!(t >= 0.0);
        prop_assert!(t <= a.len().max(b.len()) as f64 / b.len() as f64);
    }

    #[test]
    fn feature_distance_is_a_cheaper_metric(a in ipa(5), b in ipa(5), c in ipa(5)) {
        let t = FeatureTable::bundled();
        let f = |x: &[String], y: &[String]| feature_edit_distance(x, y, &t).unwrap();
        prop_assert!(f(&a, &b) <= token_edit_distance(&a, &b) as f64 + 1e-12);
        prop_assert!((f(&a, &b) - f(&b, &a)).abs() < 1e-12);
        prop_assert!(f(&a, &c) <= f(&a, &b) + f(&b, &c) + 1e-12);
        prop_assert!(f(&a, &b) >= 0.0);
        prop_assert_eq!(f(&a, &a), 0.0);
    }

    #[test]
    fn bcubed_is_bounded_and_label_free(a in seq(4, 7), b in seq(4, 7), shift in 1u8..4) {
        let f = bcubed_f(&a, &b);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(bcubed_f(&a, &a), 1.0);
        let relabel = |v: &[u8]| v.iter().map(|x| (x + shift) % 4).collect::<Vec<_>>();
        prop_assert!((bcubed_f(&relabel(&a), &relabel(&b)) - f).abs() < 1e-12);
    }

    #[test]
    fn beam_output_is_well_formed(
        seed in any::<u64>(),
        phonemes in 1usize..=4,
        max_len in 1usize..=5,
        k in 1usize..=8,
        alpha in 0.0f64..2.0,
    ) {
        let model = TableDecoder::new(phonemes, seed);
        let cfg = BeamConfig { k, alpha, max_len };
        let out = beam_search(&model, &[], cfg).unwrap();
        prop_assert!(!out.is_empty() && out.len() <= k);
        prop_assert!(out.windows(2).all(|w| w[0].m >= w[1].m));
        for c in &out {
            prop_assert!(c.ids.iter().all(|&t| t >= FIRST && t < FIRST + phonemes));
            prop_assert_eq!(c.len, c.ids.len() + usize::from(c.finished));
            prop_assert!(c.len <= max_len);
            prop_assert_eq!(c.m, normalized_score(c.log_prob, c.len, alpha));
            prop_assert!((c.log_prob - score(&model, &c.ids, c.finished)).abs() < 1e-9);
        }
        prop_assert_eq!(&out, &beam_search_reference(&model, &[], cfg).unwrap());
    }

    #[test]
    fn unnormalized_beam_ranks_by_raw_score(seed in any::<u64>(), phonemes in 1usize..=4, max_len in 1usize..=4, k in 1usize..=6) {
        let out = beam_search(&TableDecoder::new(phonemes, seed), &[], BeamConfig { k, alpha: 0.0, max_len }).unwrap();
        prop_assert!(out.iter().all(|c| c.m == c.log_prob));
    }

    #[test]
    fn exhaustive_beam_is_never_beaten(seed in any::<u64>(), phonemes in 1usize..=3, max_len in 1usize..=4, k in 1usize..=6, alpha in 0.0f64..1.5) {
        let model = TableDecoder::new(phonemes, seed);
        let full = (phonemes + 1).pow(max_len as u32);
        let best = beam_search(&model, &[], BeamConfig { k: full, alpha, max_len }).unwrap();
        let narrow = beam_search(&model, &[], BeamConfig { k, alpha, max_len }).unwrap();
        if narrow[0].finished {
            prop_assert!(best[0].m >= narrow[0].m - 1e-12);
        }
    }

    #[test]
    fn rerank_adds_weighted_reflex_score(
        ms in prop::collection::vec(-10.0f64..0.0, 1..8),
        num in prop::collection::vec(0usize..=4, 8),
        lambda in 0.0f64..5.0,
    ) {
        let mut ms = ms;
        ms.sort_by(|a, b| b.total_cmp(a));
        let cands: Vec<Candidate> = ms
            .iter()
            .enumerate()
            .map(|(i, &m)| Candidate { ids: vec![FIRST + i], log_prob: m, len: 2, m, finished: true })
            .collect();
        let r: Vec<f64> = num[..ms.len()].iter().map(|&n| n as f64 / 4.0).collect();
        let out = rerank(&cands, &r, lambda).unwrap();
        prop_assert!(out.windows(2).all(|w| w[0].s >= w[1].s));
        for (i, c) in out.iter().enumerate() {
            prop_assert_eq!(c.rerank_rank, i);
            prop_assert_eq!(c.s, ms[c.beam_rank] + lambda * r[c.beam_rank]);
        }
        // equal s keeps beam order
        prop_assert!(out.windows(2).all(|w| w[0].s > w[1].s || w[0].beam_rank < w[1].beam_rank));
        let zero = rerank(&cands, &r, 0.0).unwrap();
        prop_assert!(zero.iter().enumerate().all(|(i, c)| c.beam_rank == i));
        // a weight larger than the spread of m makes r decide first
        let big = rerank(&cands, &r, 1e3).unwrap();
        prop_assert!(big.windows(2).all(|w| w[0].r >= w[1].r));
        // raising one candidate's r never lowers it
        for j in 0..ms.len() {
            let mut up = r.clone();
            up[j] = (up[j] + 0.25).min(1.0);
            let after = rerank(&cands, &up, lambda).unwrap();
            let before_rank = out.iter().position(|c| c.beam_rank == j).unwrap();
            let after_rank = after.iter().position(|c| c.beam_rank == j).unwrap();
            prop_assert!(after_rank <= before_rank);
        }
    }

    #[test]
    fn p_values_are_probabilities(
        x in prop::collection::vec(0.0f64..1.0, 1..12),
        y in prop::collection::vec(0.0f64..1.0, 1..12),
    ) {
        for alt in [Alternative::Greater, Alternative::Less, Alternative::TwoSided] {
            let p = wilcoxon_rank_sum(&x, &y, alt).unwrap();
            prop_assert!((0.0..=1.0).contains(&p), "{alt}: {p}");
        }
        let g = wilcoxon_rank_sum(&x, &y, Alternative::Greater).unwrap();
        let l = wilcoxon_rank_sum(&x, &y, Alternative::Less).unwrap();
        prop_assert!(g + l >= 1.0 - 1e-12);
    }

    #[test]
    fn significance_is_monotone_in_alpha(
        x in prop::collection::vec(0.0f64..1.0, 2..10),
        y in prop::collection::vec(0.0f64..1.0, 2..10),
        a1 in 0.001f64..0.2,
        a2 in 0.001f64..0.2,
    ) {
        let c = compare(&x, &y, Alternative::Greater, 1000, 0.99, 1).unwrap();
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(!significant(&c, lo) || significant(&c, hi));
    }

    #[test]
    fn dataset_round_trips(rows in prop::collection::vec((ipa(4), ipa(4), ipa(4)), 1..8)) {
        let sets: Vec<CognateSet> = rows
            .into_iter()
            .enumerate()
            .filter(|(_, (_, a, b))| !a.is_empty() || !b.is_empty())
            .map(|(i, (p, a, b))| {
                let mut reflexes = BTreeMap::new();
                for (lang, r) in [("A", a), ("B", b)] {
                    if !r.is_empty() {
                        reflexes.insert(lang.to_string(), r);
                    }
                }
                CognateSet { id: format!("x{i}"), protoform: (!p.is_empty()).then_some(p), reflexes }
            })
            .collect();
        prop_assume!(!sets.is_empty());
        let ds = Dataset { sets, ..Dataset::empty(vec!["A".into(), "B".into()]) };
        let back = parse_dataset(&ds.to_tsv(), &IngestOptions::default()).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn split_partitions_the_sets(n in 1usize..60, seed in any::<u64>()) {
        let text: String = std::iter::once("id\tproto\tA\n".to_string())
            .chain((0..n).map(|i| format!("s{i}\tp a\tb {}\n", IPA[i % IPA.len()])))
            .collect();
        let ds = parse_dataset(&text, &IngestOptions::default()).unwrap();
        let split = split_dataset(&ds, SplitRatios { train: 0.7, val: 0.1, test: 0.2 }, seed).unwrap();
        let parts = [Split::Train, Split::Val, Split::Test].map(|s| split.split(s).len());
        prop_assert_eq!(parts.iter().sum::<usize>(), n);
        prop_assert_eq!(split.split_tags.as_ref().unwrap().len(), n);
        prop_assert_eq!(split_dataset(&ds, SplitRatios { train: 0.7, val: 0.1, test: 0.2 }, seed).unwrap(), split);
    }
}
