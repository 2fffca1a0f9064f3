use std::collections::HashMap;
use std::hash::Hash;

use super::edit::align;

/// B-Cubed F score over the columns of the unit-cost alignment of `pred`
/// against `gold`.
///
/// Each column belongs to one cluster by its predicted symbol and one by
/// its gold symbol (gaps form a cluster of their own). Per column,
/// precision is the share of its predicted-symbol cluster that also shares
/// its gold symbol; recall is the converse. The score is the harmonic mean
/// of the column-averaged precision and recall.
pub fn bcubed_f<T: Eq + Hash>(pred: &[T], gold: &[T]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let cols = align(pred, gold);
    let mut by_pred: HashMap<Option<&T>, usize> = HashMap::new();
    let mut by_gold: HashMap<Option<&T>, usize> = HashMap::new();
    let mut by_pair: HashMap<(Option<&T>, Option<&T>), usize> = HashMap::new();
    for &(p, g) in &cols {
        *by_pred.entry(p).or_default() += 1;
        *by_gold.entry(g).or_default() += 1;
        *by_pair.entry((p, g)).or_default() += 1;
    }
    let (mut precision, mut recall) = (0.0, 0.0);
    for &(p, g) in &cols {
        let both = by_pair[&(p, g)] as f64;
        precision += both / by_pred[&p] as f64;
        recall += both / by_gold[&g] as f64;
    }
    let n = cols.len() as f64;
    let (precision, recall) = (precision / n, recall / n);
    2.0 * precision * recall / (precision + recall)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn perfect_and_isomorphic() {
        assert_eq!(bcubed_f(&t("p i t"), &t("p i t")), 1.0);
        assert_eq!(bcubed_f(&t("x y x"), &t("a b a")), 1.0);
        assert_eq!(bcubed_f::<&str>(&[], &[]), 1.0);
    }

    #[test]
    fn merged_cluster() {
        // columns (a,a) (a,b): precision 1/2 each, recall 1 each
        let f = bcubed_f(&t("a a"), &t("a b"));
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }
}
