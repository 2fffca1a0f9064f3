/// Unit-cost Levenshtein distance.
pub fn token_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance with unit insertions/deletions and a caller-supplied
/// substitution cost.
pub fn weighted_edit_distance<T>(a: &[T], b: &[T], sub_cost: impl Fn(&T, &T) -> f64) -> f64 {
    let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64).collect();
    let mut cur = vec![0.0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = (i + 1) as f64;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + sub_cost(x, y);
            cur[j + 1] = sub.min(prev[j + 1] + 1.0).min(cur[j] + 1.0);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// One column of a pairwise alignment; `None` is a gap.
pub type Column<'a, T> = (Option<&'a T>, Option<&'a T>);

/// Minimum unit-cost alignment of `pred` against `gold`. The traceback runs
/// from the end and prefers substitution (or match), then deletion of a
/// `pred` symbol, then insertion of a `gold` symbol.
pub fn align<'a, T: PartialEq>(pred: &'a [T], gold: &'a [T]) -> Vec<Column<'a, T>> {
    let (n, m) = (pred.len(), gold.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(pred[i - 1] != gold[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let (mut i, mut j) = (n, m);
    let mut cols = Vec::with_capacity(n.max(m));
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + usize::from(pred[i - 1] != gold[j - 1]) {
            cols.push((Some(&pred[i - 1]), Some(&gold[j - 1])));
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            cols.push((Some(&pred[i - 1]), None));
            i -= 1;
        } else {
            cols.push((None, Some(&gold[j - 1])));
            j -= 1;
        }
    }
    cols.reverse();
    cols
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn examples() {
        assert_eq!(token_edit_distance(&t("p a t"), &t("p a t")), 0);
        assert_eq!(token_edit_distance(&t("p j e t"), &t("p i t")), 2);
        assert_eq!(token_edit_distance(&t(""), &t("a b")), 2);
    }

    #[test]
    fn alignment_cost_matches_distance() {
        let (a, b) = (t("p j e t"), t("p i t"));
        let cols = align(&a, &b);
        let cost: usize = cols
            .iter()
            .map(|(x, y)| match (x, y) {
                (Some(x), Some(y)) => usize::from(x != y),
                _ => 1,
            })
            .sum();
        assert_eq!(cost, 2);
        assert_eq!(cols.len(), 4);
    }
}
