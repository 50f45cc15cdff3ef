//! Enumeration of the index families used by the enumeration formula.
//!
//! Subsets come out by size ascending and lexicographically within a size.
//! That order is also the tie-breaking order of every maximum taken over
//! the family, so the sequential and parallel evaluations agree.

use super::IndexSet;

/// `C(n, k)` as `u64` (saturating on overflow).
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Number of index sets `I ⊆ {1..n}` with `min_size <= #I <= min(d, n)`.
pub fn family_size(n: usize, d: usize, min_size: usize) -> u64 {
    (min_size..=d.min(n)).fold(0u64, |acc, k| acc.saturating_add(binomial(n, k)))
}

/// Advance `combo` (strictly increasing, entries `< n`) to the next
/// combination of the same size in lexicographic order.
pub(crate) fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Calls `f` on every `k`-subset of `{0..n}` whose smallest element is
/// `first`, in lexicographic order. The slice passed to `f` is reused.
pub(crate) fn visit_with_first<F: FnMut(&[usize])>(n: usize, k: usize, first: usize, mut f: F) {
    debug_assert!(k >= 1);
    if first + k > n {
        return;
    }
    let mut combo: Vec<usize> = (first..first + k).collect();
    loop {
        f(&combo);
        if k == 1 {
            return;
        }
        // Only the tail moves; it never drops below `first + 1`.
        if !next_combination(&mut combo[1..], n) {
            return;
        }
    }
}

/// Iterator over all index sets with `min_size <= #I <= min(d, n)`.
#[derive(Debug, Clone)]
pub struct IndexSets {
    n: usize,
    max_size: usize,
    current: Vec<usize>,
    done: bool,
}

impl Iterator for IndexSets {
    type Item = IndexSet;

    fn next(&mut self) -> Option<IndexSet> {
        if self.done {
            return None;
        }
        let out = IndexSet::from_sorted_unchecked(self.current.clone());
        if !next_combination(&mut self.current, self.n) {
            let k = self.current.len() + 1;
            if k > self.max_size {
                self.done = true;
            } else {
                self.current = (0..k).collect();
            }
        }
        Some(out)
    }
}

/// All index sets of `{0..n}` with sizes from `min_size` to `min(d, n)`.
///
/// Yields nothing if `min_size` exceeds `min(d, n)` or `min_size == 0`.
pub fn enumerate_index_sets(n: usize, d: usize, min_size: usize) -> IndexSets {
    let max_size = d.min(n);
    IndexSets {
        n,
        max_size,
        current: (0..min_size).collect(),
        done: min_size == 0 || min_size > max_size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(500, 3), 20_708_500);
        assert_eq!(binomial(2000, 3), 1_331_334_000);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(family_size(4, 3, 2), 10);
        assert_eq!(family_size(5, 3, 1), 25);
    }

    #[test]
    fn small_families() {
        let sets: Vec<Vec<usize>> = enumerate_index_sets(2, 3, 1)
            .map(|s| s.as_slice().to_vec())
            .collect();
        assert_eq!(sets, vec![vec![0], vec![1], vec![0, 1]]);

        let sets: Vec<_> = enumerate_index_sets(4, 3, 2).collect();
        assert_eq!(sets.len(), 10);
        assert_eq!(sets[0].as_slice(), &[0, 1]);
        assert_eq!(sets[6].as_slice(), &[0, 1, 2]);
        assert_eq!(sets[9].as_slice(), &[1, 2, 3]);

        assert_eq!(enumerate_index_sets(5, 3, 1).count(), 25);
        assert_eq!(enumerate_index_sets(3, 3, 4).count(), 0);
        assert_eq!(enumerate_index_sets(3, 3, 0).count(), 0);
    }

    #[test]
    fn no_duplicates_and_binomial_count() {
        for n in 1..9 {
            for d in 2..6 {
                for min_size in 1..=d {
                    let sets: Vec<_> = enumerate_index_sets(n, d, min_size).collect();
                    let unique: HashSet<_> = sets.iter().cloned().collect();
                    assert_eq!(unique.len(), sets.len());
                    assert_eq!(sets.len() as u64, family_size(n, d, min_size));
                    for s in &sets {
                        assert!(s.as_slice().windows(2).all(|w| w[0] < w[1]));
                    }
                }
            }
        }
    }

    #[test]
    fn visit_with_first_partitions_each_size() {
        for n in 1..9 {
            for k in 1..5 {
                let mut seen = Vec::new();
                for first in 0..n {
                    visit_with_first(n, k, first, |c| {
                        assert_eq!(c[0], first);
                        seen.push(c.to_vec());
                    });
                }
                let reference: Vec<Vec<usize>> = enumerate_index_sets(n, k, k)
                    .map(|s| s.as_slice().to_vec())
                    .collect();
                assert_eq!(seen, reference, "n={n} k={k}");
            }
        }
    }
}
