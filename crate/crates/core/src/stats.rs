//! Suffix occurrence counts and the forward/backward k-gram statistics.
//!
//! `n_{i,s}(a)` counts how often symbol `a` followed suffix `s` in `x_1..x_i`.
//! Padding symbols supply context but are never counted as emitted symbols.
//!
//! Both statistics at position `i` are read from the same table after `i`
//! updates:
//!
//! ```text
//! g_{i,s}(a)    = n_{i,s}(a) / sum_q n_{i,s}(q)
//! g<-_{i-1,s}(a) = sum_q n_{i,as}(q) / sum_q n_{i,s}(q)
//! ```
//!
//! The denominator counts occurrences of `s` ending at positions `0..i-1`,
//! which is exactly what makes the telescoping product in
//! [`reconstruct_counts`] collapse to `sum_q n_{i,s_l}(q) / i`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Alphabet, Context, SuffixKey, Symbol};

#[derive(Clone, Debug)]
pub struct CountTable {
    alphabet: Alphabet,
    max_order: usize,
    context: Context,
    position: usize,
    counts: HashMap<SuffixKey, Box<[u32]>>,
}

impl CountTable {
    /// `padding` is oldest-first; only its last `max_order` symbols matter.
    pub fn new(alphabet: Alphabet, max_order: usize, padding: &[Symbol]) -> Result<Self> {
        alphabet.check_depth(max_order)?;
        for &s in padding {
            alphabet.check(s as usize)?;
        }
        Ok(Self {
            alphabet,
            max_order,
            context: Context::new(padding, max_order),
            position: 0,
            counts: HashMap::new(),
        })
    }

    pub fn update(&mut self, symbol: Symbol) -> Result<()> {
        self.alphabet.check(symbol as usize)?;
        let a = self.alphabet.size();
        for key in self.context.path(self.alphabet, self.max_order) {
            self.counts.entry(key).or_insert_with(|| vec![0; a].into_boxed_slice())[symbol as usize] += 1;
        }
        self.position += 1;
        self.context.push(symbol);
        Ok(())
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of symbols counted so far.
    pub fn position(&self) -> usize {
        self.position
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    pub fn counts(&self, key: SuffixKey) -> Vec<u32> {
        match self.counts.get(&key) {
            Some(c) => c.to_vec(),
            None => vec![0; self.alphabet.size()],
        }
    }

    pub fn total(&self, key: SuffixKey) -> u64 {
        self.counts.get(&key).map_or(0, |c| c.iter().map(|&v| v as u64).sum())
    }

    /// Number of distinct suffixes with at least one count.
    pub fn visited(&self) -> usize {
        self.counts.len()
    }

    /// Empirical next-symbol distribution after `s`; uniform when `s` is unseen.
    pub fn forward_stats(&self, key: SuffixKey) -> Vec<f64> {
        let total = self.total(key);
        if total == 0 {
            return self.alphabet.uniform();
        }
        self.counts(key).iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// Empirical previous-symbol distribution for `s`; uniform when `s` is
    /// unseen or when `as` lies beyond the tracked order.
    pub fn backward_stats(&self, key: SuffixKey) -> Vec<f64> {
        let total = self.total(key);
        if total == 0 || key.len(self.alphabet) >= self.max_order {
            return self.alphabet.uniform();
        }
        (0..self.alphabet.size())
            .map(|a| self.total(key.child(self.alphabet, a as Symbol)) as f64 / total as f64)
            .collect()
    }

    /// Sorted CSV rows `suffix,count_0,...`; the suffix is written oldest-first
    /// with symbols joined by `.`, the empty suffix as an empty field.
    pub fn dump_csv(&self) -> String {
        let mut rows: Vec<(Vec<Symbol>, &[u32])> = self
            .counts
            .iter()
            .map(|(k, c)| {
                let mut s = k.symbols(self.alphabet);
                s.reverse();
                (s, &c[..])
            })
            .collect();
        rows.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        let mut out = String::from("suffix");
        for a in 0..self.alphabet.size() {
            let _ = write!(out, ",n{a}");
        }
        out.push('\n');
        for (suffix, counts) in rows {
            let joined: Vec<String> = suffix.iter().map(|s| s.to_string()).collect();
            out.push_str(&joined.join("."));
            for c in counts {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Forward and backward statistics along the current suffix path, plus the
/// position index: everything count reconstruction is allowed to see.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// `g_{i, s_{i,l}}` for l = 0..=depth.
    pub forward: Vec<Vec<f64>>,
    /// `g<-_{i-1, s_{i,l}}` for l = 0..=depth.
    pub backward: Vec<Vec<f64>>,
    pub position: usize,
    /// Most-recent-first context symbols, at least `depth` of them.
    pub context: Vec<Symbol>,
}

impl PathStats {
    pub fn collect(table: &CountTable, depth: usize) -> Self {
        let path = table.context.path(table.alphabet, depth);
        Self {
            forward: path.iter().map(|&k| table.forward_stats(k)).collect(),
            backward: path.iter().map(|&k| table.backward_stats(k)).collect(),
            position: table.position,
            context: table.context.recent_first(),
        }
    }

    pub fn depth(&self) -> usize {
        self.forward.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// Real-valued counting vectors for l = 0..=depth, before rounding.
    pub counts: Vec<Vec<f64>>,
    /// First depth whose suffix has never occurred. Deeper counts are exactly
    /// zero because the backward factor into that depth is zero.
    pub unseen_from: Option<usize>,
}

impl Reconstruction {
    pub fn rounded(&self) -> Vec<Vec<u64>> {
        self.counts.iter().map(|v| v.iter().map(|&x| x.round().max(0.0) as u64).collect()).collect()
    }
}

/// `n_{i,s_l}(a) = g_{i,s_l}(a) * prod_{j<l} g<-_{i-1,s_j}(x_{i-j}) * i`.
pub fn reconstruct_counts(stats: &PathStats) -> Reconstruction {
    let mut scale = stats.position as f64;
    let mut counts = Vec::with_capacity(stats.forward.len());
    let mut unseen_from = None;
    for (l, g) in stats.forward.iter().enumerate() {
        if l > 0 {
            scale *= stats.backward[l - 1][stats.context[l - 1] as usize];
        }
        if unseen_from.is_none() && scale.round() == 0.0 {
            unseen_from = Some(l);
        }
        counts.push(g.iter().map(|&p| p * scale).collect());
    }
    Reconstruction { counts, unseen_from }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tern() -> Alphabet {
        Alphabet::TERNARY
    }

    fn table_after(seq: &[Symbol], order: usize, padding: &[Symbol]) -> CountTable {
        let mut t = CountTable::new(tern(), order, padding).unwrap();
        for &s in seq {
            t.update(s).unwrap();
        }
        t
    }

    /// Count occurrences by scanning the raw sequence.
    fn brute_counts(padding: &[Symbol], seq: &[Symbol], i: usize, suffix_recent_first: &[Symbol]) -> Vec<u32> {
        let full: Vec<Symbol> = padding.iter().chain(seq).copied().collect();
        let off = padding.len();
        let mut out = vec![0; 3];
        for t in 0..i {
            let pos = off + t;
            let l = suffix_recent_first.len();
            if pos < l {
                continue;
            }
            if (0..l).all(|j| full[pos - 1 - j] == suffix_recent_first[j]) {
                out[full[pos] as usize] += 1;
            }
        }
        out
    }

    #[test]
    fn table_one_string_counts() {
        // (a,b,c,a,b,b,c)
        let t = table_after(&[0, 1, 2, 0, 1, 1, 2], 2, &[]);
        assert_eq!(t.counts(SuffixKey::from_recent_first(tern(), &[1, 0])), vec![0, 1, 1]);
        assert_eq!(t.counts(SuffixKey::ROOT), vec![2, 3, 2]);
        let g = t.forward_stats(SuffixKey::ROOT);
        assert_eq!(g, vec![2.0 / 7.0, 3.0 / 7.0, 2.0 / 7.0]);
    }

    #[test]
    fn single_update_and_totals() {
        let t = table_after(&[0], 1, &[2]);
        assert_eq!(t.counts(SuffixKey::ROOT), vec![1, 0, 0]);
        let t = table_after(&[0, 2, 2, 1, 0, 1, 1], 3, &[0, 0, 0]);
        assert_eq!(t.total(SuffixKey::ROOT), 7);
    }

    #[test]
    fn forward_and_backward_examples() {
        let t = table_after(&[0, 1, 0, 1], 2, &[2, 2]);
        let a = SuffixKey::from_recent_first(tern(), &[0]);
        let b = SuffixKey::from_recent_first(tern(), &[1]);
        assert_eq!(t.forward_stats(a), vec![0.0, 1.0, 0.0]);
        assert_eq!(t.backward_stats(b)[0], 1.0);
        let unseen = SuffixKey::from_recent_first(tern(), &[1, 1]);
        assert_eq!(t.forward_stats(unseen), vec![1.0 / 3.0; 3]);
        assert_eq!(t.backward_stats(unseen), vec![1.0 / 3.0; 3]);
        // Root backward: fraction of positions 0..i-1 holding each symbol.
        // Positions 0..3 hold (padding x_0 = c, a, b, a).
        assert_eq!(t.backward_stats(SuffixKey::ROOT), vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn reconstruction_examples() {
        let t = table_after(&[0, 1, 0, 1, 0], 2, &[2, 2]);
        let st = PathStats::collect(&t, 2);
        let r = reconstruct_counts(&st);
        assert_eq!(r.rounded()[0], vec![3, 2, 0]);
        // Context ends (b, a): depth-1 suffix is (a).
        let a = SuffixKey::from_recent_first(tern(), &[0]);
        let want: Vec<u64> = brute_counts(&[2, 2], &[0, 1, 0, 1, 0], 5, &[0]).iter().map(|&c| c as u64).collect();
        assert_eq!(r.rounded()[1], want);
        assert_eq!(t.counts(a).iter().map(|&c| c as u64).collect::<Vec<_>>(), want);
    }

    #[test]
    fn unseen_path_reconstructs_zero() {
        let t = table_after(&[0, 0, 0, 1], 3, &[0, 0, 0]);
        // Context ends in b, which has never been followed by anything.
        let st = PathStats::collect(&t, 3);
        let r = reconstruct_counts(&st);
        assert_eq!(r.unseen_from, Some(1));
        assert!(r.counts[1..].iter().flatten().all(|&v| v == 0.0));
        assert_eq!(r.rounded()[0], vec![3, 1, 0]);
        let fresh = PathStats::collect(&CountTable::new(tern(), 2, &[1, 1]).unwrap(), 2);
        assert_eq!(reconstruct_counts(&fresh).unseen_from, Some(0));
    }

    #[test]
    fn dump_is_sorted() {
        let t = table_after(&[0, 1, 2], 1, &[]);
        let csv = t.dump_csv();
        assert_eq!(csv, "suffix,n0,n1,n2\n,1,1,1\n0,0,1,0\n1,0,0,1\n");
    }

    #[test]
    fn out_of_range_symbol() {
        let mut t = CountTable::new(tern(), 1, &[]).unwrap();
        assert!(t.update(3).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn counts_match_brute_force(seq in prop::collection::vec(0u8..3, 0..60), pad in prop::collection::vec(0u8..3, 3)) {
                let t = table_after(&seq, 3, &pad);
                for len in 0..=3usize {
                    for code in 0..3usize.pow(len as u32) {
                        let suffix: Vec<Symbol> = (0..len).map(|j| ((code / 3usize.pow(j as u32)) % 3) as Symbol).collect();
                        let key = SuffixKey::from_recent_first(tern(), &suffix);
                        prop_assert_eq!(t.counts(key), brute_counts(&pad, &seq, seq.len(), &suffix));
                    }
                }
            }

            #[test]
            fn conservation_with_padding(seq in prop::collection::vec(0u8..3, 0..80), pad in prop::collection::vec(0u8..3, 3)) {
                let t = table_after(&seq, 3, &pad);
                for len in 0..3usize {
                    for code in 0..3usize.pow(len as u32) {
                        let suffix: Vec<Symbol> = (0..len).map(|j| ((code / 3usize.pow(j as u32)) % 3) as Symbol).collect();
                        let key = SuffixKey::from_recent_first(tern(), &suffix);
                        let children: u64 = (0..3).map(|q| t.total(key.child(tern(), q))).sum();
                        prop_assert_eq!(children, t.total(key));
                    }
                }
            }

            #[test]
            fn stats_in_simplex(seq in prop::collection::vec(0u8..3, 0..80)) {
                let t = table_after(&seq, 3, &[1, 2, 0]);
                let st = PathStats::collect(&t, 3);
                for v in st.forward.iter().chain(&st.backward) {
                    prop_assert!(v.iter().all(|&p| (0.0..=1.0).contains(&p)));
                    prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
