//! PPM with method-A escapes and finite memory.
//!
//! Orders `k = 0..=D` keep a count table per length-`k` context. To code a
//! symbol the model starts at the longest context that has been seen; if the
//! symbol was observed there it is coded with `count / (total + 1)`, otherwise
//! an escape with `1 / (total + 1)` is charged and the next shorter order is
//! tried. Contexts never seen are skipped without an escape. Order −1 is the
//! uniform distribution. No exclusion.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::Result;
use crate::model::{Alphabet, Context, SuffixKey, Symbol};

#[derive(Clone, Debug)]
pub struct PpmModel {
    alphabet: Alphabet,
    max_order: usize,
    /// Index `k` holds the order-`k` tables.
    tables: Vec<HashMap<SuffixKey, Box<[u32]>>>,
}

impl PpmModel {
    pub fn new(alphabet: Alphabet, max_order: usize) -> Result<Self> {
        alphabet.check_depth(max_order)?;
        Ok(Self { alphabet, max_order, tables: vec![HashMap::new(); max_order + 1] })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Counts following the context `recent_first` (its length is the order).
    pub fn counts(&self, recent_first: &[Symbol]) -> Option<&[u32]> {
        let k = recent_first.len();
        self.tables.get(k)?.get(&SuffixKey::from_recent_first(self.alphabet, recent_first)).map(|c| &c[..])
    }

    /// Effective probability of `symbol` after `recent_first` (most-recent-first).
    pub fn predict(&self, recent_first: &[Symbol], symbol: Symbol) -> f64 {
        let top = self.max_order.min(recent_first.len());
        let mut escapes = 1.0;
        for k in (0..=top).rev() {
            let Some(counts) = self.counts(&recent_first[..k]) else { continue };
            let total: u32 = counts.iter().sum();
            let c = counts[symbol as usize];
            if c > 0 {
                return escapes * c as f64 / (total as f64 + 1.0);
            }
            escapes /= total as f64 + 1.0;
        }
        escapes / self.alphabet.size() as f64
    }

    /// Per-symbol effective probabilities; these need not sum to one.
    pub fn effective_vector(&self, recent_first: &[Symbol]) -> Vec<f64> {
        (0..self.alphabet.size()).map(|a| self.predict(recent_first, a as Symbol)).collect()
    }

    /// Effective probabilities renormalized into a distribution.
    pub fn predict_vector(&self, recent_first: &[Symbol]) -> Vec<f64> {
        let v = self.effective_vector(recent_first);
        let sum: f64 = v.iter().sum();
        v.into_iter().map(|p| p / sum).collect()
    }

    /// Count `symbol` after every suffix of the context up to the maximum order.
    pub fn update(&mut self, recent_first: &[Symbol], symbol: Symbol) -> Result<()> {
        self.alphabet.check(symbol as usize)?;
        let a = self.alphabet.size();
        let top = self.max_order.min(recent_first.len());
        let mut key = SuffixKey::ROOT;
        for k in 0..=top {
            if k > 0 {
                key = key.child(self.alphabet, recent_first[k - 1]);
            }
            self.tables[k].entry(key).or_insert_with(|| vec![0; a].into_boxed_slice())[symbol as usize] += 1;
        }
        Ok(())
    }

    /// Rows `order,context,symbol,count` for every nonzero cell, sorted; the
    /// context is oldest-first with symbols joined by `.`.
    pub fn dump_csv(&self) -> String {
        let mut rows = Vec::new();
        for (k, table) in self.tables.iter().enumerate() {
            for (key, counts) in table {
                let mut ctx = key.symbols(self.alphabet);
                ctx.reverse();
                for (a, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        rows.push((k, ctx.clone(), a, c));
                    }
                }
            }
        }
        rows.sort();
        let mut out = String::from("order,context,symbol,count\n");
        for (k, ctx, a, c) in rows {
            let ctx: Vec<String> = ctx.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(out, "{k},{},{a},{c}", ctx.join("."));
        }
        out
    }
}

/// PPM driven along a sequence from a padding context.
#[derive(Clone, Debug)]
pub struct PpmPredictor {
    model: PpmModel,
    context: Context,
}

impl PpmPredictor {
    pub fn new(alphabet: Alphabet, max_order: usize, padding: &[Symbol]) -> Result<Self> {
        Ok(Self { model: PpmModel::new(alphabet, max_order)?, context: Context::new(padding, max_order) })
    }

    pub fn predict(&self) -> Vec<f64> {
        self.model.predict_vector(&self.context.recent_first())
    }

    pub fn update(&mut self, symbol: Symbol) -> Result<()> {
        self.model.update(&self.context.recent_first(), symbol)?;
        self.context.push(symbol);
        Ok(())
    }

    pub fn model(&self) -> &PpmModel {
        &self.model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_sequence, seeded_rng, ContextTree, TreeShape};

    const A: Symbol = 0;
    const B: Symbol = 1;
    const C: Symbol = 2;

    fn table_one() -> PpmPredictor {
        let mut p = PpmPredictor::new(Alphabet::TERNARY, 2, &[]).unwrap();
        for s in [A, B, C, A, B, B, C] {
            p.update(s).unwrap();
        }
        p
    }

    #[test]
    fn worked_example_probabilities() {
        let p = table_one();
        let ctx = [C, B]; // context (b, c), latest c
        assert_eq!(p.model().predict(&ctx, A), 0.5);
        assert_eq!(p.model().predict(&ctx, B), 0.5 * 0.5 * 3.0 / 8.0);
        assert_eq!(p.model().predict(&ctx, C), 0.5 * 0.5 * 0.25);
        let v = p.predict();
        let raw = [0.5, 3.0 / 32.0, 1.0 / 16.0];
        let sum: f64 = raw.iter().sum();
        for (got, r) in v.iter().zip(raw) {
            assert!((got - r / sum).abs() < 1e-15);
        }
    }

    #[test]
    fn fresh_model_is_uniform() {
        let p = PpmPredictor::new(Alphabet::TERNARY, 3, &[0, 1, 2]).unwrap();
        assert_eq!(p.model().effective_vector(&[2, 1, 0]), vec![1.0 / 3.0; 3]);
        assert_eq!(p.predict(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn order_zero_totals() {
        let mut p = PpmPredictor::new(Alphabet::TERNARY, 2, &[0, 0]).unwrap();
        p.update(1).unwrap();
        assert_eq!(p.model().counts(&[]).unwrap().iter().sum::<u32>(), 1);
        for s in [0, 2, 2, 1, 0, 0, 1, 2] {
            p.update(s).unwrap();
        }
        assert_eq!(p.model().counts(&[]).unwrap().iter().sum::<u32>(), 9);
    }

    #[test]
    fn probabilities_bounded() {
        let mut rng = seeded_rng(2, 2);
        let tree = crate::model::sample_leaf_distributions(TreeShape::complete(Alphabet::TERNARY, 2), &[0.5; 3], &mut rng).unwrap();
        let seq = generate_sequence(&tree, 400, vec![0, 0, 0], &mut rng).unwrap();
        let mut p = PpmPredictor::new(Alphabet::TERNARY, 3, &seq.padding).unwrap();
        for &s in &seq.body {
            let ctx = p.context.recent_first();
            let eff = p.model().effective_vector(&ctx);
            assert!(eff.iter().all(|&v| v > 0.0 && v <= 1.0));
            assert!((p.predict().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            p.update(s).unwrap();
        }
    }

    #[test]
    fn converges_to_max_order_conditionals() {
        let mut rng = seeded_rng(8, 0);
        let shape = TreeShape::complete(Alphabet::TERNARY, 1);
        let dists = [vec![0.7, 0.2, 0.1], vec![0.1, 0.6, 0.3], vec![0.25, 0.25, 0.5]];
        let tree = ContextTree::new(shape, |n| dists[(n.key.0.saturating_sub(1)) as usize].clone()).unwrap();
        let seq = generate_sequence(&tree, 10_000, vec![0], &mut rng).unwrap();
        let mut p = PpmPredictor::new(Alphabet::TERNARY, 1, &seq.padding).unwrap();
        for &s in &seq.body {
            p.update(s).unwrap();
        }
        let mut gap = 0.0;
        for (ctx, d) in dists.iter().enumerate() {
            let v = p.model().predict_vector(&[ctx as Symbol]);
            gap += v.iter().zip(d).map(|(a, b)| (a - b).abs()).sum::<f64>();
        }
        assert!(gap / 3.0 < 0.05, "mean L1 gap {}", gap / 3.0);
    }
}
