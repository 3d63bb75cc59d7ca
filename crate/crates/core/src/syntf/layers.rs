//! Per-position layer outputs and the limiting semantics of each layer.
//!
//! Block order inside every hidden vector follows the construction:
//!
//! ```text
//! h1 = (x_n; pos_n)
//! h2 = (x_n; x_{n-1}; ...; x_{n-M}; pos_n)
//! a2 = (h2 suffix blocks; g_{n,s_0..s_{M'-1}}; g<-_{n-1,s_0..s_{M'-1}}; pos_n)
//! h3 = (suffix blocks; p_{s_0..s_D}; le_{s_0..s_D}; lw_{s_D}; pos_n)
//! hl = (suffix blocks; p; le; δ_D ... δ_{D+4-l}; lw_{s_{D+3-l}}; pos_n)
//! ```
//!
//! Zero scratch space is not materialized.

use serde::{Deserialize, Serialize};

use crate::logmath::{dirichlet_log_evidence, log_add};
use crate::model::{Alphabet, CtwPrior, SuffixKey, Symbol};
use crate::pathblend::{delta_increment, dirichlet_mean, weights_from_delta, BlendWeights};
use crate::stats::{reconstruct_counts, CountTable, PathStats};

/// Sinusoidal positional triple `(1, cos(nπ/N), sin(nπ/N))`.
pub fn positional(n: usize, window: usize) -> [f64; 3] {
    let angle = n as f64 * std::f64::consts::PI / window.max(1) as f64;
    [1.0, angle.cos(), angle.sin()]
}

pub fn one_hot(alphabet: Alphabet, symbol: Symbol) -> Vec<f64> {
    let mut v = vec![0.0; alphabet.size()];
    v[symbol as usize] = 1.0;
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hidden1 {
    pub symbol: Vec<f64>,
    pub pos: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hidden2 {
    /// One-hot blocks x_n, x_{n-1}, ..., x_{n-M}; an all-zero block marks a
    /// position before the start of the padding.
    pub suffix: Vec<Vec<f64>>,
    pub pos: [f64; 3],
}

impl Hidden2 {
    /// Most-recent-first symbols decoded from the one-hot blocks.
    pub fn symbols(&self) -> Vec<Symbol> {
        self.suffix
            .iter()
            .map_while(|b| b.iter().position(|&v| v == 1.0).map(|a| a as Symbol))
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.suffix.iter().flatten().copied().chain(self.pos).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statistics2 {
    pub suffix: Vec<Vec<f64>>,
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
    pub pos: [f64; 3],
}

impl Statistics2 {
    pub fn flatten(&self) -> Vec<f64> {
        self.suffix
            .iter()
            .chain(&self.forward)
            .chain(&self.backward)
            .flatten()
            .copied()
            .chain(self.pos)
            .collect()
    }
}

/// Input to (and output of) the induction layers. `h3` is the case with no δ
/// entries and `level == D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionState {
    pub suffix: Vec<Vec<f64>>,
    /// Posterior means p_{s_0..s_D}.
    pub predictives: Vec<Vec<f64>>,
    /// ln p^e at s_0..s_D.
    pub log_pe: Vec<f64>,
    /// δ_D, δ_{D-1}, ... in the order they were produced.
    pub delta: Vec<f64>,
    /// Depth of the path node whose ln p^w is held.
    pub level: usize,
    pub log_pw: f64,
    pub pos: [f64; 3],
}

impl InductionState {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.suffix.iter().chain(&self.predictives).flatten().copied().collect();
        out.extend(&self.log_pe);
        out.extend(&self.delta);
        out.push(self.log_pw);
        out.extend(self.pos);
        out
    }

    /// Path symbols most-recent-first, as carried by the suffix blocks.
    pub fn path_symbols(&self) -> Vec<Symbol> {
        self.suffix
            .iter()
            .map_while(|b| b.iter().position(|&v| v == 1.0).map(|a| a as Symbol))
            .collect()
    }
}

/// Copy the `m` previous symbols below the current one. `recent_first` holds
/// x_n, x_{n-1}, ...; missing history yields zero blocks.
pub fn layer1_context_extension(alphabet: Alphabet, recent_first: &[Symbol], m: usize, pos: [f64; 3]) -> Hidden2 {
    let suffix = (0..=m)
        .map(|j| match recent_first.get(j) {
            Some(&s) => one_hot(alphabet, s),
            None => vec![0.0; alphabet.size()],
        })
        .collect();
    Hidden2 { suffix, pos }
}

/// Forward and backward statistics of the path suffixes s_0..s_{M'-1}, read
/// from the count table after `n` symbols: the c → ∞ limit of averaging over
/// every earlier position whose key matches the query suffix.
pub fn layer2_statistics(h2: &Hidden2, table: &CountTable, m_prime: usize) -> Statistics2 {
    let alphabet = table.alphabet();
    let symbols = h2.symbols();
    let mut key = SuffixKey::ROOT;
    let mut forward = Vec::with_capacity(m_prime);
    let mut backward = Vec::with_capacity(m_prime);
    for l in 0..m_prime {
        if l > 0 {
            key = key.child(alphabet, symbols[l - 1]);
        }
        forward.push(table.forward_stats(key));
        backward.push(table.backward_stats(key));
    }
    Statistics2 { suffix: h2.suffix.clone(), forward, backward, pos: h2.pos }
}

/// Feed-forward map from statistics to path evidence: recover counts, then
/// posterior means, closed-form `ln p^e`, and `ln p^w = ln p^e` at depth D.
pub fn ff_statistics_to_evidence(a2: &Statistics2, counts: &[Vec<f64>], prior: &CtwPrior) -> InductionState {
    let depth = prior.depth;
    InductionState {
        suffix: a2.suffix.clone(),
        predictives: counts.iter().map(|c| dirichlet_mean(&prior.alpha, c)).collect(),
        log_pe: counts.iter().map(|c| dirichlet_log_evidence(&prior.alpha, c)).collect(),
        delta: Vec::new(),
        level: depth,
        log_pw: dirichlet_log_evidence(&prior.alpha, &counts[depth]),
        pos: a2.pos,
    }
}

/// Counts along the path recovered from forward/backward statistics and the
/// position index alone.
pub fn counts_from_statistics(a2: &Statistics2, position: usize, depth: usize) -> (Vec<Vec<f64>>, Option<usize>) {
    let context: Vec<Symbol> = a2
        .suffix
        .iter()
        .map_while(|b| b.iter().position(|&v| v == 1.0).map(|a| a as Symbol))
        .collect();
    let stats = PathStats {
        forward: a2.forward[..=depth].to_vec(),
        backward: a2.backward[..=depth].to_vec(),
        position,
        context,
    };
    let r = reconstruct_counts(&stats);
    let rounded = r.rounded().into_iter().map(|v| v.into_iter().map(|c| c as f64).collect()).collect();
    (rounded, r.unseen_from)
}

/// One induction step at path depth `h.level`: combine the held `ln p^w` of
/// s_l with the retrieved sibling values `ln p^w_{q s_{l-1}}` (q ≠ on-path)
/// into δ_l and `ln p^w_{s_{l-1}}`.
pub fn induction_layer(h: &InductionState, prior: &CtwPrior, siblings: &dyn Fn(SuffixKey) -> f64) -> InductionState {
    let alphabet = prior.alphabet();
    let l = h.level;
    assert!(l >= 1, "induction past the root");
    let path = h.path_symbols();
    let parent = SuffixKey::from_recent_first(alphabet, &path[..l - 1]);
    let on_path = path[l - 1];
    let children: f64 = (0..alphabet.size() as u8)
        .map(|q| if q == on_path { h.log_pw } else { siblings(parent.child(alphabet, q)) })
        .sum();
    let ln_lambda = prior.lambda.ln();
    let ln_branch = (1.0 - prior.lambda).ln();
    let delta = delta_increment(ln_branch, ln_lambda, l == prior.depth, (h.log_pe[l - 1], h.log_pe[l]), children, h.log_pw);
    let mut next = h.clone();
    next.delta.push(delta);
    next.level = l - 1;
    next.log_pw = log_add(ln_lambda + h.log_pe[l - 1], ln_branch + children);
    next
}

/// Weights from the δ slots of the final hidden state.
pub fn output_weights(h: &InductionState) -> BlendWeights {
    // δ slots are stored deepest first.
    weights_from_delta(h.delta.iter().rev().copied().collect())
}

pub fn output_layer(h: &InductionState) -> Vec<f64> {
    crate::pathblend::blend_predict(&output_weights(h), &h.predictives)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_extension_copies() {
        let a = Alphabet::TERNARY;
        let h = layer1_context_extension(a, &[2, 1, 0], 2, positional(3, 8));
        assert_eq!(h.suffix, vec![one_hot(a, 2), one_hot(a, 1), one_hot(a, 0)]);
        let h0 = layer1_context_extension(a, &[1, 0], 0, positional(0, 8));
        assert_eq!(h0.suffix, vec![one_hot(a, 1)]);
        assert_eq!(h0.pos, [1.0, 1.0, 0.0]);
        let short = layer1_context_extension(a, &[1], 2, positional(0, 8));
        assert_eq!(short.symbols(), vec![1]);
    }

    #[test]
    fn positional_on_circle() {
        for n in 0..600 {
            let p = positional(n, 512);
            assert!((p[1] * p[1] + p[2] * p[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_evidence() {
        let prior = CtwPrior::jeffreys(Alphabet::TERNARY, 2, 0.15).unwrap();
        let table = CountTable::new(Alphabet::TERNARY, 2, &[0, 1]).unwrap();
        let h2 = layer1_context_extension(Alphabet::TERNARY, &[1, 0], 2, positional(0, 4));
        let a2 = layer2_statistics(&h2, &table, 3);
        let (counts, unseen) = counts_from_statistics(&a2, 0, 2);
        assert_eq!(unseen, Some(0));
        let h3 = ff_statistics_to_evidence(&a2, &counts, &prior);
        assert!(h3.log_pe.iter().all(|&v| v == 0.0));
        assert_eq!(h3.log_pw, h3.log_pe[2]);
        for p in &h3.predictives {
            assert_eq!(p, &vec![1.0 / 3.0; 3]);
        }
    }
}
