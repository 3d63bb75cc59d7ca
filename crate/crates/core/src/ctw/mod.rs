//! Sequential context-tree weighting.
//!
//! Every node `s` on the current context path keeps its counting vector, the
//! log Dirichlet evidence `le = ln p^e_s` and the weighted evidence
//! `lw = ln p^w_s`, where
//!
//! ```text
//! p^w_s = p^e_s                                      if |s| = D
//!       = λ p^e_s + (1-λ) Π_q p^w_{qs}               otherwise
//! ```
//!
//! Nodes that were never visited are not stored; their `lw` is exactly 0.
//! `p^e` is accumulated as a sequential product of Dirichlet predictive
//! ratios; the Gamma closed form lives in [`crate::logmath`] and is only used
//! as an oracle.

mod oracle;

pub use oracle::{bayes_oracle_logprob, enumerate_trees, posterior_leaf_mass, tree_count, EnumeratedTree, ENUMERATION_LIMIT};

use std::collections::HashMap;

use crate::error::{Result, VomcError};
use crate::logmath::log_add;
use crate::model::{Alphabet, Context, CtwPrior, SourceSequence, SuffixKey, Symbol};

#[derive(Clone, Debug, PartialEq)]
pub struct CtwNode {
    pub counts: Box<[u32]>,
    pub total: u32,
    pub log_pe: f64,
    pub log_pw: f64,
}

impl CtwNode {
    fn empty(a: usize) -> Self {
        Self { counts: vec![0; a].into_boxed_slice(), total: 0, log_pe: 0.0, log_pw: 0.0 }
    }
}

/// Per-path evidence snapshot consumed by the path-blending predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct PathView {
    /// `ln p^e` at s_0..s_D.
    pub log_pe: Vec<f64>,
    /// `ln p^w` at s_0..s_D.
    pub log_pw: Vec<f64>,
    /// Entry `l-1` holds `Σ_q ln p^w_{q s_{l-1}}` for l = 1..=D, on-path child included.
    pub children_log_pw: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CtwState {
    prior: CtwPrior,
    alphabet: Alphabet,
    ln_lambda: f64,
    ln_branch: f64,
    alpha_sum: f64,
    nodes: HashMap<SuffixKey, CtwNode>,
    context: Context,
    observed: usize,
    touches: u64,
}

impl CtwState {
    /// `padding` is oldest-first and must hold at least `prior.depth` symbols.
    pub fn new(prior: CtwPrior, padding: &[Symbol]) -> Result<Self> {
        let alphabet = prior.alphabet();
        if padding.len() < prior.depth {
            return Err(VomcError::InsufficientContext { have: padding.len(), need: prior.depth });
        }
        for &s in padding {
            alphabet.check(s as usize)?;
        }
        Ok(Self {
            alphabet,
            ln_lambda: prior.lambda.ln(),
            ln_branch: (1.0 - prior.lambda).ln(),
            alpha_sum: prior.alpha_sum(),
            context: Context::new(padding, prior.depth),
            prior,
            nodes: HashMap::new(),
            observed: 0,
            touches: 0,
        })
    }

    pub fn prior(&self) -> &CtwPrior {
        &self.prior
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    /// Node lookups performed by predictions so far.
    pub fn touches(&self) -> u64 {
        self.touches
    }

    /// Running `ln P(x_1..x_n | padding)`.
    pub fn sequence_logprob(&self) -> f64 {
        self.log_pw(SuffixKey::ROOT)
    }

    pub fn node(&self, key: SuffixKey) -> Option<&CtwNode> {
        self.nodes.get(&key)
    }

    pub fn log_pe(&self, key: SuffixKey) -> f64 {
        self.nodes.get(&key).map_or(0.0, |n| n.log_pe)
    }

    pub fn log_pw(&self, key: SuffixKey) -> f64 {
        self.nodes.get(&key).map_or(0.0, |n| n.log_pw)
    }

    fn children_log_pw(&self, key: SuffixKey) -> f64 {
        (0..self.alphabet.size()).map(|q| self.log_pw(key.child(self.alphabet, q as Symbol))).sum()
    }

    fn mix(&self, log_pe: f64, children: f64) -> f64 {
        log_add(self.ln_lambda + log_pe, self.ln_branch + children)
    }

    fn ratio(&self, counts: &[u32], total: u32, symbol: usize) -> f64 {
        ((self.prior.alpha[symbol] + counts[symbol] as f64) / (self.alpha_sum + total as f64)).ln()
    }

    pub fn update(&mut self, symbol: Symbol) -> Result<()> {
        self.alphabet.check(symbol as usize)?;
        let a = self.alphabet.size();
        let depth = self.prior.depth;
        let path = self.context.path(self.alphabet, depth);
        for &key in &path {
            let step = {
                let n = self.nodes.get(&key);
                match n {
                    Some(n) => self.ratio(&n.counts, n.total, symbol as usize),
                    None => (self.prior.alpha[symbol as usize] / self.alpha_sum).ln(),
                }
            };
            let node = self.nodes.entry(key).or_insert_with(|| CtwNode::empty(a));
            node.log_pe += step;
            node.counts[symbol as usize] += 1;
            node.total += 1;
        }
        for (l, &key) in path.iter().enumerate().rev() {
            let log_pe = self.nodes[&key].log_pe;
            let log_pw = if l == depth { log_pe } else { self.mix(log_pe, self.children_log_pw(key)) };
            self.nodes.get_mut(&key).expect("node on path").log_pw = log_pw;
        }
        self.context.push(symbol);
        self.observed += 1;
        Ok(())
    }

    /// Bayesian predictive distribution of the next symbol, obtained as the
    /// ratio of root weighted evidences after a hypothetical update with each
    /// candidate symbol. Only the D+1 path nodes and their siblings are read.
    pub fn predict(&mut self) -> Vec<f64> {
        let a = self.alphabet.size();
        let depth = self.prior.depth;
        let path = self.context.path(self.alphabet, depth);
        let snapshot: Vec<Option<&CtwNode>> = path.iter().map(|k| self.nodes.get(k)).collect();
        // Σ_{q ≠ on-path} ln p^w_{q s_l}, unaffected by the candidate symbol.
        let off_path: Vec<f64> = (0..depth)
            .map(|l| {
                let on = self.context.get(l).expect("context holds D symbols") as usize;
                (0..a)
                    .filter(|&q| q != on)
                    .map(|q| self.log_pw(path[l].child(self.alphabet, q as Symbol)))
                    .sum()
            })
            .collect();
        let root_before = self.sequence_logprob();
        let mut out = Vec::with_capacity(a);
        for x in 0..a {
            let mut below = 0.0;
            for l in (0..=depth).rev() {
                let log_pe = match snapshot[l] {
                    Some(n) => n.log_pe + self.ratio(&n.counts, n.total, x),
                    None => (self.prior.alpha[x] / self.alpha_sum).ln(),
                };
                below = if l == depth { log_pe } else { self.mix(log_pe, off_path[l] + below) };
            }
            out.push((below - root_before).exp());
        }
        self.touches += ((depth + 1) * a + depth * (a - 1)) as u64;
        out
    }

    pub fn path_view(&self) -> PathView {
        let path = self.context.path(self.alphabet, self.prior.depth);
        PathView {
            log_pe: path.iter().map(|&k| self.log_pe(k)).collect(),
            log_pw: path.iter().map(|&k| self.log_pw(k)).collect(),
            children_log_pw: path[..path.len() - 1].iter().map(|&k| self.children_log_pw(k)).collect(),
        }
    }
}

/// `ln p^w_{n,()}` for the whole body of `seq`.
pub fn ctw_sequence_logprob(prior: &CtwPrior, seq: &SourceSequence) -> Result<f64> {
    let mut state = CtwState::new(prior.clone(), &seq.padding)?;
    for &s in &seq.body {
        state.update(s)?;
    }
    Ok(state.sequence_logprob())
}
